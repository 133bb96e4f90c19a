#include "nrbdoor/dataset_io.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "nrbdoor/error.hpp"

namespace nrb {

namespace fs = std::filesystem;

std::string read_text(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError("cannot open '" + file.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& file, std::string_view text) {
  if (file.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(file.parent_path(), ec);
    if (ec) throw IoError("cannot create '" + file.parent_path().string() + "': " + ec.message());
  }
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + file.string() + "' for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError("failed writing '" + file.string() + "'");
}

void write_classes(const fs::path& root, const std::vector<std::string>& names) {
  std::string text;
  for (const auto& n : names) text += n + "\n";
  write_text(root / "classes.txt", text);
}

std::vector<std::string> read_classes(const fs::path& root) {
  std::istringstream in(read_text(root / "classes.txt"));
  std::vector<std::string> names;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) names.push_back(line);
  }
  if (names.empty()) throw IoError("'" + (root / "classes.txt").string() + "' lists no classes");
  return names;
}

void write_split(const fs::path& root, const std::string& split_name, const LabeledDataset& ds) {
  validate(ds);
  for (const auto& s : ds.samples) {
    const fs::path dir = root / split_name / ds.class_names[static_cast<std::size_t>(s.label)];
    if (s.mesh) write_text(dir / (s.id + ".off"), emit_off(*s.mesh));
    if (s.cloud) write_text(dir / (s.id + ".xyz"), emit_xyz(*s.cloud));
  }
}

LabeledDataset read_split(const fs::path& root, const std::string& split_name) {
  LabeledDataset ds;
  ds.class_names = read_classes(root);
  ds.split = split_name == "train" ? Split::kTrain : Split::kTest;
  if (!fs::is_directory(root / split_name))
    throw IoError("missing split directory '" + (root / split_name).string() + "'");
  for (std::size_t c = 0; c < ds.class_names.size(); ++c) {
    const fs::path dir = root / split_name / ds.class_names[c];
    if (!fs::is_directory(dir)) continue;
    // Group .off/.xyz by stem; sorted for a stable order.
    std::map<std::string, LabeledShape> by_id;
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      const auto ext = f.extension().string();
      if (ext != ".off" && ext != ".xyz") continue;
      auto& s = by_id[f.stem().string()];
      s.id = f.stem().string();
      s.label = static_cast<int>(c);
      try {
        if (ext == ".off")
          s.mesh = parse_off(read_text(f));
        else
          s.cloud = parse_xyz(read_text(f));
      } catch (const ParseError& e) {
        throw ParseError(e.line(), f.string() + ": " + e.what());
      }
    }
    for (auto& [id, s] : by_id) ds.samples.push_back(std::move(s));
  }
  validate(ds);
  return ds;
}

void write_dataset(const fs::path& root, const LabeledDataset& train, const LabeledDataset& test) {
  write_classes(root, train.class_names);
  write_split(root, "train", train);
  write_split(root, "test", test);
}

std::pair<LabeledDataset, LabeledDataset> read_dataset(const fs::path& root) {
  return {read_split(root, "train"), read_split(root, "test")};
}

void write_original_labels(const fs::path& file, const PoisonedTestSet& set) {
  std::string text;
  for (std::size_t i = 0; i < set.data.size(); ++i)
    text += set.data.samples[i].id + " " + std::to_string(set.original_labels[i]) + "\n";
  write_text(file, text);
}

std::vector<int> read_original_labels(const fs::path& file, const LabeledDataset& ds) {
  std::istringstream in(read_text(file));
  std::map<std::string, int> labels;
  std::string id;
  int label = 0;
  std::size_t line = 0;
  while (in >> id >> label) {
    ++line;
    labels[id] = label;
  }
  if (!in.eof()) throw ParseError(line + 1, file.string() + ": expected '<id> <label>'");
  std::vector<int> out;
  for (const auto& s : ds.samples) {
    auto it = labels.find(s.id);
    if (it == labels.end()) throw IoError(file.string() + ": no original label for '" + s.id + "'");
    out.push_back(it->second);
  }
  return out;
}

}  // namespace nrb
