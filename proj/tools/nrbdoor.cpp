// nrbdoor command line: dataset synthesis, trigger crafting, poisoning,
// training, evaluation, SP-defense and experiment runs.
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "nrbdoor/dataset_io.hpp"
#include "nrbdoor/defense.hpp"
#include "nrbdoor/error.hpp"
#include "nrbdoor/harness.hpp"
#include "nrbdoor/pattern.hpp"
#include "nrbdoor/poison.hpp"
#include "nrbdoor/selection.hpp"
#include "nrbdoor/synthdata.hpp"
#include "nrbdoor/tinynet.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace nrb;

namespace {

// Wrong flags or missing inputs the user has to fix on the command line.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "nrbdoor_out";
};

ExperimentConfig load_config(const Globals& g) {
  ExperimentConfig cfg = default_experiment_config();
  if (!g.config.empty()) {
    json j;
    try {
      j = json::parse(read_text(g.config));
    } catch (const json::parse_error& e) {
      throw std::runtime_error(g.config + ": " + e.what());
    }
    cfg = config_from_json(j);
  }
  if (g.seed) cfg.seeds = seeds_from_master(*g.seed);
  return cfg;
}

std::string header(const std::string& what, const ExperimentConfig& cfg) {
  std::ostringstream s;
  s << what << " gamma=" << cfg.gamma << " alpha=" << cfg.alpha << " target=" << cfg.target
    << " selection_seed=" << cfg.seeds.selection;
  return s.str();
}

void write_json(const fs::path& file, const json& j) { write_text(file, j.dump(2) + "\n"); }

ClassifierParams load_params(const std::string& file) { return deserialize_params(read_text(file)); }

void cmd_synth(const Globals& g) {
  ExperimentConfig cfg = load_config(g);
  cfg.synth.seed = cfg.seeds.data;
  const auto [train, test] = make_dataset(cfg.synth);
  write_dataset(g.out, train, test);
  std::printf("wrote %zu train and %zu test shapes to %s\n", train.size(), test.size(), g.out.c_str());
}

void cmd_craft(const Globals& g, const std::string& data) {
  ExperimentConfig cfg = load_config(g);
  if (!data.empty()) cfg.data_dir = data;
  const auto [train, test] = load_experiment_data(cfg);
  const auto clean = train_clean_baseline(cfg, train, test);

  SelectionConfig sc = cfg.selection;
  sc.gamma = cfg.gamma;
  sc.alpha = cfg.alpha;
  sc.target = cfg.target;
  sc.seed = cfg.seeds.selection;
  const auto sel = select_pattern(train, test, sc, cfg.warm_start_selection ? &clean.params : nullptr);

  fs::create_directories(g.out);
  std::string cands;
  for (std::size_t i = 0; i < sel.report.candidates.size(); ++i)
    cands += emit_matrix(compose(sel.report.candidates[i]).matrix(), "candidate " + std::to_string(i));
  write_text(fs::path(g.out) / "candidates.txt", cands);
  write_text(fs::path(g.out) / "pattern.txt",
             emit_matrix(sel.pattern.matrix(), header("nrbdoor selected candidate " +
                                                          std::to_string(sel.report.chosen), cfg)));
  write_json(fs::path(g.out) / "selection_report.json", selection_to_json(sel.report));
  std::printf("clean oBAc %.4f; chose candidate %zu (score %.4f)\n", clean.obac, sel.report.chosen,
              sel.report.scores[sel.report.chosen]);
}

void cmd_poison(const Globals& g, const std::string& data, const std::string& matrix) {
  ExperimentConfig cfg = load_config(g);
  if (data.empty()) throw UsageError("poison needs --data <dataset dir>");
  if (!matrix.empty()) {
    cfg.trigger.kind = TriggerKind::kFixedMatrix;
    cfg.trigger.matrix = parse_matrix(read_text(matrix));
  }
  if (cfg.trigger.kind == TriggerKind::kNrbdoor)
    throw UsageError("poison needs --matrix <file> (see craft) or a non-nrbdoor trigger in the config");
  const Trigger trigger = fixed_trigger(cfg);
  const auto [train, test] = read_dataset(data);
  const auto [poisoned, manifest] = poison_train(train, trigger, cfg.alpha, cfg.target, cfg.seeds.poison);
  const auto triggered = poison_test(test, trigger, cfg.target);

  write_dataset(g.out, poisoned, test);
  write_split(g.out, "test_poisoned", triggered.data);
  write_original_labels(fs::path(g.out) / "test_poisoned" / "original_labels.txt", triggered);
  write_json(fs::path(g.out) / "manifest.json", manifest_to_json(manifest));
  std::printf("poisoned %zu of %zu training shapes (%s trigger)\n", manifest.poisoned.size(), train.size(),
              trigger_kind(trigger).c_str());
}

void cmd_train(const Globals& g, const std::string& data) {
  ExperimentConfig cfg = load_config(g);
  if (data.empty()) throw UsageError("train needs --data <dataset dir>");
  const auto train = read_split(data, "train");
  const auto params = train_victim(cfg, train);
  fs::create_directories(g.out);
  write_text(fs::path(g.out) / "params.bin", serialize_params(params));
  std::printf("train accuracy %.4f; wrote %s\n", evaluate(params, train),
              (fs::path(g.out) / "params.bin").c_str());
}

json eval_json(const ClassifierParams& params, const fs::path& data, const ExperimentConfig& cfg) {
  json j;
  j["bac"] = round4(bac(params, read_split(data, "test")));
  if (fs::exists(data / "test_poisoned")) {
    PoisonedTestSet set;
    set.data = read_split(data, "test_poisoned");
    set.original_labels = read_original_labels(data / "test_poisoned" / "original_labels.txt", set.data);
    j["asr"] = round4(asr(params, set, cfg.target, cfg.exclude_target_class));
  }
  return j;
}

void cmd_eval(const Globals& g, const std::string& data, const std::string& params_file) {
  ExperimentConfig cfg = load_config(g);
  if (data.empty() || params_file.empty()) throw UsageError("eval needs --data and --params");
  const auto j = eval_json(load_params(params_file), data, cfg);
  fs::create_directories(g.out);
  write_json(fs::path(g.out) / "eval.json", j);
  std::printf("%s\n", j.dump().c_str());
}

void cmd_defend(const Globals& g, const std::string& data, const std::string& params_file, const std::string& split) {
  ExperimentConfig cfg = load_config(g);
  if (data.empty() || params_file.empty()) throw UsageError("defend needs --data and --params");
  const auto params = load_params(params_file);
  const auto ds = read_split(data, split);
  const fs::path dir = fs::path(g.out) / "saliency";
  fs::create_directories(dir);

  std::size_t hits = 0;
  for (const auto& s : ds.samples) {
    if (!s.cloud) throw StructureIncompatible("sample '" + s.id + "' has no point cloud");
    const int label = predict(params, *s.cloud);
    const auto map = saliency_map(params, *s.cloud, label, cfg.defense);
    std::string dump;
    char line[160];
    for (std::size_t i = 0; i < s.cloud->size(); ++i) {
      const Vec3& p = s.cloud->points[i];
      std::snprintf(line, sizeof line, "%.9g %.9g %.9g %.9g\n", p.x, p.y, p.z, map.scores[i] + 0.0);
      dump += line;
    }
    write_text(dir / (s.id + ".txt"), dump);
    const auto result = sp_defend(params, *s.cloud, cfg.defense);
    std::string dropped;
    for (std::size_t idx : result.dropped) dropped += std::to_string(idx) + "\n";
    write_text(dir / (s.id + ".dropped"), dropped);
    if (predict(params, result.survivors) == (split == "test_poisoned" ? cfg.target : s.label)) ++hits;
  }
  const double rate = ds.size() ? static_cast<double>(hits) / static_cast<double>(ds.size()) : 0.0;
  std::printf("%s after defense: %.4f over %zu shapes; dumps in %s\n",
              split == "test_poisoned" ? "ASR" : "accuracy", rate, ds.size(), dir.c_str());
}

void cmd_run(const Globals& g, const std::string& data) {
  ExperimentConfig cfg = load_config(g);
  if (!data.empty()) cfg.data_dir = data;
  const auto r = run_attack_experiment(cfg);
  fs::create_directories(g.out);
  emit_report(r, ReportFormat::kJson, fs::path(g.out) / "report.json");
  emit_report(r, ReportFormat::kCsv, fs::path(g.out) / "report.csv");
  std::printf("oBAc %.4f BAc %.4f ASR %.4f gamma %.1f\n", r.obac, r.bac, r.asr, r.gamma);
}

void cmd_sweep(const Globals& g, const std::string& data, const std::string& axis, const std::vector<double>& values) {
  ExperimentConfig cfg = load_config(g);
  if (!data.empty()) cfg.data_dir = data;
  SweepAxis a;
  try {
    a = sweep_axis_from_string(axis);
  } catch (const InvalidArgument& e) {
    throw UsageError(e.what());
  }
  const auto reports = sweep(cfg, a, values);
  fs::create_directories(g.out);
  emit_report(reports, ReportFormat::kCsv, fs::path(g.out) / "sweep.csv");
  emit_report(reports, ReportFormat::kJson, fs::path(g.out) / "sweep.json");
  std::fputs(reports_to_csv(reports).c_str(), stdout);
}

void cmd_report(const Globals& g, const std::string& in, const std::string& format) {
  json j;
  try {
    j = json::parse(read_text(in));
  } catch (const json::parse_error& e) {
    throw std::runtime_error(in + ": " + e.what());
  }
  std::vector<ExperimentReport> reports;
  if (j.is_array())
    for (const auto& r : j) reports.push_back(report_from_json(r));
  else
    reports.push_back(report_from_json(j));
  fs::create_directories(g.out);
  const bool csv = format == "csv";
  const fs::path file = fs::path(g.out) / (csv ? "report.csv" : "report.json");
  if (reports.size() == 1)
    emit_report(reports.front(), csv ? ReportFormat::kCsv : ReportFormat::kJson, file);
  else
    emit_report(reports, csv ? ReportFormat::kCsv : ReportFormat::kJson, file);
  std::printf("wrote %s\n", file.c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Noisy-rotation backdoor lab for point-cloud classifiers"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config, "JSON experiment config")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "master seed applied to every stage");
  app.add_option("--out", g.out, "output directory")->capture_default_str();

  std::string data, params, matrix, split = "test_poisoned", axis, in, format = "csv";
  std::vector<double> values;

  auto* synth = app.add_subcommand("synth", "write a synthetic dataset directory");
  auto* craft = app.add_subcommand("craft", "generate candidates and select a trigger pattern");
  craft->add_option("--data", data, "dataset directory (default: synthesize)");
  auto* poison = app.add_subcommand("poison", "write a poisoned copy of a dataset");
  poison->add_option("--data", data, "dataset directory")->required();
  poison->add_option("--matrix", matrix, "trigger matrix file from craft");
  auto* train = app.add_subcommand("train", "train a classifier on a dataset's train split");
  train->add_option("--data", data, "dataset directory")->required();
  auto* eval = app.add_subcommand("eval", "benign accuracy and, if present, ASR on test_poisoned");
  eval->add_option("--data", data, "dataset directory")->required();
  eval->add_option("--params", params, "params file from train")->required();
  auto* defend = app.add_subcommand("defend", "SP-defense with saliency dumps");
  defend->add_option("--data", data, "dataset directory")->required();
  defend->add_option("--params", params, "params file from train")->required();
  defend->add_option("--split", split, "split to defend")->capture_default_str();
  auto* run = app.add_subcommand("run", "full attack experiment");
  run->add_option("--data", data, "dataset directory (default: synthesize)");
  auto* sw = app.add_subcommand("sweep", "one experiment per value of an axis");
  sw->add_option("--data", data, "dataset directory (default: synthesize)");
  sw->add_option("--axis", axis, "gamma, alpha, K, M or target")->required();
  sw->add_option("--values", values, "values to sweep")->required()->delimiter(',');
  auto* report = app.add_subcommand("report", "convert a report between JSON and CSV");
  report->add_option("--in", in, "report JSON")->required()->check(CLI::ExistingFile);
  report->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}))->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*synth) cmd_synth(g);
    else if (*craft) cmd_craft(g, data);
    else if (*poison) cmd_poison(g, data, matrix);
    else if (*train) cmd_train(g, data);
    else if (*eval) cmd_eval(g, data, params);
    else if (*defend) cmd_defend(g, data, params, split);
    else if (*run) cmd_run(g, data);
    else if (*sw) cmd_sweep(g, data, axis, values);
    else if (*report) cmd_report(g, in, format);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
