#pragma once

#include <filesystem>
#include <utility>
#include <vector>

#include "nrbdoor/poison.hpp"
#include "nrbdoor/synthdata.hpp"

namespace nrb {

/// Layout of a dataset directory:
///   classes.txt                 one class name per line
///   <split>/<class>/<id>.off    mesh (when present)
///   <split>/<class>/<id>.xyz    point cloud (when present)
/// A sample's label is the index of its class directory in classes.txt.
void write_split(const std::filesystem::path& root, const std::string& split_name, const LabeledDataset& ds);
LabeledDataset read_split(const std::filesystem::path& root, const std::string& split_name);

void write_classes(const std::filesystem::path& root, const std::vector<std::string>& names);
std::vector<std::string> read_classes(const std::filesystem::path& root);

void write_dataset(const std::filesystem::path& root, const LabeledDataset& train, const LabeledDataset& test);
std::pair<LabeledDataset, LabeledDataset> read_dataset(const std::filesystem::path& root);

/// Ground-truth sidecar of a triggered test split: "<id> <label>" lines.
void write_original_labels(const std::filesystem::path& file, const PoisonedTestSet& set);
std::vector<int> read_original_labels(const std::filesystem::path& file, const LabeledDataset& ds);

std::string read_text(const std::filesystem::path& file);
void write_text(const std::filesystem::path& file, std::string_view text);

}  // namespace nrb
