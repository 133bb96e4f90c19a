#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "nrbdoor/poison.hpp"
#include "nrbdoor/tinynet.hpp"

namespace nrb {

enum class CenterMode { kMean, kMedian };

/// kSingleShot drops the q highest-scoring points at once; kIterative drops
/// one point at a time and recomputes saliency after each drop.
enum class DropMode { kSingleShot, kIterative };

struct DefenseConfig {
  std::size_t q = 35;
  double beta = 1.0;
  double r_clamp = 1e-6;
  CenterMode center = CenterMode::kMean;
  DropMode drop = DropMode::kIterative;
};

void validate(const DefenseConfig& cfg);

struct SaliencyMap {
  std::vector<double> scores;       // s_i
  std::vector<double> radial_grad;  // dL/dr_i
  std::vector<double> radius;       // clamped r_i
  Vec3 center;
};

/// Cloud center used for radii: coordinate-wise mean or median.
Vec3 cloud_center(const PointCloud& cloud, CenterMode mode);

/// s_i = -(dL/dr_i) * r_i^(1 + beta), with dL/dr_i the projection of the
/// input gradient on the outward radial direction from the center.
SaliencyMap saliency_map(const ClassifierParams& params, const PointCloud& cloud, int label,
                         const DefenseConfig& cfg);

struct DropResult {
  PointCloud survivors;
  std::vector<std::size_t> dropped;  // original indices, highest score first
};

/// Removes the q highest-scoring points (lowest index first among equal
/// scores). Survivors keep their relative order.
DropResult drop_top_q(const PointCloud& cloud, const SaliencyMap& map, std::size_t q);

/// Full SP-defense on one cloud. The saliency label is the model's own
/// prediction on the input.
DropResult sp_defend(const ClassifierParams& params, const PointCloud& cloud, const DefenseConfig& cfg);

struct DefenseReport {
  double asr_before = 0.0;
  double asr_after = 0.0;
  double bac_before = 0.0;
  double bac_after = 0.0;
};

/// Attack success and benign accuracy with and without SP-defense.
DefenseReport sp_defense_eval(const ClassifierParams& params, const LabeledDataset& clean_test,
                              const LabeledDataset& poisoned_test, int target, const DefenseConfig& cfg);

/// Every sample's defended cloud, in dataset order.
std::vector<DropResult> sp_defend_all(const ClassifierParams& params, const LabeledDataset& dataset,
                                      const DefenseConfig& cfg);

/// Training with per-sample random clean rotations and/or uniform scaling.
/// With augmentation disabled this is exactly train().
ClassifierParams augmented_train(const ClassifierParams& params, const LabeledDataset& dataset,
                                 const TrainConfig& train_cfg, const Augmentation& aug);

}  // namespace nrb
