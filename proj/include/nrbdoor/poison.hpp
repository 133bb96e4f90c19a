#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "nrbdoor/geom3d.hpp"
#include "nrbdoor/pattern.hpp"
#include "nrbdoor/synthdata.hpp"

namespace nrb {

struct BallTriggerSpec {
  std::size_t num_points = 32;
  double radius = 0.05;
  Vec3 center_offset{0.6, 0.6, 0.6};
};

void validate(const BallTriggerSpec& spec);

/// The noisy-rotation trigger: every point p becomes R_n * p.
struct NrbdoorTrigger {
  NoisyRotation rotation;
};

/// A clean rotation used as a trigger (the noise-free control).
struct CleanRotationTrigger {
  RotationMatrix rotation;
};

/// Appends a small sphere of points near the cloud (point-attaching baseline).
/// Only defined for point clouds.
struct BallTrigger {
  BallTriggerSpec spec;
  std::uint64_t seed = 0;
};

using Trigger = std::variant<NrbdoorTrigger, CleanRotationTrigger, BallTrigger>;

/// "nrbdoor", "clean_rotation" or "ball".
std::string trigger_kind(const Trigger& t);

/// The linear map of a matrix trigger; identity-free triggers (ball) throw.
const Mat3& trigger_matrix(const Trigger& t);

struct PoisonedEntry {
  std::string id;
  int original_label = 0;
  friend bool operator==(const PoisonedEntry&, const PoisonedEntry&) = default;
};

struct PoisonManifest {
  Trigger trigger;
  double alpha = 0.0;
  int target = 0;
  std::vector<PoisonedEntry> poisoned;
  std::uint64_t seed = 0;
  /// Poisoned samples replace their clean originals in place.
  std::string injection = "substitution";
};

/// Test split with every sample triggered and relabeled, plus the ground
/// truth labels in dataset order.
struct PoisonedTestSet {
  LabeledDataset data;
  std::vector<int> original_labels;
};

template <typename Shape>
Shape apply_noisy_rotation_trigger(const Shape& shape, const NoisyRotation& r_n) {
  return apply_linear(shape, r_n.matrix());
}

PointCloud apply_ball_trigger(const PointCloud& cloud, const BallTriggerSpec& spec, std::uint64_t seed);
/// Always throws StructureIncompatible: a detached ball cannot be attached to a mesh.
TriangleMesh apply_ball_trigger(const TriangleMesh& mesh, const BallTriggerSpec& spec, std::uint64_t seed);

/// Applies the trigger to the sample's geometry. Matrix triggers transform
/// mesh and cloud alike; the ball trigger drops the mesh and extends the
/// cloud. `stream` seeds per-sample randomness.
LabeledShape apply_trigger(const LabeledShape& shape, const Trigger& trigger, std::uint64_t stream);

/// Number of samples poisoned at rate alpha: round(alpha * n).
std::size_t poison_count(double alpha, std::size_t n);

/// Poisons round(alpha * N) samples chosen uniformly without replacement.
std::pair<LabeledDataset, PoisonManifest> poison_train(const LabeledDataset& train, const Trigger& trigger,
                                                       double alpha, int target, std::uint64_t seed);

PoisonedTestSet poison_test(const LabeledDataset& test, const Trigger& trigger, int target);

/// Euler angles drawn uniformly from [0, 2 pi).
RotationMatrix random_clean_rotation(std::uint64_t seed);

/// Undo a poisoning from the manifest and the clean source.
LabeledDataset revert_poisoning(const LabeledDataset& poisoned, const LabeledDataset& source,
                                const PoisonManifest& manifest);

}  // namespace nrb
