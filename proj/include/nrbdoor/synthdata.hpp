#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "nrbdoor/geom3d.hpp"

namespace nrb {

enum class ShapeFamily : int { kBox = 0, kEllipsoid, kCylinder, kCone, kPyramid, kTorus };

inline constexpr int kNumShapeFamilies = 6;

/// "box", "ellipsoid", ... Throws InvalidArgument for an unknown index.
std::string family_name(int class_id);

struct LabeledShape {
  std::string id;
  int label = 0;
  std::optional<TriangleMesh> mesh;
  std::optional<PointCloud> cloud;

  friend bool operator==(const LabeledShape&, const LabeledShape&) = default;
};

enum class Split { kTrain, kTest };

struct LabeledDataset {
  std::vector<std::string> class_names;
  std::vector<LabeledShape> samples;
  Split split = Split::kTrain;

  std::size_t size() const { return samples.size(); }
  std::size_t num_classes() const { return class_names.size(); }
  friend bool operator==(const LabeledDataset&, const LabeledDataset&) = default;
};

/// Checks labels index class_names, ids are unique and every sample carries
/// a mesh or a cloud.
void validate(const LabeledDataset& ds);

struct SynthConfig {
  int num_classes = 6;
  int samples_per_class_train = 40;
  int samples_per_class_test = 10;
  std::size_t points_per_cloud = 256;
  double jitter_scale = 0.02;
  std::uint64_t seed = 0;
};

void validate(const SynthConfig& cfg);

/// Closed, manifold base meshes before any per-sample randomization.
TriangleMesh base_mesh(ShapeFamily family);

/// One randomized sample of family `class_id`. All randomness comes from
/// `stream_seed`; equal arguments give identical shapes.
LabeledShape make_shape(int class_id, std::uint64_t stream_seed, const SynthConfig& cfg = {});

/// Class-balanced train/test splits. Sample (split, class, index) draws from
/// its own stream, so generation order does not matter.
std::pair<LabeledDataset, LabeledDataset> make_dataset(const SynthConfig& cfg);

}  // namespace nrb
