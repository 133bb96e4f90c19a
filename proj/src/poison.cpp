#include "nrbdoor/poison.hpp"

#include <cmath>
#include <numbers>
#include <numeric>
#include <unordered_map>

#include "nrbdoor/error.hpp"
#include "nrbdoor/rng.hpp"

namespace nrb {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

}  // namespace

void validate(const BallTriggerSpec& spec) {
  if (spec.num_points < 1) throw InvalidArgument("ball trigger needs at least one point");
  if (!(spec.radius > 0.0)) throw InvalidArgument("ball radius must be positive");
  if (!spec.center_offset.finite()) throw InvalidArgument("ball offset must be finite");
}

std::string trigger_kind(const Trigger& t) {
  return std::visit(overloaded{[](const NrbdoorTrigger&) { return std::string("nrbdoor"); },
                               [](const CleanRotationTrigger&) { return std::string("clean_rotation"); },
                               [](const BallTrigger&) { return std::string("ball"); }},
                    t);
}

const Mat3& trigger_matrix(const Trigger& t) {
  if (const auto* n = std::get_if<NrbdoorTrigger>(&t)) return n->rotation.matrix();
  if (const auto* c = std::get_if<CleanRotationTrigger>(&t)) return c->rotation.matrix();
  throw InvalidArgument("ball trigger has no matrix");
}

PointCloud apply_ball_trigger(const PointCloud& cloud, const BallTriggerSpec& spec, std::uint64_t seed) {
  validate(cloud);
  validate(spec);
  Vec3 centroid{};
  for (const auto& p : cloud.points) centroid = centroid + p;
  centroid = centroid * (1.0 / static_cast<double>(cloud.size()));
  const Vec3 center = centroid + spec.center_offset;

  PointCloud out = cloud;
  out.points.reserve(cloud.size() + spec.num_points);
  Rng rng(seed);
  for (std::size_t k = 0; k < spec.num_points; ++k) {
    // Uniform on the sphere: normalized Gaussian direction.
    Vec3 d{rng.normal(), rng.normal(), rng.normal()};
    double len = d.norm();
    while (len < 1e-12) {
      d = {rng.normal(), rng.normal(), rng.normal()};
      len = d.norm();
    }
    out.points.push_back(center + d * (spec.radius / len));
  }
  return out;
}

TriangleMesh apply_ball_trigger(const TriangleMesh&, const BallTriggerSpec&, std::uint64_t) {
  throw StructureIncompatible("ball trigger cannot be attached to a triangle mesh");
}

LabeledShape apply_trigger(const LabeledShape& shape, const Trigger& trigger, std::uint64_t stream) {
  LabeledShape out = shape;
  std::visit(overloaded{[&](const NrbdoorTrigger& t) {
                          if (out.mesh) out.mesh = apply_noisy_rotation_trigger(*out.mesh, t.rotation);
                          if (out.cloud) out.cloud = apply_noisy_rotation_trigger(*out.cloud, t.rotation);
                        },
                        [&](const CleanRotationTrigger& t) {
                          if (out.mesh) out.mesh = apply_linear(*out.mesh, t.rotation.matrix());
                          if (out.cloud) out.cloud = apply_linear(*out.cloud, t.rotation.matrix());
                        },
                        [&](const BallTrigger& t) {
                          if (!out.cloud)
                            throw StructureIncompatible("sample '" + shape.id +
                                                        "' has no point cloud for the ball trigger");
                          out.cloud = apply_ball_trigger(*out.cloud, t.spec, derive_seed(t.seed, {stream}));
                          out.mesh.reset();
                        }},
             trigger);
  return out;
}

std::size_t poison_count(double alpha, std::size_t n) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw InvalidArgument("poison rate alpha must be in (0, 1]");
  return static_cast<std::size_t>(std::llround(alpha * static_cast<double>(n)));
}

std::pair<LabeledDataset, PoisonManifest> poison_train(const LabeledDataset& train, const Trigger& trigger,
                                                       double alpha, int target, std::uint64_t seed) {
  if (target < 0 || static_cast<std::size_t>(target) >= train.num_classes())
    throw InvalidArgument("target label " + std::to_string(target) + " is not a valid class");
  const std::size_t count = poison_count(alpha, train.size());

  // Partial Fisher-Yates: the first `count` slots are the chosen samples.
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = 0; i < count; ++i)
    std::swap(order[i], order[i + static_cast<std::size_t>(rng.below(order.size() - i))]);
  std::vector<std::size_t> chosen(order.begin(), order.begin() + static_cast<long>(count));
  std::sort(chosen.begin(), chosen.end());

  LabeledDataset out = train;
  PoisonManifest manifest{trigger, alpha, target, {}, seed};
  for (std::size_t idx : chosen) {
    auto& s = out.samples[idx];
    manifest.poisoned.push_back({s.id, s.label});
    s = apply_trigger(s, trigger, idx);
    s.label = target;
  }
  return {std::move(out), std::move(manifest)};
}

PoisonedTestSet poison_test(const LabeledDataset& test, const Trigger& trigger, int target) {
  if (target < 0 || static_cast<std::size_t>(target) >= test.num_classes())
    throw InvalidArgument("target label " + std::to_string(target) + " is not a valid class");
  PoisonedTestSet out{test, {}};
  out.original_labels.reserve(test.size());
  for (std::size_t i = 0; i < test.size(); ++i) {
    auto& s = out.data.samples[i];
    out.original_labels.push_back(s.label);
    s = apply_trigger(s, trigger, i);
    s.label = target;
  }
  return out;
}

RotationMatrix random_clean_rotation(std::uint64_t seed) {
  Rng rng(seed);
  constexpr double two_pi = 2.0 * std::numbers::pi;
  const double ax = rng.uniform(0.0, two_pi);
  const double ay = rng.uniform(0.0, two_pi);
  const double az = rng.uniform(0.0, two_pi);
  return euler_rotation(ax, ay, az);
}

LabeledDataset revert_poisoning(const LabeledDataset& poisoned, const LabeledDataset& source,
                                const PoisonManifest& manifest) {
  std::unordered_map<std::string, std::size_t> by_id;
  for (std::size_t i = 0; i < source.size(); ++i) by_id.emplace(source.samples[i].id, i);
  LabeledDataset out = poisoned;
  std::unordered_map<std::string, std::size_t> out_index;
  for (std::size_t i = 0; i < out.size(); ++i) out_index.emplace(out.samples[i].id, i);
  for (const auto& e : manifest.poisoned) {
    const auto src = by_id.find(e.id);
    const auto dst = out_index.find(e.id);
    if (src == by_id.end() || dst == out_index.end())
      throw InvalidArgument("manifest id '" + e.id + "' not found");
    auto& s = out.samples[dst->second];
    s.mesh = source.samples[src->second].mesh;
    s.cloud = source.samples[src->second].cloud;
    s.label = e.original_label;
  }
  return out;
}

}  // namespace nrb
