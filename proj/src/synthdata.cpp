#include "nrbdoor/synthdata.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <set>

#include "nrbdoor/error.hpp"
#include "nrbdoor/rng.hpp"

namespace nrb {

namespace {

constexpr std::array<const char*, kNumShapeFamilies> kFamilyNames = {
    "box", "ellipsoid", "cylinder", "cone", "pyramid", "torus"};

constexpr double kPi = std::numbers::pi;

using Idx = std::uint32_t;

// Triangle fan closing a ring around a hub vertex. `flip` reverses winding.
void add_cap(TriangleMesh& m, Idx hub, Idx ring0, Idx count, bool flip) {
  for (Idx i = 0; i < count; ++i) {
    const Idx a = ring0 + i, b = ring0 + (i + 1) % count;
    m.faces.push_back(flip ? Face{hub, b, a} : Face{hub, a, b});
  }
}

// Quad strip between two rings of equal size.
void add_band(TriangleMesh& m, Idx lower0, Idx upper0, Idx count) {
  for (Idx i = 0; i < count; ++i) {
    const Idx j = (i + 1) % count;
    m.faces.push_back({lower0 + i, lower0 + j, upper0 + j});
    m.faces.push_back({lower0 + i, upper0 + j, upper0 + i});
  }
}

void add_ring(TriangleMesh& m, Idx count, double radius_x, double radius_y, double z) {
  for (Idx i = 0; i < count; ++i) {
    const double t = 2.0 * kPi * i / count;
    m.vertices.push_back({radius_x * std::cos(t), radius_y * std::sin(t), z});
  }
}

TriangleMesh box() {
  TriangleMesh m;
  for (int i = 0; i < 8; ++i)
    m.vertices.push_back({(i & 1) ? 1.0 : -1.0, (i & 2) ? 1.0 : -1.0, (i & 4) ? 1.0 : -1.0});
  m.faces = {{0, 2, 3}, {0, 3, 1}, {4, 5, 7}, {4, 7, 6}, {0, 1, 5}, {0, 5, 4},
             {2, 6, 7}, {2, 7, 3}, {0, 4, 6}, {0, 6, 2}, {1, 3, 7}, {1, 7, 5}};
  return m;
}

TriangleMesh ellipsoid() {
  constexpr Idx slices = 16, stacks = 8;
  TriangleMesh m;
  m.vertices.push_back({0, 0, -1});
  for (Idx s = 1; s < stacks; ++s) {
    const double phi = -kPi / 2 + kPi * s / stacks;
    add_ring(m, slices, std::cos(phi), std::cos(phi), std::sin(phi));
  }
  const Idx top = static_cast<Idx>(m.vertices.size());
  m.vertices.push_back({0, 0, 1});
  add_cap(m, 0, 1, slices, true);
  for (Idx s = 0; s + 2 < stacks; ++s) add_band(m, 1 + s * slices, 1 + (s + 1) * slices, slices);
  add_cap(m, top, 1 + (stacks - 2) * slices, slices, false);
  return m;
}

TriangleMesh cylinder() {
  constexpr Idx slices = 16;
  TriangleMesh m;
  add_ring(m, slices, 1, 1, -1);
  add_ring(m, slices, 1, 1, 1);
  m.vertices.push_back({0, 0, -1});
  m.vertices.push_back({0, 0, 1});
  add_band(m, 0, slices, slices);
  add_cap(m, 2 * slices, 0, slices, true);
  add_cap(m, 2 * slices + 1, slices, slices, false);
  return m;
}

TriangleMesh cone() {
  constexpr Idx slices = 16;
  TriangleMesh m;
  add_ring(m, slices, 1, 1, -1);
  m.vertices.push_back({0, 0, -1});
  m.vertices.push_back({0, 0, 1});
  add_cap(m, slices, 0, slices, true);
  add_cap(m, slices + 1, 0, slices, false);
  return m;
}

TriangleMesh pyramid() {
  TriangleMesh m;
  m.vertices = {{-1, -1, -1}, {1, -1, -1}, {1, 1, -1}, {-1, 1, -1}, {0, 0, 1}};
  m.faces = {{0, 2, 1}, {0, 3, 2}, {0, 1, 4}, {1, 2, 4}, {2, 3, 4}, {3, 0, 4}};
  return m;
}

TriangleMesh torus() {
  constexpr Idx major = 16, minor = 8;
  constexpr double big_r = 1.0, small_r = 0.35;
  TriangleMesh m;
  for (Idx i = 0; i < major; ++i) {
    const double u = 2.0 * kPi * i / major;
    for (Idx j = 0; j < minor; ++j) {
      const double v = 2.0 * kPi * j / minor;
      const double ring = big_r + small_r * std::cos(v);
      m.vertices.push_back({ring * std::cos(u), ring * std::sin(u), small_r * std::sin(v)});
    }
  }
  auto at = [&](Idx i, Idx j) { return (i % major) * minor + (j % minor); };
  for (Idx i = 0; i < major; ++i)
    for (Idx j = 0; j < minor; ++j) {
      m.faces.push_back({at(i, j), at(i + 1, j), at(i + 1, j + 1)});
      m.faces.push_back({at(i, j), at(i + 1, j + 1), at(i, j + 1)});
    }
  return m;
}

LabeledDataset make_split(const SynthConfig& cfg, Split split, int per_class) {
  LabeledDataset ds;
  ds.split = split;
  for (int c = 0; c < cfg.num_classes; ++c) ds.class_names.push_back(family_name(c));
  const auto split_tag = static_cast<std::uint64_t>(split);
  ds.samples.resize(static_cast<std::size_t>(cfg.num_classes) * static_cast<std::size_t>(per_class));
  const auto total = static_cast<long>(ds.samples.size());
#pragma omp parallel for schedule(dynamic)
  for (long k = 0; k < total; ++k) {
    const int c = static_cast<int>(k / per_class);
    const int i = static_cast<int>(k % per_class);
    const auto seed = derive_seed(cfg.seed, {split_tag, static_cast<std::uint64_t>(c),
                                             static_cast<std::uint64_t>(i)});
    LabeledShape shape = make_shape(c, seed, cfg);
    char id[64];
    std::snprintf(id, sizeof id, "%s_%04d", kFamilyNames[static_cast<std::size_t>(c)], i);
    shape.id = id;
    ds.samples[static_cast<std::size_t>(k)] = std::move(shape);
  }
  return ds;
}

}  // namespace

std::string family_name(int class_id) {
  if (class_id < 0 || class_id >= kNumShapeFamilies)
    throw InvalidArgument("unknown shape class " + std::to_string(class_id));
  return kFamilyNames[static_cast<std::size_t>(class_id)];
}

TriangleMesh base_mesh(ShapeFamily family) {
  switch (family) {
    case ShapeFamily::kBox: return box();
    case ShapeFamily::kEllipsoid: return ellipsoid();
    case ShapeFamily::kCylinder: return cylinder();
    case ShapeFamily::kCone: return cone();
    case ShapeFamily::kPyramid: return pyramid();
    case ShapeFamily::kTorus: return torus();
  }
  throw InvalidArgument("unknown shape family");
}

void validate(const SynthConfig& cfg) {
  if (cfg.num_classes < 1 || cfg.num_classes > kNumShapeFamilies)
    throw InvalidArgument("num_classes must be in [1, " + std::to_string(kNumShapeFamilies) + "]");
  if (cfg.samples_per_class_train < 1 || cfg.samples_per_class_test < 1 ||
      cfg.points_per_cloud < 1)
    throw InvalidArgument("synth counts must be at least 1");
  if (!(cfg.jitter_scale >= 0.0)) throw InvalidArgument("jitter_scale must be non-negative");
}

void validate(const LabeledDataset& ds) {
  std::set<std::string> ids;
  for (const auto& s : ds.samples) {
    if (s.label < 0 || static_cast<std::size_t>(s.label) >= ds.class_names.size())
      throw InvalidArgument("sample '" + s.id + "' has label " + std::to_string(s.label) +
                            " outside the class list");
    if (!s.mesh && !s.cloud) throw InvalidArgument("sample '" + s.id + "' has no geometry");
    if (!ids.insert(s.id).second) throw InvalidArgument("duplicate sample id '" + s.id + "'");
  }
}

LabeledShape make_shape(int class_id, std::uint64_t stream_seed, const SynthConfig& cfg) {
  const auto family = static_cast<ShapeFamily>(class_id);
  family_name(class_id);  // range check
  Rng rng(stream_seed);
  TriangleMesh mesh = base_mesh(family);
  const Vec3 scale{rng.uniform(0.6, 1.4), rng.uniform(0.6, 1.4), rng.uniform(0.6, 1.4)};
  for (auto& v : mesh.vertices) {
    v = {v.x * scale.x, v.y * scale.y, v.z * scale.z};
    v = v + Vec3{rng.normal(0.0, cfg.jitter_scale), rng.normal(0.0, cfg.jitter_scale),
                 rng.normal(0.0, cfg.jitter_scale)};
  }
  mesh = normalize_unit_cube(mesh);
  LabeledShape out;
  out.id = family_name(class_id);
  out.label = class_id;
  out.cloud = sample_surface_points(mesh, cfg.points_per_cloud, rng.next_u64());
  out.mesh = std::move(mesh);
  return out;
}

std::pair<LabeledDataset, LabeledDataset> make_dataset(const SynthConfig& cfg) {
  validate(cfg);
  return {make_split(cfg, Split::kTrain, cfg.samples_per_class_train),
          make_split(cfg, Split::kTest, cfg.samples_per_class_test)};
}

}  // namespace nrb
