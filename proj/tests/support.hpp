#pragma once
#include <cmath>
#include <algorithm>
#include <cstdint>
#include <vector>

#include "nrbdoor/geom3d.hpp"
#include "nrbdoor/rng.hpp"
#include "nrbdoor/synthdata.hpp"
#include "nrbdoor/tinynet.hpp"

namespace nrbtest {

// Closed cube [lo, lo+side]^3 with 12 outward-wound triangles.
inline nrb::TriangleMesh cube_mesh(double lo = -0.5, double side = 1.0) {
  nrb::TriangleMesh m;
  for (int i = 0; i < 8; ++i)
    m.vertices.push_back({lo + side * (i & 1), lo + side * ((i >> 1) & 1), lo + side * ((i >> 2) & 1)});
  m.faces = {{0, 2, 1}, {1, 2, 3}, {4, 5, 6}, {5, 7, 6}, {0, 1, 4}, {1, 5, 4},
             {2, 6, 3}, {3, 6, 7}, {0, 4, 2}, {2, 4, 6}, {1, 3, 5}, {3, 7, 5}};
  return m;
}

inline nrb::PointCloud random_cloud(std::size_t n, std::uint64_t seed, double half = 0.5) {
  nrb::Rng rng(seed);
  nrb::PointCloud c;
  for (std::size_t i = 0; i < n; ++i)
    c.points.push_back({rng.uniform(-half, half), rng.uniform(-half, half), rng.uniform(-half, half)});
  return c;
}

inline nrb::Mat3 random_mat(std::uint64_t seed, double half = 2.0) {
  nrb::Rng rng(seed);
  nrb::Mat3 m;
  for (double& v : m.m) v = rng.uniform(-half, half);
  return m;
}

// Small dataset for fast training tests.
inline nrb::SynthConfig tiny_synth(std::uint64_t seed = 0) {
  nrb::SynthConfig c;
  c.num_classes = 3;
  c.samples_per_class_train = 6;
  c.samples_per_class_test = 3;
  c.points_per_cloud = 48;
  c.seed = seed;
  return c;
}

// ReLU signs and max-pool winners. Central differences are only meaningful
// when this pattern is the same at both ends of the perturbation.
inline std::vector<int> kink_pattern(const nrb::ClassifierParams& p, const nrb::PointCloud& cloud) {
  constexpr std::size_t h1 = 32, h2 = 64, h3 = 32;
  std::vector<int> sig;
  std::vector<double> pooled(h2, 0.0);
  std::vector<int> winner(h2, -1);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const nrb::Vec3& pt = cloud.points[i];
    std::vector<double> a1(h1);
    for (std::size_t j = 0; j < h1; ++j) {
      const double z = p.w1()[j * 3] * pt.x + p.w1()[j * 3 + 1] * pt.y + p.w1()[j * 3 + 2] * pt.z + p.b1()[j];
      sig.push_back(z > 0.0);
      a1[j] = std::max(z, 0.0);
    }
    for (std::size_t k = 0; k < h2; ++k) {
      double z = p.b2()[k];
      for (std::size_t j = 0; j < h1; ++j) z += p.w2()[k * h1 + j] * a1[j];
      sig.push_back(z > 0.0);
      if (z > 0.0 && (winner[k] < 0 || z > pooled[k])) {
        pooled[k] = z;
        winner[k] = static_cast<int>(i);
      }
    }
  }
  sig.insert(sig.end(), winner.begin(), winner.end());
  for (std::size_t m = 0; m < h3; ++m) {
    double z = p.b3()[m];
    for (std::size_t k = 0; k < h2; ++k) z += p.w3()[m * h2 + k] * pooled[k];
    sig.push_back(z > 0.0);
  }
  return sig;
}

}  // namespace nrbtest
