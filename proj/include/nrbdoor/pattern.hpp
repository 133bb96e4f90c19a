#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "nrbdoor/geom3d.hpp"

namespace nrb {

/// Quantum distributed over matrix cells when building candidate noises.
inline constexpr double kUnitNoise = 0.1;

/// Non-negative 3x3 noise whose entries are whole multiples of kUnitNoise.
class NoiseMatrix {
 public:
  NoiseMatrix() = default;
  /// Builds from per-cell unit counts (row-major).
  explicit NoiseMatrix(const std::array<int, 9>& units);
  /// Throws InvalidArgument if an entry is negative or off the 0.1 grid.
  static NoiseMatrix from_matrix(const Mat3& m);

  const Mat3& matrix() const { return n_; }
  const std::array<int, 9>& units() const { return units_; }
  int total_units() const;
  double entry_sum() const;

  friend bool operator==(const NoiseMatrix& a, const NoiseMatrix& b) { return a.units_ == b.units_; }

 private:
  std::array<int, 9> units_{};
  Mat3 n_{};
};

/// R_n = N + I.
class NoisyRotation {
 public:
  static NoisyRotation from_matrix(const Mat3& m);  // validates m - I
  const Mat3& matrix() const { return r_; }
  NoiseMatrix noise() const;
  operator const Mat3&() const { return r_; }

 private:
  explicit NoisyRotation(const Mat3& r) : r_(r) {}
  Mat3 r_;
  friend NoisyRotation compose(const NoiseMatrix& n);
};

struct PatternConfig {
  double gamma = 0.4;
  std::size_t num_candidates = 20;
  std::array<double, 9> cell_weights = default_cell_weights();
  std::uint64_t seed = 0;

  /// 0.02 on each diagonal cell, the remaining 0.94 split over the six
  /// off-diagonal cells.
  static std::array<double, 9> default_cell_weights();
};

void validate(const PatternConfig& cfg);

/// Sum of absolute deviations from the identity.
double noise_level(const Mat3& m);

/// gamma / 0.1, rejecting values off the 0.1 grid (tolerance 1e-9).
int quantize_gamma(double gamma);

/// M candidate noises, each built by dropping quantize_gamma(gamma) unit
/// noises into cells drawn from cell_weights. Candidate m uses the stream
/// derive_seed(seed, {m}).
std::vector<NoiseMatrix> generate_candidates(const PatternConfig& cfg);

NoisyRotation compose(const NoiseMatrix& n);

/// Row-major 9-number text with a leading '#' provenance line.
std::string emit_matrix(const Mat3& m, const std::string& header);
Mat3 parse_matrix(std::string_view text);

}  // namespace nrb
