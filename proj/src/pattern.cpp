#include "nrbdoor/pattern.hpp"

#include <charconv>
#include <cmath>
#include <numeric>
#include <string>

#include "nrbdoor/error.hpp"
#include "nrbdoor/rng.hpp"

namespace nrb {

namespace {

constexpr double kGridTol = 1e-9;

int to_units(double v) {
  const double q = v / kUnitNoise;
  const double r = std::round(q);
  if (!std::isfinite(v) || std::abs(q - r) > kGridTol || r < 0.0)
    throw InvalidArgument("value " + format_exact(v) + " is not a non-negative multiple of 0.1");
  return static_cast<int>(r);
}

}  // namespace

NoiseMatrix::NoiseMatrix(const std::array<int, 9>& units) : units_(units) {
  for (std::size_t k = 0; k < 9; ++k) {
    if (units[k] < 0) throw InvalidArgument("noise units must be non-negative");
    n_.m[k] = units[k] * kUnitNoise;
  }
}

NoiseMatrix NoiseMatrix::from_matrix(const Mat3& m) {
  std::array<int, 9> units{};
  for (std::size_t k = 0; k < 9; ++k) units[k] = to_units(m.m[k]);
  return NoiseMatrix(units);
}

int NoiseMatrix::total_units() const { return std::accumulate(units_.begin(), units_.end(), 0); }

double NoiseMatrix::entry_sum() const {
  return std::accumulate(n_.m.begin(), n_.m.end(), 0.0);
}

NoisyRotation NoisyRotation::from_matrix(const Mat3& m) {
  NoiseMatrix::from_matrix(m - Mat3::identity());
  return NoisyRotation(m);
}

NoiseMatrix NoisyRotation::noise() const { return NoiseMatrix::from_matrix(r_ - Mat3::identity()); }

std::array<double, 9> PatternConfig::default_cell_weights() {
  constexpr double diag = 0.02;
  constexpr double off = (1.0 - 3 * diag) / 6.0;
  return {diag, off, off, off, diag, off, off, off, diag};
}

void validate(const PatternConfig& cfg) {
  quantize_gamma(cfg.gamma);
  if (cfg.num_candidates < 1) throw InvalidArgument("num_candidates must be at least 1");
  double total = 0.0;
  for (double w : cfg.cell_weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw InvalidArgument("cell weights must be non-negative");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) throw InvalidArgument("cell weights must sum to 1");
}

double noise_level(const Mat3& m) {
  const Mat3 d = m - Mat3::identity();
  double sum = 0.0;
  for (double v : d.m) sum += std::abs(v);
  return sum;
}

int quantize_gamma(double gamma) {
  if (!(gamma >= 0.0)) throw InvalidArgument("gamma must be non-negative");
  return to_units(gamma);
}

std::vector<NoiseMatrix> generate_candidates(const PatternConfig& cfg) {
  validate(cfg);
  const int n_units = quantize_gamma(cfg.gamma);
  std::array<double, 9> cumulative{};
  std::partial_sum(cfg.cell_weights.begin(), cfg.cell_weights.end(), cumulative.begin());

  std::vector<NoiseMatrix> out(cfg.num_candidates);
  for (std::size_t c = 0; c < cfg.num_candidates; ++c) {
    Rng rng(derive_seed(cfg.seed, {c}));
    std::array<int, 9> units{};
    for (int s = 0; s < n_units; ++s) {
      const double u = rng.uniform() * cumulative.back();
      std::size_t cell = 0;
      // Zero-weight cells are never chosen: strict '<' skips empty intervals.
      while (cell < 8 && !(u < cumulative[cell])) ++cell;
      ++units[cell];
    }
    out[c] = NoiseMatrix(units);
  }
  return out;
}

NoisyRotation compose(const NoiseMatrix& n) { return NoisyRotation(n.matrix() + Mat3::identity()); }

std::string emit_matrix(const Mat3& m, const std::string& header) {
  std::string out = "# " + header + "\n";
  for (int r = 0; r < 3; ++r)
    out += format_exact(m.at(r, 0)) + " " + format_exact(m.at(r, 1)) + " " +
           format_exact(m.at(r, 2)) + "\n";
  return out;
}

Mat3 parse_matrix(std::string_view text) {
  Mat3 m;
  std::size_t count = 0, line_no = 1, i = 0;
  while (i < text.size()) {
    const char c = text[i];
    if (c == '\n') {
      ++line_no;
      ++i;
    } else if (c == '#') {
      while (i < text.size() && text[i] != '\n') ++i;
    } else if (c == ' ' || c == '\t' || c == '\r') {
      ++i;
    } else {
      std::size_t j = i;
      while (j < text.size() && text[j] != ' ' && text[j] != '\t' && text[j] != '\n' &&
             text[j] != '\r')
        ++j;
      if (count == 9) throw ParseError(line_no, "more than 9 matrix entries");
      double v = 0.0;
      auto [p, ec] = std::from_chars(text.data() + i, text.data() + j, v);
      if (ec != std::errc() || p != text.data() + j || !std::isfinite(v))
        throw ParseError(line_no, "bad matrix entry '" + std::string(text.substr(i, j - i)) + "'");
      m.m[count++] = v;
      i = j;
    }
  }
  if (count != 9) throw ParseError(line_no, "expected 9 matrix entries, found " + std::to_string(count));
  return m;
}

}  // namespace nrb
