#include "nrbdoor/geom3d.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>
#include <utility>

#include "nrbdoor/error.hpp"
#include "nrbdoor/rng.hpp"

namespace nrb {

double Vec3::norm() const { return std::sqrt(x * x + y * y + z * z); }

bool Vec3::finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }

Mat3 Mat3::operator*(const Mat3& o) const {
  Mat3 r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      r.at(i, j) = at(i, 0) * o.at(0, j) + at(i, 1) * o.at(1, j) + at(i, 2) * o.at(2, j);
  return r;
}

Mat3 Mat3::operator+(const Mat3& o) const {
  Mat3 r;
  for (std::size_t k = 0; k < 9; ++k) r.m[k] = m[k] + o.m[k];
  return r;
}

Mat3 Mat3::operator-(const Mat3& o) const {
  Mat3 r;
  for (std::size_t k = 0; k < 9; ++k) r.m[k] = m[k] - o.m[k];
  return r;
}

Mat3 Mat3::transposed() const {
  Mat3 r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) r.at(i, j) = at(j, i);
  return r;
}

double Mat3::determinant() const {
  return at(0, 0) * (at(1, 1) * at(2, 2) - at(1, 2) * at(2, 1)) -
         at(0, 1) * (at(1, 0) * at(2, 2) - at(1, 2) * at(2, 0)) +
         at(0, 2) * (at(1, 0) * at(2, 1) - at(1, 1) * at(2, 0));
}

bool Mat3::finite() const {
  return std::all_of(m.begin(), m.end(), [](double v) { return std::isfinite(v); });
}

RotationMatrix RotationMatrix::from(const Mat3& m) {
  if (!is_rotation(m, 1e-6)) throw InvalidArgument("matrix is not a rotation");
  return RotationMatrix(m);
}

void validate(const PointCloud& cloud) {
  if (cloud.points.empty()) throw InvalidArgument("point cloud is empty");
  for (const auto& p : cloud.points)
    if (!p.finite()) throw InvalidArgument("point cloud has a non-finite coordinate");
}

void validate(const TriangleMesh& mesh) {
  const auto n = mesh.vertices.size();
  for (const auto& v : mesh.vertices)
    if (!v.finite()) throw InvalidArgument("mesh has a non-finite vertex");
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    const auto& face = mesh.faces[f];
    for (auto idx : face)
      if (idx >= n)
        throw InvalidArgument("face " + std::to_string(f) + " index " + std::to_string(idx) +
                              " out of range");
    if (face[0] == face[1] || face[1] == face[2] || face[0] == face[2])
      throw InvalidArgument("face " + std::to_string(f) + " repeats a vertex");
  }
}

RotationMatrix euler_rotation(double theta_x, double theta_y, double theta_z) {
  if (!std::isfinite(theta_x) || !std::isfinite(theta_y) || !std::isfinite(theta_z))
    throw InvalidArgument("euler_rotation: non-finite angle");
  const double cx = std::cos(theta_x), sx = std::sin(theta_x);
  const double cy = std::cos(theta_y), sy = std::sin(theta_y);
  const double cz = std::cos(theta_z), sz = std::sin(theta_z);
  const Mat3 rx{{1, 0, 0, 0, cx, -sx, 0, sx, cx}};
  const Mat3 ry{{cy, 0, sy, 0, 1, 0, -sy, 0, cy}};
  const Mat3 rz{{cz, -sz, 0, sz, cz, 0, 0, 0, 1}};
  return RotationMatrix::from(rx * ry * rz);
}

bool is_rotation(const Mat3& m, double tol) {
  if (!m.finite()) return false;
  const Mat3 g = m * m.transposed() - Mat3::identity();
  for (double v : g.m)
    if (std::abs(v) > tol) return false;
  return std::abs(m.determinant() - 1.0) <= tol;
}

namespace {

std::vector<Vec3> transform_all(const std::vector<Vec3>& pts, const Mat3& m) {
  std::vector<Vec3> out;
  out.reserve(pts.size());
  for (const auto& p : pts) out.push_back(m * p);
  return out;
}

struct Box {
  Vec3 lo, hi;
};

Box bounds(const std::vector<Vec3>& pts) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  Box b{{inf, inf, inf}, {-inf, -inf, -inf}};
  for (const auto& p : pts) {
    b.lo = {std::min(b.lo.x, p.x), std::min(b.lo.y, p.y), std::min(b.lo.z, p.z)};
    b.hi = {std::max(b.hi.x, p.x), std::max(b.hi.y, p.y), std::max(b.hi.z, p.z)};
  }
  return b;
}

std::vector<Vec3> normalize_points(const std::vector<Vec3>& pts) {
  if (pts.empty()) throw DegenerateGeometry("cannot normalize an empty shape");
  const Box b = bounds(pts);
  const double extent = std::max({b.hi.x - b.lo.x, b.hi.y - b.lo.y, b.hi.z - b.lo.z});
  if (!(extent > 0.0)) throw DegenerateGeometry("all points coincide; cannot normalize");
  const Vec3 center = (b.lo + b.hi) * 0.5;
  std::vector<Vec3> out;
  out.reserve(pts.size());
  for (const auto& p : pts) {
    const Vec3 d = p - center;
    out.push_back({d.x / extent, d.y / extent, d.z / extent});
  }
  return out;
}

std::pair<std::uint32_t, std::uint32_t> edge_key(std::uint32_t a, std::uint32_t b) {
  return a < b ? std::pair{a, b} : std::pair{b, a};
}

std::map<std::pair<std::uint32_t, std::uint32_t>, int> edge_face_counts(const TriangleMesh& mesh) {
  std::map<std::pair<std::uint32_t, std::uint32_t>, int> counts;
  for (const auto& f : mesh.faces) {
    ++counts[edge_key(f[0], f[1])];
    ++counts[edge_key(f[1], f[2])];
    ++counts[edge_key(f[2], f[0])];
  }
  return counts;
}

}  // namespace

PointCloud apply_linear(const PointCloud& cloud, const Mat3& m) {
  return PointCloud{transform_all(cloud.points, m)};
}

TriangleMesh apply_linear(const TriangleMesh& mesh, const Mat3& m) {
  return TriangleMesh{transform_all(mesh.vertices, m), mesh.faces};
}

PointCloud normalize_unit_cube(const PointCloud& cloud) {
  return PointCloud{normalize_points(cloud.points)};
}

TriangleMesh normalize_unit_cube(const TriangleMesh& mesh) {
  return TriangleMesh{normalize_points(mesh.vertices), mesh.faces};
}

double pairwise_distance_distortion(const PointCloud& a, const PointCloud& b, std::uint64_t seed) {
  if (a.size() != b.size())
    throw InvalidArgument("pairwise_distance_distortion: clouds differ in size");
  const std::size_t n = a.size();
  auto gap = [&](std::size_t i, std::size_t j) {
    return std::abs((a.points[i] - a.points[j]).norm() - (b.points[i] - b.points[j]).norm());
  };
  double worst = 0.0;
  if (n <= kExhaustivePairLimit) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) worst = std::max(worst, gap(i, j));
    return worst;
  }
  Rng rng(seed);
  for (std::size_t k = 0; k < kSampledPairs; ++k) {
    const auto i = static_cast<std::size_t>(rng.below(n));
    const auto j = static_cast<std::size_t>(rng.below(n));
    worst = std::max(worst, gap(i, j));
  }
  return worst;
}

bool is_watertight(const TriangleMesh& mesh) {
  if (mesh.faces.empty()) return false;
  for (const auto& [edge, count] : edge_face_counts(mesh))
    if (count != 2) return false;
  return true;
}

bool is_combinatorially_manifold(const TriangleMesh& mesh) {
  for (const auto& [edge, count] : edge_face_counts(mesh))
    if (count > 2) return false;

  // Faces around each vertex must be connected through edges incident to
  // that vertex (a single fan or cycle).
  std::vector<std::vector<std::uint32_t>> incident(mesh.vertices.size());
  for (std::uint32_t f = 0; f < mesh.faces.size(); ++f)
    for (auto v : mesh.faces[f]) incident[v].push_back(f);

  for (std::uint32_t v = 0; v < incident.size(); ++v) {
    const auto& fs = incident[v];
    if (fs.size() <= 1) continue;
    // Union-find over the faces of this star.
    std::vector<std::size_t> parent(fs.size());
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    auto find = [&](std::size_t i) {
      while (parent[i] != i) i = parent[i] = parent[parent[i]];
      return i;
    };
    // Map each opposite vertex (edge v-w) to the first face that used it.
    std::map<std::uint32_t, std::size_t> first_use;
    for (std::size_t k = 0; k < fs.size(); ++k) {
      for (auto w : mesh.faces[fs[k]]) {
        if (w == v) continue;
        auto [it, inserted] = first_use.emplace(w, k);
        if (!inserted) parent[find(k)] = find(it->second);
      }
    }
    const std::size_t root = find(0);
    for (std::size_t k = 1; k < fs.size(); ++k)
      if (find(k) != root) return false;
  }
  return true;
}

double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c) {
  return 0.5 * (b - a).cross(c - a).norm();
}

PointCloud sample_surface_points(const TriangleMesh& mesh, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw InvalidArgument("sample_surface_points: n must be at least 1");
  validate(mesh);
  std::vector<double> cumulative;
  cumulative.reserve(mesh.faces.size());
  double total = 0.0;
  for (const auto& f : mesh.faces) {
    total += triangle_area(mesh.vertices[f[0]], mesh.vertices[f[1]], mesh.vertices[f[2]]);
    cumulative.push_back(total);
  }
  if (!(total > 0.0)) throw DegenerateGeometry("every face of the mesh has zero area");

  Rng rng(seed);
  PointCloud out;
  out.points.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double pick = rng.uniform() * total;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), pick);
    if (it == cumulative.end()) --it;
    const auto& f = mesh.faces[static_cast<std::size_t>(it - cumulative.begin())];
    const double r1 = std::sqrt(rng.uniform());
    const double r2 = rng.uniform();
    const Vec3& a = mesh.vertices[f[0]];
    const Vec3& b = mesh.vertices[f[1]];
    const Vec3& c = mesh.vertices[f[2]];
    out.points.push_back(a * (1.0 - r1) + b * (r1 * (1.0 - r2)) + c * (r1 * r2));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Text formats

namespace {

struct LineReader {
  std::string_view text;
  std::size_t pos = 0;
  std::size_t line_no = 0;

  bool next(std::string_view& line) {
    if (pos >= text.size()) return false;
    const auto end = text.find('\n', pos);
    const auto stop = end == std::string_view::npos ? text.size() : end;
    line = text.substr(pos, stop - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos = stop + 1;
    ++line_no;
    return true;
  }
};

std::vector<std::string_view> tokens(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

bool is_blank_or_comment(std::string_view line) {
  auto t = tokens(line);
  return t.empty() || t.front().front() == '#';
}

double to_real(std::string_view tok, std::size_t line_no) {
  double v = 0.0;
  const char* first = tok.data();
  if (!tok.empty() && tok.front() == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size() || !std::isfinite(v))
    throw ParseError(line_no, "expected a finite real, got '" + std::string(tok) + "'");
  return v;
}

std::uint64_t to_count(std::string_view tok, std::size_t line_no) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size())
    throw ParseError(line_no, "expected a non-negative integer, got '" + std::string(tok) + "'");
  return v;
}

// Next line that is neither blank nor a comment.
bool next_content(LineReader& r, std::string_view& line) {
  while (r.next(line))
    if (!is_blank_or_comment(line)) return true;
  return false;
}

}  // namespace

std::string format_exact(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

TriangleMesh parse_off(std::string_view text) {
  LineReader r{text};
  std::string_view line;
  if (!next_content(r, line) || tokens(line) != std::vector<std::string_view>{"OFF"})
    throw ParseError(r.line_no == 0 ? 1 : r.line_no, "missing 'OFF' header");

  if (!next_content(r, line)) throw ParseError(r.line_no + 1, "missing counts line");
  auto counts = tokens(line);
  if (counts.size() != 3) throw ParseError(r.line_no, "counts line must hold 3 integers");
  const auto nv = to_count(counts[0], r.line_no);
  const auto nf = to_count(counts[1], r.line_no);
  to_count(counts[2], r.line_no);

  TriangleMesh mesh;
  mesh.vertices.reserve(nv);
  for (std::uint64_t i = 0; i < nv; ++i) {
    if (!next_content(r, line))
      throw ParseError(r.line_no + 1, "expected " + std::to_string(nv) + " vertices, found " +
                                          std::to_string(i));
    auto t = tokens(line);
    if (t.size() != 3) throw ParseError(r.line_no, "vertex line must hold 3 reals");
    mesh.vertices.push_back(
        {to_real(t[0], r.line_no), to_real(t[1], r.line_no), to_real(t[2], r.line_no)});
  }
  mesh.faces.reserve(nf);
  for (std::uint64_t i = 0; i < nf; ++i) {
    if (!next_content(r, line))
      throw ParseError(r.line_no + 1,
                       "expected " + std::to_string(nf) + " faces, found " + std::to_string(i));
    auto t = tokens(line);
    if (t.size() != 4 || to_count(t[0], r.line_no) != 3)
      throw ParseError(r.line_no, "face line must be '3 i j k'");
    Face face{};
    for (int k = 0; k < 3; ++k) {
      const auto idx = to_count(t[static_cast<std::size_t>(k) + 1], r.line_no);
      if (idx >= nv)
        throw ParseError(r.line_no, "face index " + std::to_string(idx) + " out of range [0, " +
                                        std::to_string(nv) + ")");
      face[static_cast<std::size_t>(k)] = static_cast<std::uint32_t>(idx);
    }
    if (face[0] == face[1] || face[1] == face[2] || face[0] == face[2])
      throw ParseError(r.line_no, "face repeats a vertex index");
    mesh.faces.push_back(face);
  }
  if (next_content(r, line)) throw ParseError(r.line_no, "trailing data after last face");
  return mesh;
}

std::string emit_off(const TriangleMesh& mesh) {
  std::string out = "OFF\n";
  out += std::to_string(mesh.vertices.size()) + " " + std::to_string(mesh.faces.size()) + " 0\n";
  for (const auto& v : mesh.vertices)
    out += format_exact(v.x) + " " + format_exact(v.y) + " " + format_exact(v.z) + "\n";
  for (const auto& f : mesh.faces)
    out += "3 " + std::to_string(f[0]) + " " + std::to_string(f[1]) + " " + std::to_string(f[2]) +
           "\n";
  return out;
}

PointCloud parse_xyz(std::string_view text) {
  LineReader r{text};
  std::string_view line;
  PointCloud cloud;
  while (r.next(line)) {
    auto t = tokens(line);
    if (t.empty()) continue;
    if (t.size() != 3)
      throw ParseError(r.line_no, "expected 3 reals, found " + std::to_string(t.size()) + " fields");
    cloud.points.push_back(
        {to_real(t[0], r.line_no), to_real(t[1], r.line_no), to_real(t[2], r.line_no)});
  }
  if (cloud.points.empty()) throw ParseError(r.line_no, "no points");
  return cloud;
}

std::string emit_xyz(const PointCloud& cloud) {
  std::string out;
  char buf[96];
  for (const auto& p : cloud.points) {
    std::snprintf(buf, sizeof buf, "%.9g %.9g %.9g\n", p.x, p.y, p.z);
    out += buf;
  }
  return out;
}

}  // namespace nrb
