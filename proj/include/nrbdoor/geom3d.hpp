#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace nrb {

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;

  friend bool operator==(const Vec3&, const Vec3&) = default;

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }

  double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  Vec3 cross(const Vec3& o) const {
    return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
  }
  double norm() const;
  bool finite() const;
};

/// 3x3 matrix, row-major: at(r, c) == m[3*r + c].
struct Mat3 {
  std::array<double, 9> m{};

  static Mat3 identity() { return Mat3{{1, 0, 0, 0, 1, 0, 0, 0, 1}}; }
  static Mat3 zero() { return Mat3{}; }

  double& at(int r, int c) { return m[static_cast<std::size_t>(3 * r + c)]; }
  double at(int r, int c) const { return m[static_cast<std::size_t>(3 * r + c)]; }

  friend bool operator==(const Mat3&, const Mat3&) = default;

  Mat3 operator*(const Mat3& o) const;
  Mat3 operator+(const Mat3& o) const;
  Mat3 operator-(const Mat3& o) const;
  Vec3 operator*(const Vec3& v) const {
    return {m[0] * v.x + m[1] * v.y + m[2] * v.z,
            m[3] * v.x + m[4] * v.y + m[5] * v.z,
            m[6] * v.x + m[7] * v.y + m[8] * v.z};
  }
  Mat3 transposed() const;
  double determinant() const;
  bool finite() const;
};

/// A Mat3 known to satisfy is_rotation at 1e-6. Construct through
/// euler_rotation or RotationMatrix::from, which checks.
class RotationMatrix {
 public:
  static RotationMatrix from(const Mat3& m);
  const Mat3& matrix() const { return m_; }
  operator const Mat3&() const { return m_; }

 private:
  explicit RotationMatrix(const Mat3& m) : m_(m) {}
  Mat3 m_;
};

struct PointCloud {
  std::vector<Vec3> points;

  std::size_t size() const { return points.size(); }
  friend bool operator==(const PointCloud&, const PointCloud&) = default;
};

using Face = std::array<std::uint32_t, 3>;

struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<Face> faces;

  friend bool operator==(const TriangleMesh&, const TriangleMesh&) = default;
};

/// Throws InvalidArgument on non-finite points or an empty cloud.
void validate(const PointCloud& cloud);
/// Throws InvalidArgument on bad indices, repeated indices in a face or
/// non-finite vertices.
void validate(const TriangleMesh& mesh);

/// R = Rx(theta_x) * Ry(theta_y) * Rz(theta_z).
RotationMatrix euler_rotation(double theta_x, double theta_y, double theta_z);

bool is_rotation(const Mat3& m, double tol);

PointCloud apply_linear(const PointCloud& cloud, const Mat3& m);
TriangleMesh apply_linear(const TriangleMesh& mesh, const Mat3& m);

/// Centers the bounding box at the origin and scales uniformly so the
/// longest edge is 1.
PointCloud normalize_unit_cube(const PointCloud& cloud);
TriangleMesh normalize_unit_cube(const TriangleMesh& mesh);

/// Max over index pairs of | |a_i - a_j| - |b_i - b_j| |. Exhaustive up to
/// kExhaustivePairLimit points, otherwise kSampledPairs seeded pairs.
inline constexpr std::size_t kExhaustivePairLimit = 256;
inline constexpr std::size_t kSampledPairs = 10'000;
double pairwise_distance_distortion(const PointCloud& a, const PointCloud& b,
                                    std::uint64_t seed = 0);

bool is_combinatorially_manifold(const TriangleMesh& mesh);
bool is_watertight(const TriangleMesh& mesh);

/// Area-weighted, uniform-barycentric surface samples.
PointCloud sample_surface_points(const TriangleMesh& mesh, std::size_t n, std::uint64_t seed);

double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c);

TriangleMesh parse_off(std::string_view text);
std::string emit_off(const TriangleMesh& mesh);

PointCloud parse_xyz(std::string_view text);
std::string emit_xyz(const PointCloud& cloud);

/// Formats a real with 17 significant digits (exact round trip).
std::string format_exact(double v);

}  // namespace nrb
