#pragma once

#include <array>
#include <span>

namespace mvl::geo {

using Vec3 = std::array<double, 3>;
using Mat3 = std::array<std::array<double, 3>, 3>;

/// Unit quaternion, scalar part `w`, vector part `v`.
struct Quaternion {
  double w = 1.0;
  Vec3 v{0.0, 0.0, 0.0};

  static Quaternion identity() { return {}; }
  Quaternion operator-() const { return {-w, {-v[0], -v[1], -v[2]}}; }
  friend bool operator==(const Quaternion&, const Quaternion&) = default;
};

/// Camera pose, camera-to-world: `p` is the camera centre in world
/// coordinates and `q` rotates camera-frame vectors into the world frame.
struct Pose {
  Vec3 p{0.0, 0.0, 0.0};
  Quaternion q;
};

/// Axis times half-angle, the image of quat_log.
using LogQuaternion = Vec3;

struct NormalizeResult {
  Quaternion q;
  bool degenerate = false;
};

inline constexpr double kDegenerateNorm = 1e-12;
inline constexpr double kSmallAngle = 1e-8;
inline constexpr double kUnitTolerance = 1e-6;

double norm(const Vec3& a);

/// Scales a raw (w, x, y, z) 4-vector to unit length. Inputs with norm below
/// 1e-12 return the identity with `degenerate` set.
NormalizeResult normalize(double w, double x, double y, double z);
NormalizeResult normalize(const Quaternion& raw);

/// Resolves the q / -q double cover: w > 0, or for w == 0 the first nonzero
/// vector component positive. Idempotent.
Quaternion canonicalize_hemisphere(const Quaternion& q);

/// Logarithm of a unit, hemisphere-canonical quaternion:
/// (v / |v|) * atan2(|v|, w), or v itself when |v| <= 1e-8.
/// Throws std::invalid_argument for non-unit input.
LogQuaternion quat_log(const Quaternion& q);

/// (cos |u|, (u / |u|) sin |u|); identity for u = 0.
Quaternion quat_exp(const LogQuaternion& u);

Quaternion multiply(const Quaternion& a, const Quaternion& b);
Quaternion conjugate(const Quaternion& q);
Vec3 rotate(const Quaternion& q, const Vec3& x);

Mat3 quat_to_matrix(const Quaternion& q);

/// Shepperd's method. Requires R orthonormal within 1e-6 and det(R) > 0;
/// throws std::invalid_argument otherwise. Output is hemisphere-canonical.
Quaternion rotation_matrix_to_quat(const Mat3& r);

/// Geodesic angle between two orientations in degrees,
/// 2 atan2(|v|, |w|) of conj(q1) * q2, equal to 2 acos(|<q1, q2>|) for unit
/// inputs; sign-invariant in both arguments.
double rotation_error_deg(const Quaternion& q1, const Quaternion& q2);

double position_error_m(const Vec3& p1, const Vec3& p2);

/// Middle element of the sorted values; mean of the middle pair for even
/// counts. Throws std::invalid_argument for an empty input.
double median(std::span<const double> values);

}  // namespace mvl::geo
