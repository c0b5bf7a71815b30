#include "mvlloc/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace mvl::geo {

double norm(const Vec3& a) { return std::sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2]); }

NormalizeResult normalize(double w, double x, double y, double z) {
  const double n = std::sqrt(w * w + x * x + y * y + z * z);
  if (!(n >= kDegenerateNorm)) return {Quaternion::identity(), true};
  return {{w / n, {x / n, y / n, z / n}}, false};
}

NormalizeResult normalize(const Quaternion& raw) { return normalize(raw.w, raw.v[0], raw.v[1], raw.v[2]); }

Quaternion canonicalize_hemisphere(const Quaternion& q) {
  if (q.w > 0.0) return q;
  if (q.w < 0.0) return -q;
  for (double c : q.v) {
    if (c > 0.0) return q;
    if (c < 0.0) return -q;
  }
  return q;
}

LogQuaternion quat_log(const Quaternion& q) {
  const double n = std::sqrt(q.w * q.w + q.v[0] * q.v[0] + q.v[1] * q.v[1] + q.v[2] * q.v[2]);
  if (std::abs(n - 1.0) > kUnitTolerance) {
    throw std::invalid_argument("quat_log: quaternion norm " + std::to_string(n) + " is not unit");
  }
  const double s = norm(q.v);
  if (s <= kSmallAngle) return q.v;
  const double k = std::atan2(s, q.w) / s;
  return {q.v[0] * k, q.v[1] * k, q.v[2] * k};
}

Quaternion quat_exp(const LogQuaternion& u) {
  const double a = norm(u);
  if (a == 0.0) return Quaternion::identity();
  const double k = std::sin(a) / a;
  return {std::cos(a), {u[0] * k, u[1] * k, u[2] * k}};
}

Quaternion multiply(const Quaternion& a, const Quaternion& b) {
  const auto& [x1, y1, z1] = a.v;
  const auto& [x2, y2, z2] = b.v;
  return {a.w * b.w - x1 * x2 - y1 * y2 - z1 * z2,
          {a.w * x2 + x1 * b.w + y1 * z2 - z1 * y2, a.w * y2 - x1 * z2 + y1 * b.w + z1 * x2,
           a.w * z2 + x1 * y2 - y1 * x2 + z1 * b.w}};
}

Quaternion conjugate(const Quaternion& q) { return {q.w, {-q.v[0], -q.v[1], -q.v[2]}}; }

Vec3 rotate(const Quaternion& q, const Vec3& x) {
  const Mat3 r = quat_to_matrix(q);
  return {r[0][0] * x[0] + r[0][1] * x[1] + r[0][2] * x[2], r[1][0] * x[0] + r[1][1] * x[1] + r[1][2] * x[2],
          r[2][0] * x[0] + r[2][1] * x[1] + r[2][2] * x[2]};
}

Mat3 quat_to_matrix(const Quaternion& q) {
  const double w = q.w;
  const auto& [x, y, z] = q.v;
  return {{{1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)},
           {2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)},
           {2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)}}};
}

Quaternion rotation_matrix_to_quat(const Mat3& r) {
  double worst = 0.0;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      double dot = 0.0;
      for (int k = 0; k < 3; ++k) dot += r[k][i] * r[k][j];
      worst = std::max(worst, std::abs(dot - (i == j ? 1.0 : 0.0)));
    }
  }
  if (worst > kUnitTolerance) {
    throw std::invalid_argument("rotation matrix is not orthonormal (max |R^T R - I| = " + std::to_string(worst) +
                                ")");
  }
  const double det = r[0][0] * (r[1][1] * r[2][2] - r[1][2] * r[2][1]) -
                     r[0][1] * (r[1][0] * r[2][2] - r[1][2] * r[2][0]) +
                     r[0][2] * (r[1][0] * r[2][1] - r[1][1] * r[2][0]);
  if (det < 0.0) throw std::invalid_argument("rotation matrix is a reflection (det < 0)");

  // Shepperd: pivot on the largest of 4w^2, 4x^2, 4y^2, 4z^2.
  const double trace = r[0][0] + r[1][1] + r[2][2];
  const std::array<double, 4> diag{trace, r[0][0], r[1][1], r[2][2]};
  const auto pivot = static_cast<int>(std::max_element(diag.begin(), diag.end()) - diag.begin());
  Quaternion q;
  switch (pivot) {
    case 0: {
      const double s = 2.0 * std::sqrt(1.0 + trace);
      q = {0.25 * s, {(r[2][1] - r[1][2]) / s, (r[0][2] - r[2][0]) / s, (r[1][0] - r[0][1]) / s}};
      break;
    }
    case 1: {
      const double s = 2.0 * std::sqrt(1.0 + r[0][0] - r[1][1] - r[2][2]);
      q = {(r[2][1] - r[1][2]) / s, {0.25 * s, (r[0][1] + r[1][0]) / s, (r[0][2] + r[2][0]) / s}};
      break;
    }
    case 2: {
      const double s = 2.0 * std::sqrt(1.0 - r[0][0] + r[1][1] - r[2][2]);
      q = {(r[0][2] - r[2][0]) / s, {(r[0][1] + r[1][0]) / s, 0.25 * s, (r[1][2] + r[2][1]) / s}};
      break;
    }
    default: {
      const double s = 2.0 * std::sqrt(1.0 - r[0][0] - r[1][1] + r[2][2]);
      q = {(r[1][0] - r[0][1]) / s, {(r[0][2] + r[2][0]) / s, (r[1][2] + r[2][1]) / s, 0.25 * s}};
      break;
    }
  }
  return canonicalize_hemisphere(normalize(q).q);
}

double rotation_error_deg(const Quaternion& q1, const Quaternion& q2) {
  // Relative rotation conj(q1) * q2 with vector part (w1 v2 - w2 v1) - v1 x v2,
  // grouped so both terms vanish exactly for q2 = +-q1. atan2 keeps full
  // precision where acos(dot) degrades near dot = 1.
  const auto& [x1, y1, z1] = q1.v;
  const auto& [x2, y2, z2] = q2.v;
  const double w = q1.w * q2.w + (x1 * x2 + y1 * y2 + z1 * z2);
  const Vec3 v{(q1.w * x2 - q2.w * x1) - (y1 * z2 - z1 * y2), (q1.w * y2 - q2.w * y1) - (z1 * x2 - x1 * z2),
               (q1.w * z2 - q2.w * z1) - (x1 * y2 - y1 * x2)};
  return 2.0 * std::atan2(norm(v), std::abs(w)) * 180.0 / std::numbers::pi;
}

double position_error_m(const Vec3& p1, const Vec3& p2) {
  return norm({p1[0] - p2[0], p1[1] - p2[1], p1[2] - p2[2]});
}

double median(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("median of an empty list");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  if (n % 2 == 1) return sorted[n / 2];
  return 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
}

}  // namespace mvl::geo
