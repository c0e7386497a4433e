#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <optional>
#include <stdexcept>

namespace trifield {

using Vec3 = Eigen::Vector3d;

/// Signed volume of the tetrahedron (a,b,c,d); positive for a
/// right-handed vertex ordering.
inline double tet_signed_volume(const Vec3& a, const Vec3& b, const Vec3& c,
                                const Vec3& d) {
  Eigen::Matrix3d m;
  m.col(0) = b - a;
  m.col(1) = c - a;
  m.col(2) = d - a;
  return m.determinant() / 6.0;
}

/// Barycentric coordinates of p with respect to the tetrahedron (v0..v3).
/// Valid for non-degenerate tets; coordinates sum to 1.
inline Eigen::Vector4d tet_barycentric(const std::array<Vec3, 4>& v,
                                       const Vec3& p) {
  Eigen::Matrix3d m;
  m.col(0) = v[1] - v[0];
  m.col(1) = v[2] - v[0];
  m.col(2) = v[3] - v[0];
  const Vec3 t = m.inverse() * (p - v[0]);
  return {1.0 - t[0] - t[1] - t[2], t[0], t[1], t[2]};
}

struct ClosestApproach {
  double s;         // parameter in [0,1] on segment (a0,a1)
  double t;         // parameter in [0,1] on segment (b0,b1)
  double distance;  // distance between the closest points
};

/// Closest points between two segments, clamped to the segment ranges.
/// Parallel (possibly overlapping) segments are handled by fixing one
/// endpoint; callers that must reject collinear overlaps test for them
/// separately.
inline ClosestApproach segment_segment_closest(const Vec3& a0, const Vec3& a1,
                                               const Vec3& b0,
                                               const Vec3& b1) {
  const Vec3 da = a1 - a0;
  const Vec3 db = b1 - b0;
  const Vec3 r = a0 - b0;
  const double A = da.squaredNorm();
  const double B = da.dot(db);
  const double C = db.squaredNorm();
  const double D = da.dot(r);
  const double E = db.dot(r);
  const double det = A * C - B * B;

  double s = 0.0;
  if (det > 1e-14 * A * C) s = std::clamp((B * E - C * D) / det, 0.0, 1.0);
  double t = (C > 0.0) ? std::clamp((B * s + E) / C, 0.0, 1.0) : 0.0;
  // re-clamp s against the clamped t
  s = (A > 0.0) ? std::clamp((B * t - D) / A, 0.0, 1.0) : 0.0;
  t = (C > 0.0) ? std::clamp((B * s + E) / C, 0.0, 1.0) : 0.0;

  const Vec3 pa = a0 + s * da;
  const Vec3 pb = b0 + t * db;
  return {s, t, (pa - pb).norm()};
}

}  // namespace trifield
