#pragma once

#include "trifield/geometry.hpp"

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace trifield {

enum class FaceTag { lateral, top, bottom };

struct BoundaryFacet {
  std::array<int, 3> vertices;
  FaceTag tag;
  int tet;  // owning tet
};

/// Tetrahedral mesh of an axis-aligned box with tagged boundary facets.
/// All tets are positively oriented; h is the largest edge length.
struct TetMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 4>> tets;
  std::vector<BoundaryFacet> boundary_facets;
  double h = 0.0;
  double edge_length = 0.0;  // box edge l; box is [-l/2, l/2]^3

  int n_vertices() const { return static_cast<int>(vertices.size()); }
  int n_tets() const { return static_cast<int>(tets.size()); }

  std::array<Vec3, 4> tet_vertices(int t) const {
    const auto& k = tets[t];
    return {vertices[k[0]], vertices[k[1]], vertices[k[2]], vertices[k[3]]};
  }

  double tet_volume(int t) const {
    const auto v = tet_vertices(t);
    return tet_signed_volume(v[0], v[1], v[2], v[3]);
  }

  double geometric_tolerance() const { return 1e-10 * edge_length; }
};

/// Gradients of the four P1 basis functions on tet t; constant vectors that
/// sum to zero.
inline std::array<Vec3, 4> tet_p1_gradients(const TetMesh& mesh, int t) {
  const auto v = mesh.tet_vertices(t);
  Eigen::Matrix3d m;
  m.col(0) = v[1] - v[0];
  m.col(1) = v[2] - v[0];
  m.col(2) = v[3] - v[0];
  const double det = m.determinant();
  if (std::abs(det) < 1e-300 ||
      std::abs(det) / 6.0 < 1e-14 * std::pow(mesh.h > 0 ? mesh.h : 1.0, 3))
    throw std::runtime_error("degenerate tet " + std::to_string(t));
  const Eigen::Matrix3d inv_t = m.inverse().transpose();
  std::array<Vec3, 4> g;
  g[1] = inv_t.col(0);
  g[2] = inv_t.col(1);
  g[3] = inv_t.col(2);
  g[0] = -(g[1] + g[2] + g[3]);
  return g;
}

/// Structured mesh of the box [-l/2, l/2]^3 with n subdivisions per axis,
/// each cell split into the six Kuhn tetrahedra around its main diagonal.
/// The split is conforming across cells and invariant under the point
/// reflection through the box centre.
inline TetMesh build_box_mesh(double l, int n) {
  if (l <= 0.0) throw std::invalid_argument("build_box_mesh: edge length must be positive");
  if (n < 1) throw std::invalid_argument("build_box_mesh: need at least one subdivision");

  TetMesh mesh;
  mesh.edge_length = l;
  const int np = n + 1;
  const double dx = l / n;

  mesh.vertices.reserve(static_cast<std::size_t>(np) * np * np);
  for (int k = 0; k < np; ++k)
    for (int j = 0; j < np; ++j)
      for (int i = 0; i < np; ++i)
        mesh.vertices.emplace_back(-l / 2 + i * dx, -l / 2 + j * dx,
                                   -l / 2 + k * dx);

  auto vid = [np](int i, int j, int k) { return i + np * (j + np * k); };

  // Kuhn subdivision: six tets per cell, one per coordinate ordering along
  // the main diagonal c000 -> c111.
  static const int paths[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2},
                                  {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
  mesh.tets.reserve(static_cast<std::size_t>(6) * n * n * n);
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        const std::array<int, 3> base = {i, j, k};
        for (const auto& perm : paths) {
          std::array<int, 4> tet;
          std::array<int, 3> cur = base;
          tet[0] = vid(cur[0], cur[1], cur[2]);
          for (int step = 0; step < 3; ++step) {
            cur[perm[step]] += 1;
            tet[step + 1] = vid(cur[0], cur[1], cur[2]);
          }
          const double vol =
              tet_signed_volume(mesh.vertices[tet[0]], mesh.vertices[tet[1]],
                                mesh.vertices[tet[2]], mesh.vertices[tet[3]]);
          if (vol < 0.0) std::swap(tet[2], tet[3]);
          mesh.tets.push_back(tet);
        }
      }

  // h = max edge length (the cell diagonal for this subdivision)
  double hmax = 0.0;
  for (const auto& t : mesh.tets)
    for (int a = 0; a < 4; ++a)
      for (int b = a + 1; b < 4; ++b)
        hmax = std::max(hmax,
                        (mesh.vertices[t[a]] - mesh.vertices[t[b]]).norm());
  mesh.h = hmax;

  // Boundary facets: faces appearing in exactly one tet, tagged by outward
  // normal direction.
  std::map<std::array<int, 3>, std::pair<int, int>> face_count;
  for (int t = 0; t < mesh.n_tets(); ++t) {
    static const int f[4][3] = {{1, 2, 3}, {0, 2, 3}, {0, 1, 3}, {0, 1, 2}};
    for (const auto& loc : f) {
      std::array<int, 3> key = {mesh.tets[t][loc[0]], mesh.tets[t][loc[1]],
                                mesh.tets[t][loc[2]]};
      std::sort(key.begin(), key.end());
      auto it = face_count.find(key);
      if (it == face_count.end())
        face_count[key] = {1, t};
      else
        it->second.first += 1;
    }
  }
  const double tol = 1e-12 * l;
  for (const auto& [key, cnt] : face_count) {
    if (cnt.first != 1) continue;
    const Vec3 &a = mesh.vertices[key[0]], &b = mesh.vertices[key[1]],
               &c = mesh.vertices[key[2]];
    FaceTag tag;
    if (std::abs(a.z() - l / 2) < tol && std::abs(b.z() - l / 2) < tol &&
        std::abs(c.z() - l / 2) < tol)
      tag = FaceTag::top;
    else if (std::abs(a.z() + l / 2) < tol && std::abs(b.z() + l / 2) < tol &&
             std::abs(c.z() + l / 2) < tol)
      tag = FaceTag::bottom;
    else
      tag = FaceTag::lateral;
    mesh.boundary_facets.push_back({key, tag, cnt.second});
  }
  return mesh;
}

/// 1D mesh induced on a segment by the tetrahedra it crosses: sorted
/// arclengths 0 = s_0 < ... < s_m = S and the tet containing each interval.
struct InducedPartition {
  double length = 0.0;
  std::vector<double> breakpoints;     // size m+1, first 0, last S
  std::vector<int> interval_tets;      // size m

  int n_intervals() const { return static_cast<int>(interval_tets.size()); }
};

namespace detail {
/// Lowest-index tet whose closed hull contains p (barycentric >= -tol_bary),
/// or -1. Ties between adjacent tets resolve to the lower index.
inline int find_containing_tet(const TetMesh& mesh, const Vec3& p,
                               double tol_bary) {
  for (int t = 0; t < mesh.n_tets(); ++t) {
    const Eigen::Vector4d bary = tet_barycentric(mesh.tet_vertices(t), p);
    if (bary.minCoeff() >= -tol_bary) return t;
  }
  return -1;
}

struct SegmentClip {
  double lo, hi;
  int tet;
};
}  // namespace detail

/// Breakpoints where the open segment (a,b) crosses tet boundaries. Each
/// interval is annotated with the lowest-index tet containing its midpoint;
/// zero-length clips (tangential touches) are discarded.
inline InducedPartition locate_segment_breakpoints(const TetMesh& mesh,
                                                   const Vec3& a,
                                                   const Vec3& b) {
  const double S = (b - a).norm();
  const double tol_geom = mesh.geometric_tolerance();
  if (S <= tol_geom)
    throw std::invalid_argument("locate_segment_breakpoints: zero-length segment");
  const double half = mesh.edge_length / 2;
  for (const Vec3* p : {&a, &b})
    if (p->cwiseAbs().maxCoeff() > half + tol_geom)
      throw std::invalid_argument("locate_segment_breakpoints: endpoint outside box");

  // Clip the segment against every tet: barycentric coordinates are affine
  // in the segment parameter, so each tet yields one parameter interval.
  // The clip slack covers roundoff only; tangential touches are discarded
  // at the geometric tolerance so they never create intervals.
  const double tol_t = tol_geom / S;
  const double tol_clip = 1e-13;
  std::vector<double> cuts = {0.0, 1.0};
  std::vector<detail::SegmentClip> clips;
  for (int t = 0; t < mesh.n_tets(); ++t) {
    const auto v = mesh.tet_vertices(t);
    const Eigen::Vector4d ba = tet_barycentric(v, a);
    const Eigen::Vector4d bb = tet_barycentric(v, b);
    double lo = 0.0, hi = 1.0;
    for (int i = 0; i < 4 && lo <= hi; ++i) {
      const double c0 = ba[i], slope = bb[i] - ba[i];
      // require c0 + t*slope >= -tol_clip
      if (std::abs(slope) < 1e-15) {
        if (c0 < -tol_clip) { lo = 1.0; hi = 0.0; }
      } else if (slope > 0) {
        lo = std::max(lo, (-tol_clip - c0) / slope);
      } else {
        hi = std::min(hi, (-tol_clip - c0) / slope);
      }
    }
    if (hi - lo > tol_t) {
      cuts.push_back(lo);
      cuts.push_back(hi);
      clips.push_back({lo, hi, t});
    }
  }
  std::sort(cuts.begin(), cuts.end());
  std::vector<double> uniq;
  for (double c : cuts) {
    c = std::clamp(c, 0.0, 1.0);
    if (uniq.empty() || c - uniq.back() > tol_t) uniq.push_back(c);
  }
  if (uniq.size() < 2)
    throw std::runtime_error("locate_segment_breakpoints: degenerate clip");
  uniq.front() = 0.0;
  uniq.back() = 1.0;

  InducedPartition part;
  part.length = S;
  for (double c : uniq) part.breakpoints.push_back(c * S);
  part.breakpoints.front() = 0.0;
  part.breakpoints.back() = S;
  // Interval containment ties break toward the lower tet index.
  for (std::size_t i = 0; i + 1 < uniq.size(); ++i) {
    const double mid = 0.5 * (uniq[i] + uniq[i + 1]);
    int best = -1;
    for (const auto& c : clips)
      if (c.lo - tol_t <= mid && mid <= c.hi + tol_t && (best < 0 || c.tet < best))
        best = c.tet;
    if (best < 0)
      throw std::runtime_error(
          "locate_segment_breakpoints: interval midpoint not inside any tet");
    part.interval_tets.push_back(best);
  }
  return part;
}

}  // namespace trifield
