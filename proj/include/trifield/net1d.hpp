#pragma once

#include "trifield/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <iostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace trifield {

struct EndpointBC {
  enum class Kind { neumann, dirichlet };
  Kind kind = Kind::neumann;
  double value = 0.0;

  static EndpointBC neumann() { return {Kind::neumann, 0.0}; }
  static EndpointBC dirichlet(double v) { return {Kind::dirichlet, v}; }
  bool is_dirichlet() const { return kind == Kind::dirichlet; }
};

/// Rectilinear centreline of a thin cylindrical inclusion with circular
/// cross-section of radius R: |Sigma| = pi R^2, |Gamma| = 2 pi R.
struct Segment {
  Vec3 a, b;
  double radius = 0.0;
  EndpointBC bc_a, bc_b;

  double length() const { return (b - a).norm(); }
  double section_area() const { return M_PI * radius * radius; }
  double section_perimeter() const { return 2.0 * M_PI * radius; }
  Vec3 point_at(double s) const { return a + (s / length()) * (b - a); }
};

/// Piece of an input segment between consecutive junctions (or endpoints).
struct SubSegment {
  Vec3 a, b;
  double radius = 0.0;
  int parent = -1;           // index into SegmentNetwork::segments
  double parent_s0 = 0.0;    // arclength range on the parent
  double parent_s1 = 0.0;
  EndpointBC bc_a, bc_b;     // meaningful only where junction_* < 0
  int junction_a = -1;
  int junction_b = -1;

  double length() const { return (b - a).norm(); }
  double section_area() const { return M_PI * radius * radius; }
  double section_perimeter() const { return 2.0 * M_PI * radius; }
  Vec3 point_at(double s) const { return a + (s / length()) * (b - a); }
};

struct Junction {
  Vec3 point;
  // (subsegment index, endpoint: 0 for a, 1 for b)
  std::vector<std::pair<int, int>> incidences;
};

struct SegmentNetwork {
  std::vector<Segment> segments;
  std::vector<SubSegment> subsegments;
  std::vector<Junction> junctions;

  int n_subsegments() const { return static_cast<int>(subsegments.size()); }
  double total_length() const {
    double s = 0.0;
    for (const auto& sub : subsegments) s += sub.length();
    return s;
  }
};

/// Split segments at their pairwise intersection points into non-crossing
/// subsegments and record the junctions. Intersections must be isolated
/// points: collinear overlaps are rejected. Segments closer than tol but not
/// touching are treated as disjoint.
inline SegmentNetwork split_at_intersections(std::vector<Segment> segments,
                                             double tol) {
  SegmentNetwork net;
  net.segments = std::move(segments);
  const int ns = static_cast<int>(net.segments.size());

  for (int i = 0; i < ns; ++i) {
    const auto& s = net.segments[i];
    if (s.length() <= tol)
      throw std::invalid_argument("segment " + std::to_string(i) +
                                  " has zero length");
    if (s.radius <= 0.0)
      throw std::invalid_argument("segment " + std::to_string(i) +
                                  " has non-positive radius");
    if (s.radius > s.length() / 10.0)
      std::cerr << "warning: segment " << i
                << " has radius > length/10; the 1D reduction assumes a thin "
                   "inclusion\n";
  }

  struct Cut {
    double s;
    int junction;
  };
  std::vector<std::vector<Cut>> cuts(ns);
  std::vector<Vec3> junction_points;

  auto junction_id = [&](const Vec3& p) {
    for (std::size_t j = 0; j < junction_points.size(); ++j)
      if ((junction_points[j] - p).norm() <= tol) return static_cast<int>(j);
    junction_points.push_back(p);
    return static_cast<int>(junction_points.size() - 1);
  };

  for (int i = 0; i < ns; ++i) {
    for (int j = i + 1; j < ns; ++j) {
      const auto& si = net.segments[i];
      const auto& sj = net.segments[j];
      const auto ca =
          segment_segment_closest(si.a, si.b, sj.a, sj.b);
      if (ca.distance > tol) continue;

      const Vec3 di = (si.b - si.a).normalized();
      const Vec3 dj = (sj.b - sj.a).normalized();
      if (di.cross(dj).norm() < 1e-9) {
        // parallel and touching: allowed only at a shared endpoint
        const bool endpoint_touch =
            (si.a - sj.a).norm() <= tol || (si.a - sj.b).norm() <= tol ||
            (si.b - sj.a).norm() <= tol || (si.b - sj.b).norm() <= tol;
        double overlap = 0.0;
        for (const Vec3* p : {&sj.a, &sj.b}) {
          const double t = (*p - si.a).dot(di);
          const Vec3 foot = si.a + std::clamp(t, 0.0, si.length()) * di;
          if ((foot - *p).norm() <= tol)
            overlap = std::max(overlap, std::min(t, si.length() - t));
        }
        if (!endpoint_touch || overlap > tol)
          throw std::invalid_argument("segments " + std::to_string(i) + " and " +
                                      std::to_string(j) +
                                      " overlap along a line");
      }

      const Vec3 pi = si.a + ca.s * (si.b - si.a);
      const Vec3 pj = sj.a + ca.t * (sj.b - sj.a);
      const Vec3 p = 0.5 * (pi + pj);
      const int jid = junction_id(p);
      cuts[i].push_back({ca.s * si.length(), jid});
      cuts[j].push_back({ca.t * sj.length(), jid});
    }
  }

  net.junctions.resize(junction_points.size());
  for (std::size_t j = 0; j < junction_points.size(); ++j)
    net.junctions[j].point = junction_points[j];

  for (int i = 0; i < ns; ++i) {
    const auto& seg = net.segments[i];
    const double S = seg.length();
    auto& c = cuts[i];
    std::sort(c.begin(), c.end(), [](const Cut& a, const Cut& b) { return a.s < b.s; });
    // breakpoint list with junction ids; interior endpoints only
    std::vector<Cut> pts;
    pts.push_back({0.0, -1});
    for (const auto& cut : c) {
      const double s = std::clamp(cut.s, 0.0, S);
      if (s <= tol) {
        pts.front().junction = cut.junction;
      } else if (s >= S - tol) {
        // handled below with the closing point
      } else if (std::abs(s - pts.back().s) <= tol && pts.size() > 1) {
        // duplicate interior cut
      } else {
        pts.push_back({s, cut.junction});
      }
    }
    pts.push_back({S, -1});
    for (const auto& cut : c)
      if (std::clamp(cut.s, 0.0, S) >= S - tol) pts.back().junction = cut.junction;

    for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
      SubSegment sub;
      sub.parent = i;
      sub.parent_s0 = pts[k].s;
      sub.parent_s1 = pts[k + 1].s;
      sub.a = seg.point_at(pts[k].s);
      sub.b = seg.point_at(pts[k + 1].s);
      sub.radius = seg.radius;
      sub.junction_a = pts[k].junction;
      sub.junction_b = pts[k + 1].junction;
      sub.bc_a = (k == 0) ? seg.bc_a : EndpointBC::neumann();
      sub.bc_b = (k + 2 == pts.size()) ? seg.bc_b : EndpointBC::neumann();
      const int id = static_cast<int>(net.subsegments.size());
      if (sub.junction_a >= 0)
        net.junctions[sub.junction_a].incidences.push_back({id, 0});
      if (sub.junction_b >= 0)
        net.junctions[sub.junction_b].incidences.push_back({id, 1});
      net.subsegments.push_back(sub);
    }
  }

  // prune junctions touched by fewer than two subsegment endpoints
  std::vector<Junction> kept;
  std::vector<int> remap(net.junctions.size(), -1);
  for (std::size_t j = 0; j < net.junctions.size(); ++j) {
    if (net.junctions[j].incidences.size() >= 2) {
      remap[j] = static_cast<int>(kept.size());
      kept.push_back(net.junctions[j]);
    }
  }
  for (auto& sub : net.subsegments) {
    if (sub.junction_a >= 0) sub.junction_a = remap[sub.junction_a];
    if (sub.junction_b >= 0) sub.junction_b = remap[sub.junction_b];
  }
  net.junctions = std::move(kept);
  return net;
}

enum class BasisKind { p1_linear, p0_constant };

/// Equispaced 1D mesh on one subsegment; element count is the ratio delta
/// times the induced element count, rounded, at least one.
struct Partition1D {
  int subsegment = -1;
  std::vector<double> nodes;  // sorted, first 0, last S
  BasisKind kind = BasisKind::p1_linear;
  double delta = 1.0;

  int n_elements() const { return static_cast<int>(nodes.size()) - 1; }
  int n_dofs() const {
    return kind == BasisKind::p1_linear ? static_cast<int>(nodes.size())
                                        : n_elements();
  }
  double length() const { return nodes.back(); }
};

inline Partition1D make_partition(double length, int induced_elements,
                                  double delta, BasisKind kind,
                                  int subsegment = -1) {
  if (delta <= 0.0) throw std::invalid_argument("make_partition: delta must be positive");
  if (induced_elements < 1)
    throw std::invalid_argument("make_partition: empty induced partition");
  const long m = std::max(1l, std::lround(delta * induced_elements));
  Partition1D part;
  part.subsegment = subsegment;
  part.kind = kind;
  part.delta = delta;
  part.nodes.resize(m + 1);
  for (long i = 0; i <= m; ++i)
    part.nodes[i] = length * static_cast<double>(i) / static_cast<double>(m);
  return part;
}

/// Nonzero basis values at arclength s: at most two P1 hats summing to one,
/// or a single P0 indicator.
inline std::vector<std::pair<int, double>> eval_basis_1d(const Partition1D& part,
                                                         double s) {
  const double S = part.length();
  const double tol = 1e-12 * std::max(1.0, S);
  if (s < -tol || s > S + tol)
    throw std::out_of_range("eval_basis_1d: arclength outside [0, S]");
  s = std::clamp(s, 0.0, S);
  const auto it = std::upper_bound(part.nodes.begin(), part.nodes.end(), s);
  int e = static_cast<int>(it - part.nodes.begin()) - 1;
  e = std::clamp(e, 0, part.n_elements() - 1);
  if (part.kind == BasisKind::p0_constant) return {{e, 1.0}};
  const double h = part.nodes[e + 1] - part.nodes[e];
  const double xi = (s - part.nodes[e]) / h;
  if (xi <= 0.0) return {{e, 1.0}};
  if (xi >= 1.0) return {{e + 1, 1.0}};
  return {{e, 1.0 - xi}, {e + 1, xi}};
}

/// Derivative values of the P1 basis at arclength s (element-wise constant).
inline std::vector<std::pair<int, double>> eval_basis_1d_deriv(
    const Partition1D& part, double s) {
  if (part.kind != BasisKind::p1_linear)
    throw std::logic_error("eval_basis_1d_deriv: derivative of P0 basis");
  const double S = part.length();
  s = std::clamp(s, 0.0, S);
  const auto it = std::upper_bound(part.nodes.begin(), part.nodes.end(), s);
  int e = static_cast<int>(it - part.nodes.begin()) - 1;
  e = std::clamp(e, 0, part.n_elements() - 1);
  const double h = part.nodes[e + 1] - part.nodes[e];
  return {{e, -1.0 / h}, {e + 1, 1.0 / h}};
}

}  // namespace trifield
