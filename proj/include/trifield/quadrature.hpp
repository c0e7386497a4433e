#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

namespace trifield {

// ---------------------------------------------------------------------------
// 1D quadrature on merged partitions
// ---------------------------------------------------------------------------

/// Two-point Gauss nodes on [0,1]; exact for cubics on each subinterval.
inline constexpr std::array<double, 2> kGauss2Nodes = {
    0.5 - 0.28867513459481288225, 0.5 + 0.28867513459481288225};
inline constexpr std::array<double, 2> kGauss2Weights = {0.5, 0.5};

/// Union of several breakpoint sets covering the same interval, sorted with
/// near-duplicates (within tol) collapsed.
inline std::vector<double> merge_breakpoints(
    const std::vector<std::vector<double>>& sets, double tol = 1e-12) {
  std::vector<double> all;
  for (const auto& s : sets) all.insert(all.end(), s.begin(), s.end());
  if (all.empty()) throw std::invalid_argument("merge_breakpoints: no breakpoints");
  std::sort(all.begin(), all.end());
  std::vector<double> merged;
  merged.push_back(all.front());
  for (double v : all)
    if (v - merged.back() > tol) merged.push_back(v);
  return merged;
}

/// Integrate f over the interval covered by the union of the breakpoint sets,
/// with 2-point Gauss on every merged subinterval. Exact for piecewise
/// polynomials of degree <= 3 relative to the merged partition.
inline double merged_quadrature(const std::vector<std::vector<double>>& sets,
                                const std::function<double(double)>& f,
                                double tol = 1e-12) {
  const std::vector<double> bp = merge_breakpoints(sets, tol);
  double sum = 0.0;
  for (std::size_t i = 0; i + 1 < bp.size(); ++i) {
    const double a = bp[i], len = bp[i + 1] - bp[i];
    for (int g = 0; g < 2; ++g)
      sum += len * kGauss2Weights[g] * f(a + len * kGauss2Nodes[g]);
  }
  return sum;
}

// ---------------------------------------------------------------------------
// Tetrahedron quadrature (barycentric points, weights summing to 1)
// ---------------------------------------------------------------------------

struct TetQuadPoint {
  std::array<double, 4> bary;
  double weight;
};

/// Degree-2 four-point rule.
inline const std::vector<TetQuadPoint>& tet_rule_order2() {
  static const std::vector<TetQuadPoint> rule = [] {
    const double a = 0.58541019662496845446;  // (5 + 3*sqrt(5)) / 20
    const double b = 0.13819660112501051518;  // (5 - sqrt(5)) / 20
    std::vector<TetQuadPoint> r;
    for (int i = 0; i < 4; ++i) {
      std::array<double, 4> p = {b, b, b, b};
      p[i] = a;
      r.push_back({p, 0.25});
    }
    return r;
  }();
  return rule;
}

namespace detail {
inline void push_perm4(std::vector<TetQuadPoint>& r, double a, double b,
                       double w) {
  // all distinct placements of one 'a' among three 'b'
  for (int i = 0; i < 4; ++i) {
    std::array<double, 4> p = {b, b, b, b};
    p[i] = a;
    r.push_back({p, w});
  }
}
inline void push_perm22(std::vector<TetQuadPoint>& r, double a, double b,
                        double w) {
  // the six (a,a,b,b) placements
  static const int idx[6][2] = {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}};
  for (const auto& ij : idx) {
    std::array<double, 4> p = {b, b, b, b};
    p[ij[0]] = a;
    p[ij[1]] = a;
    r.push_back({p, w});
  }
}
}  // namespace detail

/// Keast degree-4 eleven-point rule (one negative weight at the centroid).
inline const std::vector<TetQuadPoint>& tet_rule_order4() {
  static const std::vector<TetQuadPoint> rule = [] {
    std::vector<TetQuadPoint> r;
    r.push_back({{0.25, 0.25, 0.25, 0.25}, -0.078933333333333333});
    detail::push_perm4(r, 11.0 / 14.0, 1.0 / 14.0, 0.045733333333333333);
    detail::push_perm22(r, 0.39940357616679920, 0.10059642383320080,
                        0.14933333333333333);
    return r;
  }();
  return rule;
}

/// Keast degree-5 fifteen-point rule.
inline const std::vector<TetQuadPoint>& tet_rule_order5() {
  static const std::vector<TetQuadPoint> rule = [] {
    std::vector<TetQuadPoint> r;
    r.push_back({{0.25, 0.25, 0.25, 0.25}, 0.18170206858253505});
    detail::push_perm4(r, 0.0, 1.0 / 3.0, 0.036160714285714285);
    detail::push_perm4(r, 8.0 / 11.0, 1.0 / 11.0, 0.069871494516173845);
    detail::push_perm22(r, 0.066550153573664281, 0.43344984642633570,
                        0.065694849368318756);
    return r;
  }();
  return rule;
}

}  // namespace trifield
