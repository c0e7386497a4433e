#pragma once

#include "trifield/assembly.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace trifield {

struct ExactSolution3D {
  std::function<double(const Vec3&)> value;
  std::function<Vec3(const Vec3&)> gradient;
};

struct ExactSolution1D {
  std::function<double(double)> value;
  std::function<double(double)> derivative;
};

/// Finite-difference consistency of a supplied gradient at random sample
/// points; returns the worst relative mismatch.
inline double check_gradient_consistency(const ExactSolution3D& exact,
                                         double box_half, int samples = 50,
                                         unsigned seed = 7u) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> coord(-0.9 * box_half, 0.9 * box_half);
  const double h = 1e-6 * box_half;
  double worst = 0.0;
  for (int i = 0; i < samples; ++i) {
    const Vec3 p(coord(rng), coord(rng), coord(rng));
    Vec3 fd;
    for (int k = 0; k < 3; ++k) {
      Vec3 dp = Vec3::Zero();
      dp[k] = h;
      fd[k] = (exact.value(p + dp) - exact.value(p - dp)) / (2 * h);
    }
    const Vec3 g = exact.gradient(p);
    worst = std::max(worst, (fd - g).norm() / std::max(1.0, g.norm()));
  }
  return worst;
}

struct ErrorPair {
  double l2 = 0.0;
  double h1 = 0.0;  // full H1 norm, L2 part included
};

/// Relative L2 and H1 errors of the P1 field U against the exact solution,
/// integrated with the degree-4 tet rule (degree-5 with order5 = true).
inline ErrorPair error_norms_3d(const TetMesh& mesh, const Vec& U,
                                const ExactSolution3D& exact,
                                bool order5 = false) {
  if (U.size() != mesh.n_vertices())
    throw std::invalid_argument("error_norms_3d: field size mismatch");
  const auto& rule = order5 ? tet_rule_order5() : tet_rule_order4();
  double e_l2 = 0.0, e_h1s = 0.0, n_l2 = 0.0, n_h1s = 0.0;
  for (int t = 0; t < mesh.n_tets(); ++t) {
    const auto v = mesh.tet_vertices(t);
    const double vol = mesh.tet_volume(t);
    const auto& dofs = mesh.tets[t];
    const auto grads = tet_p1_gradients(mesh, t);
    Vec3 grad_h = Vec3::Zero();
    for (int a = 0; a < 4; ++a) grad_h += U[dofs[a]] * grads[a];
    for (const auto& qp : rule) {
      const Vec3 p = qp.bary[0] * v[0] + qp.bary[1] * v[1] + qp.bary[2] * v[2] +
                     qp.bary[3] * v[3];
      double uh = 0.0;
      for (int a = 0; a < 4; ++a) uh += U[dofs[a]] * qp.bary[a];
      const double ue = exact.value(p);
      const Vec3 ge = exact.gradient(p);
      const double w = vol * qp.weight;
      e_l2 += w * (ue - uh) * (ue - uh);
      e_h1s += w * (ge - grad_h).squaredNorm();
      n_l2 += w * ue * ue;
      n_h1s += w * ge.squaredNorm();
    }
  }
  if (n_l2 <= 0.0)
    throw std::runtime_error("error_norms_3d: exact solution has zero norm");
  ErrorPair e;
  e.l2 = std::sqrt(e_l2 / n_l2);
  e.h1 = std::sqrt((e_l2 + e_h1s) / (n_l2 + n_h1s));
  return e;
}

/// Relative L2 and H1 errors of one subsegment's P1 field against an exact
/// 1D solution; each element is subdivided for non-polynomial exact data.
inline ErrorPair error_norms_1d(const Partition1D& part, const Vec& Uhat,
                                const ExactSolution1D& exact,
                                int subdivisions = 4) {
  if (Uhat.size() != part.n_dofs())
    throw std::invalid_argument("error_norms_1d: field size mismatch");
  double e_l2 = 0.0, e_h1s = 0.0, n_l2 = 0.0, n_h1s = 0.0;
  for (int e = 0; e < part.n_elements(); ++e) {
    const double h = part.nodes[e + 1] - part.nodes[e];
    const double du_h = (Uhat[e + 1] - Uhat[e]) / h;
    for (int k = 0; k < subdivisions; ++k) {
      const double a = part.nodes[e] + h * k / subdivisions;
      const double len = h / subdivisions;
      for (int g = 0; g < 2; ++g) {
        const double s = a + len * kGauss2Nodes[g];
        const double w = len * kGauss2Weights[g];
        const double xi = (s - part.nodes[e]) / h;
        const double uh = (1.0 - xi) * Uhat[e] + xi * Uhat[e + 1];
        const double ue = exact.value(s);
        const double de = exact.derivative(s);
        e_l2 += w * (ue - uh) * (ue - uh);
        e_h1s += w * (de - du_h) * (de - du_h);
        n_l2 += w * ue * ue;
        n_h1s += w * de * de;
      }
    }
  }
  if (n_l2 <= 0.0)
    throw std::runtime_error("error_norms_1d: exact solution has zero norm");
  ErrorPair err;
  err.l2 = std::sqrt(e_l2 / n_l2);
  err.h1 = std::sqrt((e_l2 + e_h1s) / (n_l2 + n_h1s));
  return err;
}

/// Nondimensional continuity mismatch
///   sqrt(sum_i ||U|_Lambda_i - Uhat_i||^2_L2) / (|max(U, Uhat)| sqrt(l_tot)),
/// with the maximum taken over all 3D and 1D nodal values.
inline double continuity_indicator(const Discretization& disc,
                                   const DofLayout& layout, const Vec& U,
                                   const Vec& Uhat) {
  double num2 = 0.0;
  for (int i = 0; i < disc.net.n_subsegments(); ++i) {
    const auto& sub = disc.net.subsegments[i];
    const auto& pu = disc.parts_u[i];
    std::vector<detail::AffineTrace> traces;
    for (int tet : disc.induced[i].interval_tets)
      traces.push_back(detail::affine_trace(disc.mesh, tet, sub));
    detail::for_each_line_gauss_point(
        disc.induced[i], {&pu.nodes}, [&](double s, double w, int interval) {
          const auto& tr = traces[interval];
          const Eigen::Vector4d tv = tr.at(s);
          double trace_u = 0.0;
          for (int a = 0; a < 4; ++a) trace_u += U[tr.dofs[a]] * tv[a];
          double uh = 0.0;
          for (const auto& [k, val] : eval_basis_1d(pu, s))
            uh += Uhat[layout.uhat_dof(i, k)] * val;
          num2 += w * (trace_u - uh) * (trace_u - uh);
        });
  }
  const double vmax =
      std::max(U.size() ? U.cwiseAbs().maxCoeff() : 0.0,
               Uhat.size() ? Uhat.cwiseAbs().maxCoeff() : 0.0);
  if (vmax <= 0.0)
    throw std::domain_error(
        "continuity_indicator: all-zero solution, indicator undefined");
  return std::sqrt(num2) / (vmax * std::sqrt(disc.net.total_length()));
}

/// Least-squares slope of log(err) against log(h).
inline double fit_convergence_slope(const std::vector<double>& h,
                                    const std::vector<double>& err) {
  if (h.size() != err.size() || h.size() < 2)
    throw std::invalid_argument("fit_convergence_slope: need matching series");
  const int n = static_cast<int>(h.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int i = 0; i < n; ++i) {
    const double x = std::log(h[i]), y = std::log(err[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace trifield
