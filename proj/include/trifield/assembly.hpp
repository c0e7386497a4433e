#pragma once

#include "trifield/problem.hpp"
#include "trifield/quadrature.hpp"

#include <Eigen/Sparse>

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace trifield {

using SparseBlock = Eigen::SparseMatrix<double>;
using Vec = Eigen::VectorXd;
using Triplet = Eigen::Triplet<double>;

inline double max_abs(const SparseBlock& m) {
  double v = 0.0;
  for (int k = 0; k < m.outerSize(); ++k)
    for (SparseBlock::InnerIterator it(m, k); it; ++it)
      v = std::max(v, std::abs(it.value()));
  return v;
}

/// max |M - M^T| entry, for symmetry checks.
inline double symmetry_error(const SparseBlock& m) {
  SparseBlock d = SparseBlock(m.transpose()) - m;
  return max_abs(d);
}

// ---------------------------------------------------------------------------
// DOF layout
// ---------------------------------------------------------------------------

struct DofLayout {
  int n3d = 0;
  std::vector<int> uhat_offset, phi_offset, psi_offset;  // per subsegment
  int n_uhat = 0, n_phi = 0, n_psi = 0;
  int n_mult = 0;  // junction-equality rows

  int uhat_dof(int sub, int local) const { return uhat_offset[sub] + local; }
  int phi_dof(int sub, int local) const { return phi_offset[sub] + local; }
  int psi_dof(int sub, int local) const { return psi_offset[sub] + local; }
};

inline DofLayout build_dof_layout(const Discretization& disc) {
  DofLayout layout;
  layout.n3d = disc.mesh.n_vertices();
  const int n = disc.net.n_subsegments();
  for (int i = 0; i < n; ++i) {
    layout.uhat_offset.push_back(layout.n_uhat);
    layout.phi_offset.push_back(layout.n_phi);
    layout.psi_offset.push_back(layout.n_psi);
    layout.n_uhat += disc.parts_u[i].n_dofs();
    layout.n_phi += disc.parts_phi[i].n_dofs();
    layout.n_psi += disc.parts_psi[i].n_dofs();
  }
  for (const auto& junction : disc.net.junctions)
    layout.n_mult += static_cast<int>(junction.incidences.size()) - 1;
  return layout;
}

/// Global u-hat DOF sitting at a subsegment endpoint (0 = a, 1 = b).
inline int endpoint_uhat_dof(const Discretization& disc, const DofLayout& layout,
                             int sub, int end) {
  const int local = end == 0 ? 0 : disc.parts_u[sub].n_dofs() - 1;
  return layout.uhat_dof(sub, local);
}

// ---------------------------------------------------------------------------
// Line sweep over merged partitions
// ---------------------------------------------------------------------------

namespace detail {

/// Barycentric trace of the four P1 basis functions of one tet along a
/// segment, as an affine function of arclength.
struct AffineTrace {
  std::array<int, 4> dofs;
  Eigen::Vector4d value0;  // at s = 0
  Eigen::Vector4d slope;   // per unit s

  Eigen::Vector4d at(double s) const { return value0 + s * slope; }
};

inline AffineTrace affine_trace(const TetMesh& mesh, int tet,
                                const SubSegment& sub) {
  AffineTrace tr;
  tr.dofs = mesh.tets[tet];
  const auto v = mesh.tet_vertices(tet);
  const Eigen::Vector4d ba = tet_barycentric(v, sub.a);
  const Eigen::Vector4d bb = tet_barycentric(v, sub.b);
  tr.value0 = ba;
  tr.slope = (bb - ba) / sub.length();
  return tr;
}

/// Visit the 2-point Gauss nodes of the union of the induced partition and
/// any extra 1D node sets; fn(s, weight, induced_interval).
template <typename F>
void for_each_line_gauss_point(const InducedPartition& induced,
                               const std::vector<const std::vector<double>*>& extra,
                               F&& fn) {
  std::vector<std::vector<double>> sets;
  sets.push_back(induced.breakpoints);
  for (const auto* e : extra) sets.push_back(*e);
  const double tol = 1e-12 * std::max(1.0, induced.length);
  const std::vector<double> bp = merge_breakpoints(sets, tol);
  for (std::size_t i = 0; i + 1 < bp.size(); ++i) {
    const double a = bp[i], len = bp[i + 1] - bp[i];
    const double mid = a + 0.5 * len;
    const auto it = std::upper_bound(induced.breakpoints.begin(),
                                     induced.breakpoints.end(), mid);
    int j = static_cast<int>(it - induced.breakpoints.begin()) - 1;
    j = std::clamp(j, 0, induced.n_intervals() - 1);
    for (int g = 0; g < 2; ++g)
      fn(a + len * kGauss2Nodes[g], len * kGauss2Weights[g], j);
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Block assembly
// ---------------------------------------------------------------------------

/// Bulk stiffness plus the trace stabilization term
///   alpha * sum_i int_{Lambda_i} |Gamma_i| u|_Lambda v|_Lambda ds.
inline SparseBlock assemble_A(const Discretization& disc,
                              const ProblemSpec& spec) {
  const int n = disc.mesh.n_vertices();
  std::vector<Triplet> trip;
  trip.reserve(static_cast<std::size_t>(disc.mesh.n_tets()) * 16);

  for (int t = 0; t < disc.mesh.n_tets(); ++t) {
    const auto grads = tet_p1_gradients(disc.mesh, t);
    const double vol = disc.mesh.tet_volume(t);
    if (vol <= 0.0) throw std::runtime_error("negative tet volume");
    const auto& dofs = disc.mesh.tets[t];
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j)
        trip.emplace_back(dofs[i], dofs[j],
                          vol * grads[i].dot(spec.K * grads[j]));
  }

  if (spec.alpha > 0.0) {
    for (int i = 0; i < disc.net.n_subsegments(); ++i) {
      const auto& sub = disc.net.subsegments[i];
      const double w_line = spec.alpha * sub.section_perimeter();
      std::vector<detail::AffineTrace> traces;
      for (int tet : disc.induced[i].interval_tets)
        traces.push_back(detail::affine_trace(disc.mesh, tet, sub));
      detail::for_each_line_gauss_point(
          disc.induced[i], {}, [&](double s, double w, int interval) {
            const auto& tr = traces[interval];
            const Eigen::Vector4d vals = tr.at(s);
            for (int a = 0; a < 4; ++a)
              for (int b = 0; b < 4; ++b)
                trip.emplace_back(tr.dofs[a], tr.dofs[b],
                                  w * w_line * vals[a] * vals[b]);
          });
    }
  }

  SparseBlock A(n, n);
  A.setFromTriplets(trip.begin(), trip.end());
  A.makeCompressed();
  return A;
}

/// 1D operator per subsegment: K_tilde |Sigma| stiffness plus the
/// alpha_hat |Gamma| mass term. Block-diagonal over subsegments.
inline SparseBlock assemble_Ahat(const Discretization& disc,
                                 const ProblemSpec& spec,
                                 const DofLayout& layout) {
  std::vector<Triplet> trip;
  for (int i = 0; i < disc.net.n_subsegments(); ++i) {
    const auto& sub = disc.net.subsegments[i];
    const auto& part = disc.parts_u[i];
    const double k_sigma = spec.k_tilde_of(sub.parent) * sub.section_area();
    const double m_gamma = spec.alpha_hat * sub.section_perimeter();
    for (int e = 0; e < part.n_elements(); ++e) {
      const double h = part.nodes[e + 1] - part.nodes[e];
      const int d0 = layout.uhat_dof(i, e), d1 = layout.uhat_dof(i, e + 1);
      const double ks = k_sigma / h;
      trip.emplace_back(d0, d0, ks);
      trip.emplace_back(d1, d1, ks);
      trip.emplace_back(d0, d1, -ks);
      trip.emplace_back(d1, d0, -ks);
      if (m_gamma > 0.0) {
        trip.emplace_back(d0, d0, m_gamma * h / 3.0);
        trip.emplace_back(d1, d1, m_gamma * h / 3.0);
        trip.emplace_back(d0, d1, m_gamma * h / 6.0);
        trip.emplace_back(d1, d0, m_gamma * h / 6.0);
      }
    }
  }
  SparseBlock Ahat(layout.n_uhat, layout.n_uhat);
  Ahat.setFromTriplets(trip.begin(), trip.end());
  Ahat.makeCompressed();
  return Ahat;
}

/// Junction continuity rows: at a junction with m coincident u-hat DOFs,
/// m-1 rows equate each DOF to the lowest-index one (+1 / -1 entries).
/// Junctions listed in `skip` contribute no rows.
inline SparseBlock build_junction_constraints(const Discretization& disc,
                                              const DofLayout& layout,
                                              const std::vector<char>& skip = {}) {
  std::vector<Triplet> trip;
  int row = 0;
  for (std::size_t j = 0; j < disc.net.junctions.size(); ++j) {
    if (!skip.empty() && skip[j]) continue;
    std::vector<int> dofs;
    for (const auto& [sub, end] : disc.net.junctions[j].incidences)
      dofs.push_back(endpoint_uhat_dof(disc, layout, sub, end));
    std::sort(dofs.begin(), dofs.end());
    for (std::size_t k = 1; k < dofs.size(); ++k) {
      trip.emplace_back(row, dofs[0], 1.0);
      trip.emplace_back(row, dofs[k], -1.0);
      ++row;
    }
  }
  SparseBlock Q(row, layout.n_uhat);
  Q.setFromTriplets(trip.begin(), trip.end());
  Q.makeCompressed();
  return Q;
}

/// The 1D operator bordered by the junction constraints:
/// [[Ahat, Q^T], [Q, 0]].
inline SparseBlock border_with_constraints(const SparseBlock& Ahat,
                                           const SparseBlock& Q) {
  const int n = Ahat.rows(), m = Q.rows();
  std::vector<Triplet> trip;
  trip.reserve(Ahat.nonZeros() + 2 * Q.nonZeros());
  for (int k = 0; k < Ahat.outerSize(); ++k)
    for (SparseBlock::InnerIterator it(Ahat, k); it; ++it)
      trip.emplace_back(it.row(), it.col(), it.value());
  for (int k = 0; k < Q.outerSize(); ++k)
    for (SparseBlock::InnerIterator it(Q, k); it; ++it) {
      trip.emplace_back(n + it.row(), it.col(), it.value());
      trip.emplace_back(it.col(), n + it.row(), it.value());
    }
  SparseBlock S(n + m, n + m);
  S.setFromTriplets(trip.begin(), trip.end());
  S.makeCompressed();
  return S;
}

struct CouplingBlocks {
  SparseBlock B;           // N x Nphi,        |Gamma| u|_L theta
  SparseBlock Bhat;        // Nhat x Nphi,     |Gamma| uhat theta
  SparseBlock Calpha;      // N x Npsi,        alpha |Gamma| u|_L eta
  SparseBlock Chat_alpha;  // Nhat x Npsi,     alpha_hat |Gamma| uhat eta
  SparseBlock C;           // N x Npsi,        u|_L eta          (unweighted)
  SparseBlock Chat;        // Nhat x Npsi,     uhat eta          (unweighted)
  SparseBlock G;           // N x N,           u|_L u|_L         (unweighted)
  SparseBlock Ghat;        // Nhat x Nhat,     uhat uhat         (unweighted)
  SparseBlock Gpsi;        // Npsi x Npsi,     eta eta           (unweighted)
};

/// All line-integral couplings between the 3D trace, the u-hat, phi and psi
/// spaces, integrated exactly on the union of the partitions.
inline CouplingBlocks assemble_coupling(const Discretization& disc,
                                        const ProblemSpec& spec,
                                        const DofLayout& layout) {
  std::vector<Triplet> tB, tBh, tCa, tCha, tC, tCh, tG, tGh, tGp;

  for (int i = 0; i < disc.net.n_subsegments(); ++i) {
    const auto& sub = disc.net.subsegments[i];
    const double gamma = sub.section_perimeter();
    const auto& pu = disc.parts_u[i];
    const auto& pphi = disc.parts_phi[i];
    const auto& ppsi = disc.parts_psi[i];

    std::vector<detail::AffineTrace> traces;
    for (int tet : disc.induced[i].interval_tets)
      traces.push_back(detail::affine_trace(disc.mesh, tet, sub));

    detail::for_each_line_gauss_point(
        disc.induced[i], {&pu.nodes, &pphi.nodes, &ppsi.nodes},
        [&](double s, double w, int interval) {
          const auto& tr = traces[interval];
          const Eigen::Vector4d tv = tr.at(s);
          const auto uv = eval_basis_1d(pu, s);
          const auto thv = eval_basis_1d(pphi, s);
          const auto ev = eval_basis_1d(ppsi, s);

          for (int a = 0; a < 4; ++a) {
            const int ka = tr.dofs[a];
            for (const auto& [l, th] : thv)
              tB.emplace_back(ka, layout.phi_dof(i, l), w * gamma * tv[a] * th);
            for (const auto& [l, e] : ev) {
              const int kl = layout.psi_dof(i, l);
              tCa.emplace_back(ka, kl, w * spec.alpha * gamma * tv[a] * e);
              tC.emplace_back(ka, kl, w * tv[a] * e);
            }
            for (int b = 0; b < 4; ++b)
              tG.emplace_back(ka, tr.dofs[b], w * tv[a] * tv[b]);
          }
          for (const auto& [ku, u] : uv) {
            const int ka = layout.uhat_dof(i, ku);
            for (const auto& [l, th] : thv)
              tBh.emplace_back(ka, layout.phi_dof(i, l), w * gamma * u * th);
            for (const auto& [l, e] : ev) {
              const int kl = layout.psi_dof(i, l);
              tCha.emplace_back(ka, kl, w * spec.alpha_hat * gamma * u * e);
              tCh.emplace_back(ka, kl, w * u * e);
            }
            for (const auto& [kb, ub] : uv)
              tGh.emplace_back(ka, layout.uhat_dof(i, kb), w * u * ub);
          }
          for (const auto& [la, ea] : ev)
            for (const auto& [lb, eb] : ev)
              tGp.emplace_back(layout.psi_dof(i, la), layout.psi_dof(i, lb),
                               w * ea * eb);
        });
  }

  auto build = [](int rows, int cols, std::vector<Triplet>& trip) {
    SparseBlock m(rows, cols);
    m.setFromTriplets(trip.begin(), trip.end());
    m.makeCompressed();
    return m;
  };
  const int n3 = layout.n3d;
  CouplingBlocks cb;
  cb.B = build(n3, layout.n_phi, tB);
  cb.Bhat = build(layout.n_uhat, layout.n_phi, tBh);
  cb.Calpha = build(n3, layout.n_psi, tCa);
  cb.Chat_alpha = build(layout.n_uhat, layout.n_psi, tCha);
  cb.C = build(n3, layout.n_psi, tC);
  cb.Chat = build(layout.n_uhat, layout.n_psi, tCh);
  cb.G = build(n3, n3, tG);
  cb.Ghat = build(layout.n_uhat, layout.n_uhat, tGh);
  cb.Gpsi = build(layout.n_psi, layout.n_psi, tGp);
  return cb;
}

/// Load vectors: f_k = int_Omega f phi_k (degree-2 tet rule) and
/// g_k = int_Lambda |Sigma| g_bar uhat_k ds.
inline std::pair<Vec, Vec> assemble_rhs(const Discretization& disc,
                                        const ProblemSpec& spec,
                                        const DofLayout& layout) {
  Vec f = Vec::Zero(layout.n3d);
  const auto& rule = tet_rule_order2();
  for (int t = 0; t < disc.mesh.n_tets(); ++t) {
    const auto v = disc.mesh.tet_vertices(t);
    const double vol = disc.mesh.tet_volume(t);
    const auto& dofs = disc.mesh.tets[t];
    for (const auto& qp : rule) {
      const Vec3 p = qp.bary[0] * v[0] + qp.bary[1] * v[1] + qp.bary[2] * v[2] +
                     qp.bary[3] * v[3];
      const double fw = vol * qp.weight * spec.f(p);
      for (int a = 0; a < 4; ++a) f[dofs[a]] += fw * qp.bary[a];
    }
  }

  Vec g = Vec::Zero(layout.n_uhat);
  for (int i = 0; i < disc.net.n_subsegments(); ++i) {
    const auto& sub = disc.net.subsegments[i];
    const double sigma = sub.section_area();
    const auto& pu = disc.parts_u[i];
    detail::for_each_line_gauss_point(
        disc.induced[i], {&pu.nodes}, [&](double s, double w, int) {
          const double gw = w * sigma * spec.g_bar_of(sub.parent, sub.parent_s0 + s);
          for (const auto& [k, u] : eval_basis_1d(pu, s))
            g[layout.uhat_dof(i, k)] += gw * u;
        });
  }
  return {f, g};
}

/// Every discrete block of the coupled problem on the full DOF sets,
/// before boundary conditions.
struct CoupledBlocks {
  DofLayout dofs;
  SparseBlock A;
  SparseBlock Ahat;       // without the junction border
  SparseBlock Q;          // junction-equality rows
  SparseBlock Ahat_star;  // [[Ahat, Q^T], [Q, 0]]
  CouplingBlocks cpl;
  Vec f, g;
  double alpha = 1.0, alpha_hat = 1.0;
};

inline CoupledBlocks assemble_all(const Discretization& disc,
                                  const ProblemSpec& spec) {
  spec.validate();
  CoupledBlocks blocks;
  blocks.dofs = build_dof_layout(disc);
  blocks.alpha = spec.alpha;
  blocks.alpha_hat = spec.alpha_hat;
  blocks.A = assemble_A(disc, spec);
  blocks.Ahat = assemble_Ahat(disc, spec, blocks.dofs);
  blocks.Q = build_junction_constraints(disc, blocks.dofs);
  blocks.Ahat_star = border_with_constraints(blocks.Ahat, blocks.Q);
  blocks.cpl = assemble_coupling(disc, spec, blocks.dofs);
  std::tie(blocks.f, blocks.g) = assemble_rhs(disc, spec, blocks.dofs);
  return blocks;
}

// ---------------------------------------------------------------------------
// Dirichlet elimination
// ---------------------------------------------------------------------------

struct BoundaryConditions {
  std::vector<char> fixed3d;   // mask over 3D DOFs
  Vec values3d;                // full length, zero on free DOFs
  std::vector<char> fixed1d;   // mask over u-hat DOFs
  Vec values1d;
  std::vector<char> junction_fixed;  // junctions absorbed into Dirichlet data
};

inline BoundaryConditions identify_bcs(const Discretization& disc,
                                       const ProblemSpec& spec,
                                       const DofLayout& layout) {
  BoundaryConditions bc;
  bc.fixed3d.assign(layout.n3d, 0);
  bc.values3d = Vec::Zero(layout.n3d);
  bc.fixed1d.assign(layout.n_uhat, 0);
  bc.values1d = Vec::Zero(layout.n_uhat);
  bc.junction_fixed.assign(disc.net.junctions.size(), 0);

  for (const auto& facet : disc.mesh.boundary_facets) {
    const auto it = spec.dirichlet_faces.find(facet.tag);
    if (it == spec.dirichlet_faces.end()) continue;
    for (int v : facet.vertices) {
      const double val = it->second(disc.mesh.vertices[v]);
      if (bc.fixed3d[v] &&
          std::abs(bc.values3d[v] - val) > 1e-12 * (1.0 + std::abs(val)))
        throw std::runtime_error("conflicting Dirichlet values at 3D vertex " +
                                 std::to_string(v));
      bc.fixed3d[v] = 1;
      bc.values3d[v] = val;
    }
  }

  auto pin_uhat = [&](int dof, double value) {
    if (bc.fixed1d[dof] &&
        std::abs(bc.values1d[dof] - value) > 1e-12 * (1.0 + std::abs(value)))
      throw std::runtime_error("conflicting Dirichlet values at u-hat DOF " +
                               std::to_string(dof));
    bc.fixed1d[dof] = 1;
    bc.values1d[dof] = value;
  };

  for (int i = 0; i < disc.net.n_subsegments(); ++i) {
    const auto& sub = disc.net.subsegments[i];
    if (sub.junction_a < 0 && sub.bc_a.is_dirichlet())
      pin_uhat(endpoint_uhat_dof(disc, layout, i, 0), sub.bc_a.value);
    if (sub.junction_b < 0 && sub.bc_b.is_dirichlet())
      pin_uhat(endpoint_uhat_dof(disc, layout, i, 1), sub.bc_b.value);
  }

  // A Dirichlet condition landing on a junction pins every DOF coincident
  // there; the junction then needs no equality rows.
  for (std::size_t j = 0; j < disc.net.junctions.size(); ++j) {
    bool any = false;
    double value = 0.0;
    for (const auto& [sub, end] : disc.net.junctions[j].incidences) {
      const auto& s = disc.net.subsegments[sub];
      const auto& ebc = end == 0 ? s.bc_a : s.bc_b;
      if (ebc.is_dirichlet()) {
        if (any && std::abs(value - ebc.value) > 1e-12 * (1.0 + std::abs(value)))
          throw std::runtime_error("conflicting Dirichlet values at junction");
        any = true;
        value = ebc.value;
      }
    }
    if (any) {
      bc.junction_fixed[j] = 1;
      for (const auto& [sub, end] : disc.net.junctions[j].incidences)
        pin_uhat(endpoint_uhat_dof(disc, layout, sub, end), value);
    }
  }
  return bc;
}

/// The coupled blocks restricted to free DOFs, with Dirichlet values lifted
/// into the right-hand sides. The junction border is rebuilt over free DOFs.
struct ConstrainedSystem {
  DofLayout dofs;
  double alpha = 1.0, alpha_hat = 1.0;

  std::vector<int> free3d;  // free index -> full 3D DOF
  std::vector<int> free1d;  // free index -> full u-hat DOF
  Vec values3d, values1d;   // full-length Dirichlet values (zero on free)

  SparseBlock A;    // nf3 x nf3
  SparseBlock A1;   // (nf1 + n_mult)^2 bordered 1D operator
  int n_mult = 0;

  SparseBlock B3, B1;    // free rows of B, Bhat
  SparseBlock Ca3, Ca1;  // free rows of Calpha, Chat_alpha
  SparseBlock C3, C1;    // free rows of C, Chat
  SparseBlock G3, G1;    // free rows+cols of G, Ghat
  SparseBlock Gpsi;

  Vec f, g;              // lifted loads on free DOFs
  Vec lin_G3, lin_G1;    // (G w_d) on free rows: functional lifting terms
  Vec lin_C;             // C_d^T w_d over psi DOFs

  int nf3() const { return static_cast<int>(free3d.size()); }
  int nf1() const { return static_cast<int>(free1d.size()); }
  int n_w() const { return nf3() + nf1() + n_mult; }
  int n_controls() const { return dofs.n_phi + dofs.n_psi; }

  Vec full_U(const Vec& u_free) const {
    Vec u = values3d;
    for (int i = 0; i < nf3(); ++i) u[free3d[i]] += u_free[i];
    return u;
  }
  Vec full_Uhat(const Vec& u_free) const {
    Vec u = values1d;
    for (int i = 0; i < nf1(); ++i) u[free1d[i]] += u_free[i];
    return u;
  }
};

namespace detail {

inline SparseBlock select_rows(const SparseBlock& m,
                               const std::vector<int>& full2free, int nfree) {
  std::vector<Triplet> trip;
  trip.reserve(m.nonZeros());
  for (int k = 0; k < m.outerSize(); ++k)
    for (SparseBlock::InnerIterator it(m, k); it; ++it)
      if (full2free[it.row()] >= 0)
        trip.emplace_back(full2free[it.row()], it.col(), it.value());
  SparseBlock r(nfree, m.cols());
  r.setFromTriplets(trip.begin(), trip.end());
  r.makeCompressed();
  return r;
}

inline SparseBlock select_rows_cols(const SparseBlock& m,
                                    const std::vector<int>& full2free,
                                    int nfree) {
  std::vector<Triplet> trip;
  trip.reserve(m.nonZeros());
  for (int k = 0; k < m.outerSize(); ++k)
    for (SparseBlock::InnerIterator it(m, k); it; ++it)
      if (full2free[it.row()] >= 0 && full2free[it.col()] >= 0)
        trip.emplace_back(full2free[it.row()], full2free[it.col()], it.value());
  SparseBlock r(nfree, nfree);
  r.setFromTriplets(trip.begin(), trip.end());
  r.makeCompressed();
  return r;
}

inline Vec select(const Vec& v, const std::vector<int>& free) {
  Vec r(free.size());
  for (std::size_t i = 0; i < free.size(); ++i) r[i] = v[free[i]];
  return r;
}

}  // namespace detail

inline ConstrainedSystem apply_dirichlet(const CoupledBlocks& blocks,
                                         const Discretization& disc,
                                         const ProblemSpec& spec) {
  const DofLayout& layout = blocks.dofs;
  const BoundaryConditions bc = identify_bcs(disc, spec, layout);

  ConstrainedSystem sys;
  sys.dofs = layout;
  sys.alpha = blocks.alpha;
  sys.alpha_hat = blocks.alpha_hat;
  sys.values3d = bc.values3d;
  sys.values1d = bc.values1d;

  std::vector<int> full2free3(layout.n3d, -1), full2free1(layout.n_uhat, -1);
  for (int i = 0; i < layout.n3d; ++i)
    if (!bc.fixed3d[i]) {
      full2free3[i] = static_cast<int>(sys.free3d.size());
      sys.free3d.push_back(i);
    }
  for (int i = 0; i < layout.n_uhat; ++i)
    if (!bc.fixed1d[i]) {
      full2free1[i] = static_cast<int>(sys.free1d.size());
      sys.free1d.push_back(i);
    }

  sys.A = detail::select_rows_cols(blocks.A, full2free3, sys.nf3());
  const SparseBlock Ahat_ff =
      detail::select_rows_cols(blocks.Ahat, full2free1, sys.nf1());

  // junction rows over free DOFs only (fixed junctions were propagated)
  SparseBlock Qfull = build_junction_constraints(disc, layout, bc.junction_fixed);
  std::vector<Triplet> qtrip;
  for (int k = 0; k < Qfull.outerSize(); ++k)
    for (SparseBlock::InnerIterator it(Qfull, k); it; ++it) {
      if (full2free1[it.col()] < 0)
        throw std::runtime_error("junction row references an eliminated DOF");
      qtrip.emplace_back(it.row(), full2free1[it.col()], it.value());
    }
  SparseBlock Qf(Qfull.rows(), sys.nf1());
  Qf.setFromTriplets(qtrip.begin(), qtrip.end());
  sys.n_mult = static_cast<int>(Qf.rows());
  sys.A1 = border_with_constraints(Ahat_ff, Qf);

  sys.B3 = detail::select_rows(blocks.cpl.B, full2free3, sys.nf3());
  sys.B1 = detail::select_rows(blocks.cpl.Bhat, full2free1, sys.nf1());
  sys.Ca3 = detail::select_rows(blocks.cpl.Calpha, full2free3, sys.nf3());
  sys.Ca1 = detail::select_rows(blocks.cpl.Chat_alpha, full2free1, sys.nf1());
  sys.C3 = detail::select_rows(blocks.cpl.C, full2free3, sys.nf3());
  sys.C1 = detail::select_rows(blocks.cpl.Chat, full2free1, sys.nf1());
  sys.G3 = detail::select_rows_cols(blocks.cpl.G, full2free3, sys.nf3());
  sys.G1 = detail::select_rows_cols(blocks.cpl.Ghat, full2free1, sys.nf1());
  sys.Gpsi = blocks.cpl.Gpsi;

  // move lifted Dirichlet data to the right-hand sides
  const Vec a_wd3 = blocks.A * bc.values3d;
  const Vec a_wd1 = blocks.Ahat * bc.values1d;
  sys.f = detail::select(blocks.f - a_wd3, sys.free3d);
  sys.g = detail::select(blocks.g - a_wd1, sys.free1d);
  sys.lin_G3 = detail::select(blocks.cpl.G * bc.values3d, sys.free3d);
  sys.lin_G1 = detail::select(blocks.cpl.Ghat * bc.values1d, sys.free1d);
  sys.lin_C = blocks.cpl.C.transpose() * bc.values3d +
              blocks.cpl.Chat.transpose() * bc.values1d;
  return sys;
}

/// Value of the discrete mismatch functional for full-DOF fields.
inline double functional_value(const CoupledBlocks& blocks, const Vec& U,
                               const Vec& Uhat, const Vec& Psi) {
  const auto& c = blocks.cpl;
  double j = 0.5 * U.dot(c.G * U) - U.dot(c.C * Psi) +
             0.5 * Uhat.dot(c.Ghat * Uhat) - Uhat.dot(c.Chat * Psi) +
             Psi.dot(c.Gpsi * Psi);
  return j;
}

}  // namespace trifield
