#pragma once

#include "trifield/assembly.hpp"

#include <Eigen/SVD>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include <chrono>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace trifield {

enum class SolveMethod { kkt_direct, reduced_cg, reduced_sd };

struct SolveResult {
  Vec U;     // full 3D DOFs (Dirichlet values filled in)
  Vec Uhat;  // full u-hat DOFs
  Vec Phi;
  Vec Psi;
  Vec P;     // constraint multipliers on free DOFs (+ junction rows)
  double functional = 0.0;
  int iterations = 0;
  std::vector<double> residual_history;
  std::vector<double> functional_history;
  double constraint_residual = 0.0;
  double solve_seconds = 0.0;
};

// ---------------------------------------------------------------------------
// KKT saddle-point system
// ---------------------------------------------------------------------------

/// First-order optimality system
///   [ G    0    -C     A^T ] [ W  ]   [ .. ]
///   [ 0    0     0     B^T ] [ Phi]   [ 0  ]
///   [-C^T  0    2Gpsi (-Ca)^T] [ Psi] = [ .. ]
///   [ A    B   -Ca     0   ] [ -P ]   [ F  ]
/// on the free DOFs; Dirichlet lifting fills the dotted entries of the
/// right-hand side. With this block layout the flux unknown solves the
/// constraint A W + B Phi - Ca Psi = F; the reported flux is its negation,
/// so that A W - B Phi - Ca Psi = F holds for the returned fields.
struct KKTSystem {
  SparseBlock S;
  Vec rhs;
  int n_w = 0, n_phi = 0, n_psi = 0;

  int dim() const { return 2 * n_w + n_phi + n_psi; }
};

namespace detail {

inline void append_block(std::vector<Triplet>& trip, const SparseBlock& m,
                         int row0, int col0, double scale = 1.0,
                         bool transpose = false) {
  for (int k = 0; k < m.outerSize(); ++k)
    for (SparseBlock::InnerIterator it(m, k); it; ++it) {
      const int r = transpose ? it.col() : it.row();
      const int c = transpose ? it.row() : it.col();
      trip.emplace_back(row0 + r, col0 + c, scale * it.value());
    }
}

}  // namespace detail

inline KKTSystem build_kkt_system(const ConstrainedSystem& sys) {
  KKTSystem kkt;
  const int nf3 = sys.nf3(), nf1 = sys.nf1(), nm = sys.n_mult;
  kkt.n_w = sys.n_w();
  kkt.n_phi = sys.dofs.n_phi;
  kkt.n_psi = sys.dofs.n_psi;
  const int oW = 0, oPhi = kkt.n_w, oPsi = kkt.n_w + kkt.n_phi,
            oP = kkt.n_w + kkt.n_phi + kkt.n_psi;
  const int o1 = nf3;  // u-hat rows inside the W block

  std::vector<Triplet> trip;
  // (0,0) block: functional matrices
  detail::append_block(trip, sys.G3, oW, oW);
  detail::append_block(trip, sys.G1, o1, o1);
  // (0,2) and (2,0): -C
  detail::append_block(trip, sys.C3, oW, oPsi, -1.0);
  detail::append_block(trip, sys.C1, o1, oPsi, -1.0);
  detail::append_block(trip, sys.C3, oPsi, oW, -1.0, true);
  detail::append_block(trip, sys.C1, oPsi, o1, -1.0, true);
  // (2,2): 2 Gpsi
  detail::append_block(trip, sys.Gpsi, oPsi, oPsi, 2.0);
  // (0,3) and (3,0): the coupled operator
  detail::append_block(trip, sys.A, oW, oP);
  detail::append_block(trip, sys.A, oP, oW);
  detail::append_block(trip, sys.A1, o1, oP + o1);
  detail::append_block(trip, sys.A1, oP + o1, o1);
  // (1,3) and (3,1): B blocks (1D part enters with a minus sign)
  detail::append_block(trip, sys.B3, oPhi, oP, 1.0, true);
  detail::append_block(trip, sys.B1, oPhi, oP + o1, -1.0, true);
  detail::append_block(trip, sys.B3, oP, oPhi, 1.0);
  detail::append_block(trip, sys.B1, oP + o1, oPhi, -1.0);
  // (2,3) and (3,2): -Ca
  detail::append_block(trip, sys.Ca3, oPsi, oP, -1.0, true);
  detail::append_block(trip, sys.Ca1, oPsi, oP + o1, -1.0, true);
  detail::append_block(trip, sys.Ca3, oP, oPsi, -1.0);
  detail::append_block(trip, sys.Ca1, oP + o1, oPsi, -1.0);

  kkt.S = SparseBlock(kkt.dim(), kkt.dim());
  kkt.S.setFromTriplets(trip.begin(), trip.end());
  kkt.S.makeCompressed();

  kkt.rhs = Vec::Zero(kkt.dim());
  kkt.rhs.segment(oW, nf3) = -sys.lin_G3;
  kkt.rhs.segment(o1, nf1) = -sys.lin_G1;
  kkt.rhs.segment(oPsi, kkt.n_psi) = sys.lin_C;
  kkt.rhs.segment(oP, nf3) = sys.f;
  kkt.rhs.segment(oP + o1, nf1) = sys.g;
  (void)nm;
  return kkt;
}

/// Residual of the constraint A W - B Phi - Ca Psi = F at given free fields.
inline double constraint_residual(const ConstrainedSystem& sys, const Vec& Uf,
                                  const Vec& U1f, const Vec& Phi,
                                  const Vec& Psi) {
  const Vec r3 = sys.A * Uf - sys.B3 * Phi - sys.Ca3 * Psi - sys.f;
  Vec rhs1 = Vec::Zero(sys.nf1() + sys.n_mult);
  rhs1.head(sys.nf1()) = sys.g - sys.B1 * Phi + sys.Ca1 * Psi;
  const Vec r1 = sys.A1 * U1f - rhs1;
  const double rn = std::sqrt(r3.squaredNorm() + r1.squaredNorm());
  const double fn = std::sqrt(sys.f.squaredNorm() + sys.g.squaredNorm());
  return fn > 0.0 ? rn / fn : rn;
}

inline SolveResult solve_kkt_direct(const CoupledBlocks& blocks,
                                    const ConstrainedSystem& sys) {
  const auto t0 = std::chrono::steady_clock::now();
  const KKTSystem kkt = build_kkt_system(sys);

  Eigen::SparseLU<SparseBlock> lu;
  lu.compute(kkt.S);
  if (lu.info() != Eigen::Success)
    throw std::runtime_error(
        "solve_kkt_direct: singular KKT factorization (rank deficiency)");

  Vec x = lu.solve(kkt.rhs);
  const double rhs_norm = kkt.rhs.norm();
  double res = (kkt.rhs - kkt.S * x).norm();
  for (int it = 0; it < 3 && res > 1e-9 * std::max(rhs_norm, 1e-300); ++it) {
    x += lu.solve(kkt.rhs - kkt.S * x);
    res = (kkt.rhs - kkt.S * x).norm();
  }
  const double rel = rhs_norm > 0.0 ? res / rhs_norm : res;
  if (rel > 1e-9)
    throw std::runtime_error("solve_kkt_direct: residual " +
                             std::to_string(rel) + " above tolerance");

  const int nf3 = sys.nf3(), nf1 = sys.nf1(), nm = sys.n_mult;
  const int oPhi = kkt.n_w, oPsi = kkt.n_w + kkt.n_phi,
            oP = kkt.n_w + kkt.n_phi + kkt.n_psi;

  SolveResult out;
  const Vec Uf = x.segment(0, nf3);
  const Vec U1f = x.segment(nf3, nf1 + nm);
  out.Phi = -x.segment(oPhi, kkt.n_phi);
  out.Psi = x.segment(oPsi, kkt.n_psi);
  out.P = -x.segment(oP, kkt.n_w);
  out.U = sys.full_U(Uf);
  out.Uhat = sys.full_Uhat(U1f.head(nf1));
  out.functional = functional_value(blocks, out.U, out.Uhat, out.Psi);
  out.iterations = 1;
  out.residual_history = {rel};
  out.functional_history = {out.functional};
  out.constraint_residual =
      constraint_residual(sys, Uf, U1f, out.Phi, out.Psi);
  out.solve_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return out;
}

// ---------------------------------------------------------------------------
// Matrix-free reduced functional
// ---------------------------------------------------------------------------

/// Handles to apply the reduced Hessian M and gradient M X + d of
/// J*(X) = 1/2 X^T M X + d^T X + const without forming M, through independent
/// factorizations of the 3D operator and the bordered 1D operator.
class ReducedOperator {
 public:
  explicit ReducedOperator(const ConstrainedSystem& sys) : sys_(sys) {
    if (sys.nf3() > 0) {
      a3_.compute(sys.A);
      if (a3_.info() != Eigen::Success)
        throw std::runtime_error(
            "ReducedOperator: 3D operator factorization failed (is it SPD?)");
    }
    if (sys.A1.rows() > 0) {
      a1_.compute(sys.A1);
      if (a1_.info() != Eigen::Success)
        throw std::runtime_error(
            "ReducedOperator: 1D operator factorization failed");
    }
    // affine part of the gradient
    w3_0_ = solve3(sys_.f);
    w1_0_ = solve1(pad1(sys_.g));
    const Vec y3 = sys_.G3 * w3_0_ + sys_.lin_G3;
    const Vec y1 = sys_.G1 * head1(w1_0_) + sys_.lin_G1;
    const Vec z3 = solve3(y3);
    const Vec z1 = solve1(pad1(y1));
    d_ = Vec::Zero(dim());
    if (dim() > 0) {
      d_.head(nphi()) = sys_.B3.transpose() * z3 - sys_.B1.transpose() * head1(z1);
      d_.tail(npsi()) = sys_.Ca3.transpose() * z3 +
                        sys_.Ca1.transpose() * head1(z1) -
                        sys_.C3.transpose() * w3_0_ -
                        sys_.C1.transpose() * head1(w1_0_) - sys_.lin_C;
    }
  }

  int nphi() const { return sys_.dofs.n_phi; }
  int npsi() const { return sys_.dofs.n_psi; }
  int dim() const { return nphi() + npsi(); }
  const Vec& d() const { return d_; }
  const ConstrainedSystem& system() const { return sys_; }

  /// M X through two forward and two adjoint solves.
  Vec apply_M(const Vec& X) const {
    const Vec Phi = X.head(nphi());
    const Vec Psi = X.tail(npsi());
    const Vec w3 = solve3(sys_.B3 * Phi + sys_.Ca3 * Psi);
    const Vec w1 = solve1(pad1(-(sys_.B1 * Phi) + sys_.Ca1 * Psi));
    const Vec y3 = sys_.G3 * w3 - sys_.C3 * Psi;
    const Vec y1 = sys_.G1 * head1(w1) - sys_.C1 * Psi;
    const Vec z3 = solve3(y3);
    const Vec z1 = solve1(pad1(y1));
    Vec mx(dim());
    mx.head(nphi()) = sys_.B3.transpose() * z3 - sys_.B1.transpose() * head1(z1);
    mx.tail(npsi()) = sys_.Ca3.transpose() * z3 +
                      sys_.Ca1.transpose() * head1(z1) -
                      sys_.C3.transpose() * w3 - sys_.C1.transpose() * head1(w1) +
                      2.0 * (sys_.Gpsi * Psi);
    return mx;
  }

  /// Forward states (free DOFs) for controls X, including the loads.
  void states(const Vec& X, Vec& u3_free, Vec& u1_free) const {
    const Vec Phi = X.head(nphi());
    const Vec Psi = X.tail(npsi());
    u3_free = solve3(sys_.f + sys_.B3 * Phi + sys_.Ca3 * Psi);
    const Vec w1 =
        solve1(pad1(sys_.g - sys_.B1 * Phi + sys_.Ca1 * Psi));
    u1_free = w1;
  }

  /// 1/2 X^T M X + d^T X; constant offset excluded.
  double quadratic_value(const Vec& X) const {
    return 0.5 * X.dot(apply_M(X)) + d_.dot(X);
  }

 private:
  Vec solve3(const Vec& b) const {
    if (sys_.nf3() == 0) return Vec::Zero(0);
    return a3_.solve(b);
  }
  Vec solve1(const Vec& b) const {
    if (sys_.A1.rows() == 0) return Vec::Zero(0);
    return a1_.solve(b);
  }
  Vec pad1(const Vec& b) const {
    Vec r = Vec::Zero(sys_.nf1() + sys_.n_mult);
    r.head(sys_.nf1()) = b;
    return r;
  }
  Vec head1(const Vec& b) const { return b.head(sys_.nf1()); }

  const ConstrainedSystem& sys_;
  Eigen::SimplicialLDLT<SparseBlock> a3_;
  Eigen::SparseLU<SparseBlock> a1_;
  Vec w3_0_, w1_0_;
  Vec d_;
};

/// Gradient of the reduced functional at X.
inline Vec reduced_gradient(const ReducedOperator& op, const Vec& X) {
  return op.apply_M(X) + op.d();
}

struct MinimizeOptions {
  SolveMethod method = SolveMethod::reduced_cg;
  double tol = 1e-10;  // relative gradient norm
  int max_iter = 0;    // 0: ten times the control dimension
};

struct QuadraticIterate {
  Vec X;
  int iterations = 0;
  std::vector<double> residual_history;    // |grad| / |d|
  std::vector<double> functional_history;  // quadratic value plus offset
};

/// Minimize 1/2 X^T M X + d^T X from X = 0, with M applied through a
/// callback. CG, or steepest descent with the exact quadratic stepsize
/// zeta = -(g.g)/(g.Mg).
inline QuadraticIterate minimize_quadratic(
    const std::function<Vec(const Vec&)>& apply_M, const Vec& d,
    SolveMethod method, double tol, int max_iter, double j_offset = 0.0) {
  const int n = static_cast<int>(d.size());
  QuadraticIterate out;
  out.X = Vec::Zero(n);
  double jval = j_offset;
  out.functional_history.push_back(jval);
  const double dnorm = d.norm();
  if (n == 0 || dnorm == 0.0) return out;

  if (method == SolveMethod::reduced_cg) {
    Vec r = -d;  // residual of M X = -d, equals -gradient
    Vec p = r;
    double rs = r.squaredNorm();
    out.residual_history.push_back(std::sqrt(rs) / dnorm);
    while (std::sqrt(rs) > tol * dnorm) {
      if (++out.iterations > max_iter)
        throw std::runtime_error("minimize_quadratic: max iterations exceeded");
      const Vec mp = apply_M(p);
      const double pmp = p.dot(mp);
      if (pmp <= 0.0)
        throw std::runtime_error(
            "minimize_quadratic: non-descent direction, M is not SPD");
      const double step = rs / pmp;
      out.X += step * p;
      jval -= 0.5 * step * rs;  // exact decrease of the quadratic
      r -= step * mp;
      const double rs_new = r.squaredNorm();
      p = r + (rs_new / rs) * p;
      rs = rs_new;
      out.residual_history.push_back(std::sqrt(rs) / dnorm);
      out.functional_history.push_back(jval);
    }
  } else {
    Vec g = d;  // gradient at X = 0
    out.residual_history.push_back(g.norm() / dnorm);
    while (g.norm() > tol * dnorm) {
      if (++out.iterations > max_iter)
        throw std::runtime_error("minimize_quadratic: max iterations exceeded");
      const Vec mg = apply_M(g);
      const double gmg = g.dot(mg);
      if (gmg <= 0.0)
        throw std::runtime_error(
            "minimize_quadratic: non-descent direction, M is not SPD");
      const double gg = g.squaredNorm();
      const double zeta = -gg / gmg;
      out.X += zeta * g;
      jval += zeta * gg + 0.5 * zeta * zeta * gmg;  // = -gg^2/(2 gMg)
      g += zeta * mg;
      out.residual_history.push_back(g.norm() / dnorm);
      out.functional_history.push_back(jval);
    }
  }
  return out;
}

/// Minimize the reduced quadratic by conjugate gradients or by steepest
/// descent with the exact quadratic stepsize zeta = -(g.g)/(g.Mg).
inline SolveResult minimize_reduced(const CoupledBlocks& blocks,
                                    const ConstrainedSystem& sys,
                                    const MinimizeOptions& opts = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  ReducedOperator op(sys);
  const int n = op.dim();
  const int max_iter = opts.max_iter > 0 ? opts.max_iter : 10 * std::max(n, 1);

  SolveResult out;

  // constant offset making the tracked values equal the mismatch functional
  double j_const;
  {
    Vec u3, u1;
    op.states(Vec::Zero(n), u3, u1);
    j_const = functional_value(blocks, sys.full_U(u3),
                               sys.full_Uhat(u1.head(sys.nf1())),
                               Vec::Zero(sys.dofs.n_psi));
  }

  QuadraticIterate iter = minimize_quadratic(
      [&op](const Vec& v) { return op.apply_M(v); }, op.d(), opts.method,
      opts.tol, max_iter, j_const);
  const Vec& X = iter.X;
  out.iterations = iter.iterations;
  out.residual_history = std::move(iter.residual_history);
  out.functional_history = std::move(iter.functional_history);

  Vec u3, u1;
  op.states(X, u3, u1);
  out.Phi = X.head(op.nphi());
  out.Psi = X.tail(op.npsi());
  out.P = Vec::Zero(sys.n_w());
  out.U = sys.full_U(u3);
  out.Uhat = sys.full_Uhat(u1.head(sys.nf1()));
  out.functional = functional_value(blocks, out.U, out.Uhat, out.Psi);
  out.constraint_residual =
      constraint_residual(sys, u3, u1, out.Phi, out.Psi);
  out.solve_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return out;
}

inline SolveResult solve(const CoupledBlocks& blocks,
                         const ConstrainedSystem& sys, SolveMethod method,
                         double tol = 1e-10, int max_iter = 0) {
  if (method == SolveMethod::kkt_direct) return solve_kkt_direct(blocks, sys);
  return minimize_reduced(blocks, sys, {method, tol, max_iter});
}

// ---------------------------------------------------------------------------
// Conditioning
// ---------------------------------------------------------------------------

/// 2-norm condition number through dense singular values; guarded by a
/// dimension cap since the matrix is densified.
inline double estimate_condition(const SparseBlock& m, int dense_cap = 5000) {
  if (m.rows() != m.cols())
    throw std::invalid_argument("estimate_condition: matrix must be square");
  if (m.rows() > dense_cap)
    throw std::invalid_argument(
        "estimate_condition: dimension exceeds the dense cap");
  const Eigen::MatrixXd dense = Eigen::MatrixXd(m);
  Eigen::BDCSVD<Eigen::MatrixXd> svd(dense);
  const auto& s = svd.singularValues();
  const double smin = s[s.size() - 1];
  if (smin == 0.0) return std::numeric_limits<double>::infinity();
  return s[0] / smin;
}

}  // namespace trifield
