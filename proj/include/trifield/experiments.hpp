#pragma once

#include "trifield/config.hpp"
#include "trifield/postproc.hpp"
#include "trifield/solver.hpp"

#include <cmath>
#include <utility>
#include <vector>

namespace trifield {

// ---------------------------------------------------------------------------
// Generic coupled run
// ---------------------------------------------------------------------------

struct RunOutput {
  Discretization disc;
  CoupledBlocks blocks;
  ConstrainedSystem sys;
  SolveResult result;
};

inline RunOutput run_coupled(TetMesh mesh, std::vector<Segment> segments,
                             const ProblemSpec& spec, const MeshRatios& ratios,
                             SolveMethod method = SolveMethod::kkt_direct,
                             double tol = 1e-10, int max_iter = 0) {
  RunOutput out;
  const double split_tol = 1e-9 * mesh.edge_length;
  SegmentNetwork net = split_at_intersections(std::move(segments), split_tol);
  out.disc = build_discretization(std::move(mesh), std::move(net), ratios);
  out.blocks = assemble_all(out.disc, spec);
  out.sys = apply_dirichlet(out.blocks, out.disc, spec);
  out.result = solve(out.blocks, out.sys, method, tol, max_iter);
  return out;
}

// ---------------------------------------------------------------------------
// Test problem 1: single axial inclusion with a closed-form solution
// ---------------------------------------------------------------------------

/// Radial solution u = a r^2 + b r + c outside the inclusion radius, constant
/// k1 on the centreline problem; C^1 across the matching radius, zero
/// interface flux.
struct Tp1Problem {
  double l = 2.0;
  double r_check = 0.01;  // inclusion radius
  double k1 = 0.5;
  double k2 = 5.0;

  double r_hat() const { return l * std::sqrt(2.0) / 2.0; }
  double a() const { return (k2 - k1) / std::pow(r_hat() - r_check, 2); }
  double b() const { return -2.0 * r_check * a(); }
  double c() const { return k1 + a() * r_check * r_check; }

  Segment segment() const {
    Segment s;
    s.a = Vec3(0, 0, -l / 2);
    s.b = Vec3(0, 0, l / 2);
    s.radius = r_check;
    s.bc_a = EndpointBC::dirichlet(k1);
    s.bc_b = EndpointBC::dirichlet(k1);
    return s;
  }

  ExactSolution3D exact3d() const {
    const double aa = a(), bb = b(), cc = c();
    ExactSolution3D e;
    e.value = [aa, bb, cc](const Vec3& p) {
      const double r = std::hypot(p.x(), p.y());
      return aa * r * r + bb * r + cc;
    };
    e.gradient = [aa, bb](const Vec3& p) {
      const double r = std::hypot(p.x(), p.y());
      if (r < 1e-300) return Vec3(0, 0, 0);
      const double dr = 2.0 * aa + bb / r;
      return Vec3(dr * p.x(), dr * p.y(), 0.0);
    };
    return e;
  }

  ExactSolution1D exact1d() const {
    const double v = k1;
    return {[v](double) { return v; }, [](double) { return 0.0; }};
  }

  ProblemSpec spec(double alpha = 1.0, double alpha_hat = 1.0) const {
    ProblemSpec s;
    s.set_scalar_K(1.0);
    s.K_tilde = {1.0};
    s.alpha = alpha;
    s.alpha_hat = alpha_hat;
    const double aa = a(), bb = b();
    s.f = [aa, bb](const Vec3& p) {
      const double r = std::hypot(p.x(), p.y());
      return -bb / std::max(r, 1e-300) - 4.0 * aa;
    };
    s.g_bar = {[](double) { return 0.0; }};
    s.dirichlet_faces[FaceTag::lateral] = exact3d().value;
    return s;
  }
};

struct Tp1Row {
  int n = 0;
  double h = 0.0;
  int dofs3d = 0;
  int dofs1d = 0;
  double e_l2 = 0.0, e_h1 = 0.0;
  double ehat_l2 = 0.0, ehat_h1 = 0.0;
  double functional = 0.0;
  double delta_u_l2 = 0.0;
};

inline Tp1Row tp1_single(const Tp1Problem& prob, int n, const MeshRatios& ratios,
                         SolveMethod method = SolveMethod::kkt_direct,
                         RunOutput* keep = nullptr) {
  RunOutput out = run_coupled(build_box_mesh(prob.l, n), {prob.segment()},
                              prob.spec(), ratios, method);
  Tp1Row row;
  row.n = n;
  row.h = out.disc.mesh.h;
  row.dofs3d = out.disc.mesh.n_vertices();
  row.dofs1d = out.blocks.dofs.n_uhat;
  const ErrorPair e3 = error_norms_3d(out.disc.mesh, out.result.U, prob.exact3d());
  row.e_l2 = e3.l2;
  row.e_h1 = e3.h1;
  // single subsegment: 1D errors on its partition
  const ErrorPair e1 = error_norms_1d(out.disc.parts_u[0], out.result.Uhat,
                                      prob.exact1d());
  row.ehat_l2 = e1.l2;
  row.ehat_h1 = e1.h1;
  row.functional = out.result.functional;
  row.delta_u_l2 = continuity_indicator(out.disc, out.blocks.dofs, out.result.U,
                                        out.result.Uhat);
  if (keep) *keep = std::move(out);
  return row;
}

inline std::vector<Tp1Row> run_tp1(const std::vector<int>& mesh_ns,
                                   const MeshRatios& ratios = {1.0, 0.5, 0.5},
                                   SolveMethod method = SolveMethod::kkt_direct) {
  Tp1Problem prob;
  std::vector<Tp1Row> rows;
  for (int n : mesh_ns) rows.push_back(tp1_single(prob, n, ratios, method));
  return rows;
}

// ---------------------------------------------------------------------------
// Test problem 2: unit forcing, no closed-form solution
// ---------------------------------------------------------------------------

struct Tp2Problem {
  double l = 2.0;
  double r_check = 0.01;
  double k_tilde = 1.0;

  Segment segment() const {
    Segment s;
    s.a = Vec3(0, 0, -l / 2);
    s.b = Vec3(0, 0, l / 2);
    s.radius = r_check;
    s.bc_a = EndpointBC::dirichlet(0.0);
    s.bc_b = EndpointBC::dirichlet(0.0);
    return s;
  }

  ProblemSpec spec() const {
    ProblemSpec s;
    s.set_scalar_K(1.0);
    s.K_tilde = {k_tilde};
    s.f = [](const Vec3&) { return 1.0; };
    s.g_bar = {[](double) { return 0.0; }};
    s.dirichlet_faces[FaceTag::top] = [](const Vec3&) { return 0.0; };
    s.dirichlet_faces[FaceTag::bottom] = [](const Vec3&) { return 0.0; };
    return s;
  }
};

struct Tp2Report {
  double k_tilde = 0.0;
  double min_u = 0.0;
  double symmetry_residual = 0.0;   // max_s |Uhat(s) - Uhat(S-s)| / max|Uhat|
  double centreline_mid = 0.0;      // Uhat at s = S/2
  std::vector<std::pair<double, double>> profile;  // (s, Uhat)
};

inline Tp2Report run_tp2(double k_tilde, int n,
                         const MeshRatios& ratios = {1.0, 0.5, 0.5},
                         SolveMethod method = SolveMethod::kkt_direct,
                         RunOutput* keep = nullptr) {
  Tp2Problem prob;
  prob.k_tilde = k_tilde;
  RunOutput out = run_coupled(build_box_mesh(prob.l, n), {prob.segment()},
                              prob.spec(), ratios, method);
  Tp2Report rep;
  rep.k_tilde = k_tilde;
  rep.min_u = out.result.U.minCoeff();

  const auto& part = out.disc.parts_u[0];
  const Vec& uh = out.result.Uhat;
  const int nd = part.n_dofs();
  double umax = uh.cwiseAbs().maxCoeff();
  double sym = 0.0;
  for (int i = 0; i < nd; ++i) {
    rep.profile.emplace_back(part.nodes[i], uh[i]);
    sym = std::max(sym, std::abs(uh[i] - uh[nd - 1 - i]));
  }
  rep.symmetry_residual = umax > 0 ? sym / umax : 0.0;
  {
    const double mid = part.length() / 2;
    double v = 0.0;
    for (const auto& [k, val] : eval_basis_1d(part, mid)) v += uh[k] * val;
    rep.centreline_mid = v;
  }
  if (keep) *keep = std::move(out);
  return rep;
}

// ---------------------------------------------------------------------------
// Multiple intersecting inclusions
// ---------------------------------------------------------------------------

/// Deterministic 19-segment network meeting in 9 junction points: a vertical
/// trunk through the cube with two horizontal branches crossing it at nine
/// stations. Trunk dead ends reach the top and bottom faces.
inline std::vector<Segment> mi_default_segments(double l = 2.0,
                                                double radius = 0.01) {
  std::vector<Segment> segs;
  Segment trunk;
  trunk.a = Vec3(0, 0, -l / 2);
  trunk.b = Vec3(0, 0, l / 2);
  trunk.radius = radius;
  trunk.bc_a = EndpointBC::dirichlet(0.0);
  trunk.bc_b = EndpointBC::dirichlet(0.0);
  segs.push_back(trunk);
  const double reach = 0.35 * l;
  for (int k = 0; k < 9; ++k) {
    const double z = (-0.4 + 0.1 * k) * l;
    Segment bx;
    bx.a = Vec3(-reach, 0, z);
    bx.b = Vec3(reach, 0, z);
    bx.radius = radius;
    segs.push_back(bx);
    Segment by;
    by.a = Vec3(0, -reach, z);
    by.b = Vec3(0, reach, z);
    by.radius = radius;
    segs.push_back(by);
  }
  return segs;
}

inline ProblemSpec mi_spec(double k_tilde = 100.0, double g_bar = 3.14e-2) {
  ProblemSpec s;
  s.set_scalar_K(1.0);
  s.K_tilde = {k_tilde};
  s.f = [](const Vec3&) { return 0.0; };
  s.g_bar = {[g_bar](double) { return g_bar; }};
  const auto zero = [](const Vec3&) { return 0.0; };
  s.dirichlet_faces[FaceTag::lateral] = zero;
  s.dirichlet_faces[FaceTag::top] = zero;
  s.dirichlet_faces[FaceTag::bottom] = zero;
  return s;
}

struct MiResult {
  int n = 0;
  double h = 0.0;
  MeshRatios ratios;
  double delta_u_l2 = 0.0;
  double functional = 0.0;
};

inline MiResult run_mi(const std::vector<Segment>& segments, int n,
                       const MeshRatios& ratios,
                       SolveMethod method = SolveMethod::kkt_direct,
                       RunOutput* keep = nullptr) {
  RunOutput out =
      run_coupled(build_box_mesh(2.0, n), segments, mi_spec(), ratios, method);
  MiResult r;
  r.n = n;
  r.h = out.disc.mesh.h;
  r.ratios = ratios;
  r.functional = out.result.functional;
  r.delta_u_l2 = continuity_indicator(out.disc, out.blocks.dofs, out.result.U,
                                      out.result.Uhat);
  if (keep) *keep = std::move(out);
  return r;
}

// ---------------------------------------------------------------------------
// Conditioning sweep
// ---------------------------------------------------------------------------

struct CondRow {
  double delta_u = 0.0, delta_phi = 0.0, delta_psi = 0.0;
  double cond = 0.0;
};

/// cond(S) of the TP1 KKT system over a grid of 1D mesh ratios.
inline std::vector<CondRow> run_conditioning_sweep(
    int n, const std::vector<double>& delta_u_set,
    const std::vector<double>& sweep_values, bool sweep_phi,
    double fixed_other = 0.5, int dense_cap = 5000) {
  Tp1Problem prob;
  const TetMesh mesh = build_box_mesh(prob.l, n);
  std::vector<CondRow> rows;
  for (double du : delta_u_set) {
    for (double dv : sweep_values) {
      MeshRatios ratios;
      ratios.delta_u = du;
      ratios.delta_phi = sweep_phi ? dv : fixed_other;
      ratios.delta_psi = sweep_phi ? fixed_other : dv;
      const double split_tol = 1e-9 * mesh.edge_length;
      SegmentNetwork net = split_at_intersections({prob.segment()}, split_tol);
      Discretization disc = build_discretization(mesh, std::move(net), ratios);
      const CoupledBlocks blocks = assemble_all(disc, prob.spec());
      const ConstrainedSystem sys = apply_dirichlet(blocks, disc, prob.spec());
      const KKTSystem kkt = build_kkt_system(sys);
      rows.push_back(
          {du, ratios.delta_phi, ratios.delta_psi,
           estimate_condition(kkt.S, dense_cap)});
    }
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Config-driven problems
// ---------------------------------------------------------------------------

inline std::vector<Segment> segments_from_config(const RunConfig& cfg) {
  std::vector<Segment> segs;
  for (const auto& sc : cfg.segments) {
    Segment s;
    s.a = sc.a;
    s.b = sc.b;
    s.radius = sc.radius;
    s.bc_a = sc.bc_a;
    s.bc_b = sc.bc_b;
    segs.push_back(s);
  }
  return segs;
}

inline ProblemSpec problem_from_config(const RunConfig& cfg) {
  ProblemSpec spec;
  spec.set_scalar_K(cfg.k_bulk);
  spec.alpha = cfg.alpha;
  spec.alpha_hat = cfg.alpha_hat;
  for (const auto& sc : cfg.segments) {
    spec.K_tilde.push_back(sc.k_tilde);
    const double g = sc.g_bar;
    spec.g_bar.push_back([g](double) { return g; });
  }
  if (cfg.forcing == ForcingKind::tp1) {
    spec.f = Tp1Problem{}.spec().f;
  } else {
    const double v = cfg.forcing_value;
    spec.f = [v](const Vec3&) { return v; };
  }
  auto face = [&](FaceTag tag, const FaceBCConfig& bc) {
    switch (bc.kind) {
      case FaceBCConfig::Kind::neumann:
        return;
      case FaceBCConfig::Kind::dirichlet_tp1:
        spec.dirichlet_faces[tag] = Tp1Problem{}.exact3d().value;
        return;
      case FaceBCConfig::Kind::dirichlet_constant: {
        const double v = bc.value;
        spec.dirichlet_faces[tag] = [v](const Vec3&) { return v; };
        return;
      }
    }
  };
  face(FaceTag::lateral, cfg.lateral);
  face(FaceTag::top, cfg.top);
  face(FaceTag::bottom, cfg.bottom);
  return spec;
}

inline SolveMethod method_from_string(const std::string& m) {
  if (m == "kkt") return SolveMethod::kkt_direct;
  if (m == "reduced-cg") return SolveMethod::reduced_cg;
  if (m == "reduced-sd") return SolveMethod::reduced_sd;
  throw std::invalid_argument("unknown solver method '" + m + "'");
}

inline RunOutput run_from_config(const RunConfig& cfg) {
  const ProblemSpec spec = problem_from_config(cfg);
  if (cfg.alpha == 0.0 && cfg.alpha_hat == 0.0 && cfg.method != "kkt")
    std::cerr << "warning: alpha = alpha_hat = 0 with the reduced solver; the "
                 "subdomain operators may be singular without Dirichlet or "
                 "junction constraints\n";
  return run_coupled(build_box_mesh(cfg.edge, cfg.n), segments_from_config(cfg),
                     spec, cfg.ratios, method_from_string(cfg.method), cfg.tol,
                     cfg.max_iter);
}

}  // namespace trifield
