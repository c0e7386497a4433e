// Command-line driver: single solves from a config file plus the built-in
// experiments (convergence study, conditioning sweeps, multi-inclusion runs).

#include "trifield/experiments.hpp"
#include "trifield/io.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace trifield;

namespace {

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stoi(item));
  return out;
}

std::vector<double> parse_double_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
  return out;
}

void echo_config(const RunConfig& cfg, const fs::path& outdir) {
  fs::create_directories(outdir);
  save_config(cfg, outdir / "effective-config.cfg");
}

void write_results_csv(const RunOutput& out, const fs::path& outdir) {
  CsvTable t;
  t.header = "functional,iterations,constraint_residual,solve_seconds,delta_u_l2";
  double delta = std::numeric_limits<double>::quiet_NaN();
  if (out.disc.net.n_subsegments() > 0) {
    try {
      delta = continuity_indicator(out.disc, out.blocks.dofs, out.result.U,
                                   out.result.Uhat);
    } catch (const std::domain_error&) {
      // all-zero solution: indicator undefined, leave NaN
    }
  }
  t.rows.push_back({out.result.functional,
                    static_cast<double>(out.result.iterations),
                    out.result.constraint_residual, out.result.solve_seconds,
                    delta});
  t.write(outdir / "results.csv");

  CsvTable hist;
  hist.header = "iteration,residual,functional";
  for (std::size_t i = 0; i < out.result.functional_history.size(); ++i) {
    const double r = i < out.result.residual_history.size()
                         ? out.result.residual_history[i]
                         : 0.0;
    hist.rows.push_back({static_cast<double>(i), r,
                         out.result.functional_history[i]});
  }
  hist.write(outdir / "iterations.csv");
}

void write_fields(const RunOutput& out, const fs::path& outdir) {
  export_vtk(out.disc.mesh, out.result.U, outdir / "field.vtk");
  if (out.disc.net.n_subsegments() > 0)
    export_segments_csv(out.disc, out.blocks.dofs, out.result.Uhat,
                        out.result.Phi, out.result.Psi, outdir / "segments");
}

void dump_blocks(const RunOutput& out, const fs::path& dir) {
  fs::create_directories(dir);
  write_matrix_market(out.blocks.A, dir / "A.mtx");
  write_matrix_market(out.blocks.Ahat_star, dir / "Ahat_star.mtx");
  write_matrix_market(out.blocks.cpl.B, dir / "B.mtx");
  write_matrix_market(out.blocks.cpl.Bhat, dir / "Bhat.mtx");
  write_matrix_market(out.blocks.cpl.Calpha, dir / "Calpha.mtx");
  write_matrix_market(out.blocks.cpl.Chat_alpha, dir / "Chat_alpha.mtx");
  write_matrix_market(out.blocks.cpl.C, dir / "C.mtx");
  write_matrix_market(out.blocks.cpl.Chat, dir / "Chat.mtx");
  write_matrix_market(out.blocks.cpl.G, dir / "G.mtx");
  write_matrix_market(out.blocks.cpl.Ghat, dir / "Ghat.mtx");
  write_matrix_market(out.blocks.cpl.Gpsi, dir / "Gpsi.mtx");
  const KKTSystem kkt = build_kkt_system(out.sys);
  write_matrix_market(kkt.S, dir / "S.mtx");
}

int cmd_solve(const std::string& config_path, const std::string& outdir,
              const std::vector<std::string>& set, bool dump) {
  RunConfig cfg = config_path.empty() ? RunConfig{} : load_config(config_path);
  // flag overrides are section.key=value pairs, applied by reparse
  for (const auto& kv : set) {
    const auto dot = kv.find('.');
    const auto eq = kv.find('=');
    if (dot == std::string::npos || eq == std::string::npos || eq < dot)
      throw std::runtime_error("--set expects section.key=value, got " + kv);
    const std::string section = kv.substr(0, dot);
    if (section == "segment")
      throw std::runtime_error("--set cannot edit segment blocks");
    std::ostringstream patched;
    patched << serialize_config(cfg) << "\n[" << section << "]\n"
            << kv.substr(dot + 1, eq - dot - 1) << " = " << kv.substr(eq + 1)
            << "\n";
    cfg = parse_config(patched.str());
  }
  echo_config(cfg, outdir);
  RunOutput out = run_from_config(cfg);
  write_results_csv(out, outdir);
  write_fields(out, outdir);
  if (dump) dump_blocks(out, fs::path(outdir) / "blocks");
  std::cout << "functional " << out.result.functional << ", iterations "
            << out.result.iterations << ", constraint residual "
            << out.result.constraint_residual << "\n";
  return 0;
}

int cmd_tp1(const std::string& outdir, const std::string& meshes,
            const MeshRatios& ratios, const std::string& method) {
  const std::vector<int> ns = parse_int_list(meshes);
  const auto rows = run_tp1(ns, ratios, method_from_string(method));

  CsvTable t;
  t.header = "h,N3,Nhat,EL2,EH1,EhatL2,EhatH1,Jtilde,DeltaU";
  std::vector<double> hs, el2, eh1;
  for (const auto& r : rows) {
    t.rows.push_back({r.h, static_cast<double>(r.dofs3d),
                      static_cast<double>(r.dofs1d), r.e_l2, r.e_h1, r.ehat_l2,
                      r.ehat_h1, r.functional, r.delta_u_l2});
    hs.push_back(r.h);
    el2.push_back(r.e_l2);
    eh1.push_back(r.e_h1);
  }
  fs::create_directories(outdir);
  t.write(fs::path(outdir) / "convergence.csv");

  RunConfig cfg;
  cfg.n = ns.empty() ? 0 : ns.back();
  cfg.ratios = ratios;
  cfg.method = method;
  cfg.forcing = ForcingKind::tp1;
  cfg.lateral = {FaceBCConfig::Kind::dirichlet_tp1, 0.0};
  Tp1Problem prob;
  SegmentConfig seg;
  seg.a = prob.segment().a;
  seg.b = prob.segment().b;
  seg.radius = prob.r_check;
  seg.bc_a = seg.bc_b = EndpointBC::dirichlet(prob.k1);
  cfg.segments = {seg};
  echo_config(cfg, outdir);

  // fields on the finest mesh
  if (!ns.empty()) {
    RunOutput keep;
    tp1_single(prob, ns.back(), ratios, method_from_string(method), &keep);
    write_fields(keep, outdir);
  }

  if (rows.size() >= 2) {
    const double s2 = fit_convergence_slope(hs, el2);
    const double s1 = fit_convergence_slope(hs, eh1);
    std::cout << "fitted slopes: L2 " << s2 << ", H1 " << s1 << "\n";
  }
  for (const auto& r : rows)
    std::cout << "n=" << r.n << " h=" << r.h << " EL2=" << r.e_l2
              << " EH1=" << r.e_h1 << " EhatL2=" << r.ehat_l2
              << " EhatH1=" << r.ehat_h1 << " J=" << r.functional << "\n";
  return 0;
}

int cmd_tp2(const std::string& outdir, int n, const std::string& ktilde_list,
            const MeshRatios& ratios, const std::string& method) {
  const std::vector<double> kts = parse_double_list(ktilde_list);
  fs::create_directories(outdir);
  CsvTable report;
  report.header = "k_tilde,min_U,symmetry_residual,centreline_mid";
  for (double kt : kts) {
    RunOutput keep;
    const Tp2Report rep = run_tp2(kt, n, ratios, method_from_string(method), &keep);
    report.rows.push_back(
        {kt, rep.min_u, rep.symmetry_residual, rep.centreline_mid});
    CsvTable profile;
    profile.header = "s,u_hat";
    for (const auto& [s, v] : rep.profile) profile.rows.push_back({s, v});
    std::ostringstream name;
    name << "centreline_k" << kt << ".csv";
    profile.write(fs::path(outdir) / name.str());
    std::ostringstream vtk;
    vtk << "field_k" << kt << ".vtk";
    export_vtk(keep.disc.mesh, keep.result.U, fs::path(outdir) / vtk.str());
    std::cout << "k_tilde=" << kt << " min(U)=" << rep.min_u
              << " symmetry=" << rep.symmetry_residual
              << " Uhat(S/2)=" << rep.centreline_mid << "\n";
  }
  report.write(fs::path(outdir) / "results.csv");
  return 0;
}

int cmd_mi(const std::string& outdir, const std::string& network_path,
           const std::string& n_list, const std::string& delta_u_list,
           bool sweep_deltas, const MeshRatios& ratios,
           const std::string& method) {
  std::vector<Segment> segments;
  if (!network_path.empty()) {
    const RunConfig netcfg = load_config(network_path);
    segments = segments_from_config(netcfg);
  } else {
    segments = mi_default_segments();
  }
  if (segments.size() != 19)
    std::cerr << "warning: network has " << segments.size()
              << " segments (19 expected)\n";
  const SegmentNetwork probe = split_at_intersections(segments, 1e-9 * 2.0);
  std::cout << "network: " << segments.size() << " segments, "
            << probe.junctions.size() << " junctions, "
            << probe.n_subsegments() << " subsegments\n";

  fs::create_directories(outdir);
  const SolveMethod m = method_from_string(method);

  // mesh refinement study at fixed ratios
  CsvTable href;
  href.header = "n,h,delta_u,delta_phi,delta_psi,DeltaU,Jtilde";
  for (int n : parse_int_list(n_list)) {
    const MiResult r = run_mi(segments, n, ratios, m);
    href.rows.push_back({static_cast<double>(r.n), r.h, r.ratios.delta_u,
                         r.ratios.delta_phi, r.ratios.delta_psi, r.delta_u_l2,
                         r.functional});
    std::cout << "n=" << r.n << " h=" << r.h << " DeltaU=" << r.delta_u_l2
              << "\n";
  }
  href.write(fs::path(outdir) / "h_refinement.csv");

  // delta_u sensitivity at the coarsest mesh of the list
  const std::vector<int> ns = parse_int_list(n_list);
  const int n_fix = ns.empty() ? 6 : ns.front();
  CsvTable dures;
  dures.header = "n,h,delta_u,delta_phi,delta_psi,DeltaU,Jtilde";
  for (double du : parse_double_list(delta_u_list)) {
    MeshRatios r = ratios;
    r.delta_u = du;
    const MiResult res = run_mi(segments, n_fix, r, m);
    dures.rows.push_back({static_cast<double>(res.n), res.h, du,
                          r.delta_phi, r.delta_psi, res.delta_u_l2,
                          res.functional});
  }
  dures.write(fs::path(outdir) / "delta_u_sweep.csv");

  if (sweep_deltas) {
    CsvTable sweep;
    sweep.header = "n,h,delta_u,delta_phi,delta_psi,DeltaU,Jtilde";
    for (double dphi : {0.1, 0.25, 0.5, 0.75, 1.0})
      for (double dpsi : {0.1, 0.25, 0.5, 0.75, 1.0}) {
        MeshRatios r = ratios;
        r.delta_phi = dphi;
        r.delta_psi = dpsi;
        const MiResult res = run_mi(segments, n_fix, r, m);
        sweep.rows.push_back({static_cast<double>(res.n), res.h, r.delta_u,
                              dphi, dpsi, res.delta_u_l2, res.functional});
      }
    sweep.write(fs::path(outdir) / "delta_phi_psi_sweep.csv");
  }

  // fields at the finest mesh of the list
  if (!ns.empty()) {
    RunOutput keep;
    run_mi(segments, ns.back(), ratios, m, &keep);
    write_fields(keep, outdir);
  }
  return 0;
}

int cmd_cond_sweep(const std::string& outdir, int n, const std::string& sweep,
                   const std::string& delta_u_set, const std::string& range,
                   int dense_cap) {
  std::vector<double> sweep_values;
  {
    // range syntax lo:hi:count
    const auto c1 = range.find(':');
    const auto c2 = range.find(':', c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos)
      throw std::runtime_error("--range expects lo:hi:count");
    const double lo = std::stod(range.substr(0, c1));
    const double hi = std::stod(range.substr(c1 + 1, c2 - c1 - 1));
    const int count = std::stoi(range.substr(c2 + 1));
    for (int i = 0; i < count; ++i)
      sweep_values.push_back(count == 1 ? lo
                                        : lo + (hi - lo) * i / (count - 1));
  }
  const bool sweep_phi = sweep == "phi";
  if (!sweep_phi && sweep != "psi")
    throw std::runtime_error("--sweep expects phi or psi");
  const auto rows = run_conditioning_sweep(n, parse_double_list(delta_u_set),
                                           sweep_values, sweep_phi, 0.5,
                                           dense_cap);
  CsvTable t;
  t.header = "delta_u,delta_phi,delta_psi,cond";
  for (const auto& r : rows) {
    t.rows.push_back({r.delta_u, r.delta_phi, r.delta_psi, r.cond});
    std::cout << "delta_u=" << r.delta_u << " delta_phi=" << r.delta_phi
              << " delta_psi=" << r.delta_psi << " cond=" << r.cond << "\n";
  }
  fs::create_directories(outdir);
  t.write(fs::path(outdir) / "conditioning.csv");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"coupled 3D-1D elliptic solver"};
  app.require_subcommand(1);

  std::string outdir;
  std::string config_path;
  std::vector<std::string> sets;
  bool dump = false;
  MeshRatios ratios;
  std::string method = "kkt";

  auto* solve_cmd = app.add_subcommand("solve", "run one configured problem");
  solve_cmd->add_option("--config", config_path, "config file");
  solve_cmd->add_option("-o,--output-dir", outdir, "output directory")->required();
  solve_cmd->add_option("--set", sets,
                        "override a config key, e.g. --set solver.method=reduced-cg");
  solve_cmd->add_flag("--dump-blocks", dump, "write assembled blocks (MatrixMarket)");

  std::string meshes = "6,8,12,16";
  auto* tp1_cmd = app.add_subcommand("tp1", "convergence study on the radial test problem");
  tp1_cmd->add_option("-o,--output-dir", outdir, "output directory")->required();
  tp1_cmd->add_option("--meshes", meshes, "comma list of subdivisions");
  tp1_cmd->add_option("--delta-u", ratios.delta_u, "u-hat mesh ratio");
  tp1_cmd->add_option("--delta-phi", ratios.delta_phi, "phi mesh ratio");
  tp1_cmd->add_option("--delta-psi", ratios.delta_psi, "psi mesh ratio");
  tp1_cmd->add_option("--method", method, "kkt | reduced-cg | reduced-sd");

  int n = 8;
  std::string ktilde = "1,100,1e5";
  auto* tp2_cmd = app.add_subcommand("tp2", "unit-forcing problem, property report");
  tp2_cmd->add_option("-o,--output-dir", outdir, "output directory")->required();
  tp2_cmd->add_option("--n", n, "mesh subdivisions");
  tp2_cmd->add_option("--ktilde", ktilde, "comma list of inclusion diffusivities");
  tp2_cmd->add_option("--delta-u", ratios.delta_u, "u-hat mesh ratio");
  tp2_cmd->add_option("--delta-phi", ratios.delta_phi, "phi mesh ratio");
  tp2_cmd->add_option("--delta-psi", ratios.delta_psi, "psi mesh ratio");
  tp2_cmd->add_option("--method", method, "kkt | reduced-cg | reduced-sd");

  std::string network_path = std::string(TRIFIELD_CONFIG_DIR) + "/mi_network.cfg";
  std::string n_list = "4,6,8";
  std::string delta_u_list = "0.6,1.0,1.4,2.0";
  bool sweep_deltas = false;
  auto* mi_cmd = app.add_subcommand("mi", "multiple intersecting inclusions");
  mi_cmd->add_option("-o,--output-dir", outdir, "output directory")->required();
  mi_cmd->add_option("--network", network_path, "network config file");
  mi_cmd->add_option("--n-list", n_list, "mesh subdivisions for the h study");
  mi_cmd->add_option("--delta-u-list", delta_u_list, "delta_u values");
  mi_cmd->add_flag("--sweep-deltas", sweep_deltas, "also sweep delta_phi x delta_psi");
  mi_cmd->add_option("--delta-u", ratios.delta_u, "base u-hat mesh ratio");
  mi_cmd->add_option("--delta-phi", ratios.delta_phi, "base phi mesh ratio");
  mi_cmd->add_option("--delta-psi", ratios.delta_psi, "base psi mesh ratio");
  mi_cmd->add_option("--method", method, "kkt | reduced-cg | reduced-sd");

  std::string sweep = "phi";
  std::string delta_u_set = "0.6,0.8,1.0,1.2,1.4";
  std::string range = "0.1:1.0:10";
  int dense_cap = 5000;
  auto* cond_cmd = app.add_subcommand("cond-sweep", "KKT conditioning sweep");
  cond_cmd->add_option("-o,--output-dir", outdir, "output directory")->required();
  cond_cmd->add_option("--n", n, "mesh subdivisions");
  cond_cmd->add_option("--sweep", sweep, "phi | psi");
  cond_cmd->add_option("--delta-u-set", delta_u_set, "comma list of delta_u");
  cond_cmd->add_option("--range", range, "sweep range lo:hi:count");
  cond_cmd->add_option("--dense-cap", dense_cap, "max dense dimension");

  CLI11_PARSE(app, argc, argv);

  try {
    if (solve_cmd->parsed()) return cmd_solve(config_path, outdir, sets, dump);
    if (tp1_cmd->parsed()) return cmd_tp1(outdir, meshes, ratios, method);
    if (tp2_cmd->parsed()) return cmd_tp2(outdir, n, ktilde, ratios, method);
    if (mi_cmd->parsed())
      return cmd_mi(outdir, network_path, n_list, delta_u_list, sweep_deltas,
                    ratios, method);
    if (cond_cmd->parsed())
      return cmd_cond_sweep(outdir, n, sweep, delta_u_set, range, dense_cap);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
