#include "trifield/assembly.hpp"

#include <catch2/catch_amalgamated.hpp>

#include "test_support.hpp"

#include <Eigen/Dense>

#include <set>

using namespace trifield;

namespace {

/// Single fabricated subsegment of given length, outside any mesh.
Discretization line_only_disc(double length, double radius, int u_elems,
                              int phi_elems, int psi_elems) {
  Discretization d;
  SubSegment sub;
  sub.a = Vec3(0, 0, 0);
  sub.b = Vec3(0, 0, length);
  sub.radius = radius;
  sub.parent = 0;
  sub.parent_s1 = length;
  d.net.segments.resize(1);
  d.net.segments[0].a = sub.a;
  d.net.segments[0].b = sub.b;
  d.net.segments[0].radius = radius;
  d.net.subsegments.push_back(sub);
  d.parts_u.push_back(make_partition(length, u_elems, 1.0, BasisKind::p1_linear, 0));
  d.parts_phi.push_back(make_partition(length, phi_elems, 1.0, BasisKind::p0_constant, 0));
  d.parts_psi.push_back(make_partition(length, psi_elems, 1.0, BasisKind::p1_linear, 0));
  InducedPartition ind;
  ind.length = length;
  ind.breakpoints = {0.0, length};
  ind.interval_tets = {0};
  d.induced.push_back(ind);
  return d;
}

Discretization discretize(const testref::RandomProblem& p) {
  SegmentNetwork net =
      split_at_intersections(p.segments, 1e-9 * p.mesh.edge_length);
  return build_discretization(p.mesh, std::move(net), p.ratios);
}

}  // namespace

TEST_CASE("1D stiffness and mass on a unit element match the closed forms") {
  // K_tilde |Sigma| = 1 with alpha_hat = 0: pure P1 stiffness
  {
    const double radius = 1.0 / std::sqrt(M_PI);  // |Sigma| = 1
    Discretization d = line_only_disc(1.0, radius, 1, 1, 1);
    ProblemSpec spec;
    spec.K_tilde = {1.0};
    spec.alpha_hat = 0.0;
    const DofLayout layout = build_dof_layout(d);
    const Eigen::MatrixXd ahat =
        Eigen::MatrixXd(assemble_Ahat(d, spec, layout));
    Eigen::MatrixXd want(2, 2);
    want << 1, -1, -1, 1;
    REQUIRE((ahat - want).cwiseAbs().maxCoeff() < 1e-14);
  }
  // adding alpha_hat = 1 with |Gamma| = 1 adds the P1 mass matrix
  {
    const double radius = 1.0 / (2.0 * M_PI);  // |Gamma| = 1
    Discretization d = line_only_disc(1.0, radius, 1, 1, 1);
    ProblemSpec spec;
    spec.K_tilde = {1.0};
    const DofLayout layout = build_dof_layout(d);
    ProblemSpec spec0 = spec;
    spec0.alpha_hat = 0.0;
    spec.alpha_hat = 1.0;
    const Eigen::MatrixXd added =
        Eigen::MatrixXd(assemble_Ahat(d, spec, layout)) -
        Eigen::MatrixXd(assemble_Ahat(d, spec0, layout));
    Eigen::MatrixXd want(2, 2);
    want << 1.0 / 3, 1.0 / 6, 1.0 / 6, 1.0 / 3;
    REQUIRE((added - want).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("single-element couplings match the closed forms") {
  const double radius = 1.0 / (2.0 * M_PI);  // |Gamma| = 1
  // place the segment inside one tet of a real mesh so traces exist
  TetMesh mesh = build_box_mesh(4.0, 1);
  Discretization d = line_only_disc(1.0, radius, 1, 1, 1);
  d.mesh = mesh;
  d.net.subsegments[0].a = Vec3(0.1, 0.2, 0.3);
  d.net.subsegments[0].b = Vec3(0.1, 0.2, 1.3);
  d.induced[0] = locate_segment_breakpoints(d.mesh, d.net.subsegments[0].a,
                                            d.net.subsegments[0].b);
  REQUIRE(d.induced[0].n_intervals() == 1);
  ProblemSpec spec;
  spec.K_tilde = {1.0};
  const DofLayout layout = build_dof_layout(d);
  const CouplingBlocks cpl = assemble_coupling(d, spec, layout);

  // Bhat column: integral of each unit hat against the single box, |Gamma|=1
  const Eigen::MatrixXd bhat = Eigen::MatrixXd(cpl.Bhat);
  REQUIRE(bhat.rows() == 2);
  REQUIRE(bhat.cols() == 1);
  REQUIRE(bhat(0, 0) == Catch::Approx(0.5).margin(1e-14));
  REQUIRE(bhat(1, 0) == Catch::Approx(0.5).margin(1e-14));

  // Ghat: plain P1 mass on the unit element, no perimeter weight
  const Eigen::MatrixXd ghat = Eigen::MatrixXd(cpl.Ghat);
  Eigen::MatrixXd want(2, 2);
  want << 1.0 / 3, 1.0 / 6, 1.0 / 6, 1.0 / 3;
  REQUIRE((ghat - want).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("bulk stiffness with alpha = 0 is the P1 stiffness") {
  TetMesh m;
  m.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1)};
  m.tets = {{0, 1, 2, 3}};
  m.h = std::sqrt(2.0);
  m.edge_length = 1.0;
  Discretization d;
  d.mesh = m;
  ProblemSpec spec;
  spec.alpha = 0.0;
  const Eigen::MatrixXd a = Eigen::MatrixXd(assemble_A(d, spec));
  // reference-element stiffness: grad lambda_0 = (-1,-1,-1), e_i otherwise
  Eigen::MatrixXd g(4, 3);
  g << -1, -1, -1, 1, 0, 0, 0, 1, 0, 0, 0, 1;
  const Eigen::MatrixXd want = (1.0 / 6.0) * g * g.transpose();
  REQUIRE((a - want).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("trace stabilization row sum integrates the perimeter exactly") {
  const testref::RandomProblem p = testref::random_problem(42u, 2);
  Discretization d = discretize(p);
  ProblemSpec s1 = p.spec;
  s1.alpha = 1.0;
  ProblemSpec s0 = p.spec;
  s0.alpha = 0.0;
  const SparseBlock diff = assemble_A(d, s1) - assemble_A(d, s0);
  double sum = 0.0;
  for (int k = 0; k < diff.outerSize(); ++k)
    for (SparseBlock::InnerIterator it(diff, k); it; ++it) sum += it.value();
  double want = 0.0;
  for (const auto& sub : d.net.subsegments)
    want += sub.section_perimeter() * sub.length();
  REQUIRE(sum == Catch::Approx(want).epsilon(1e-12));
}

TEST_CASE("junction constraints form a chained star per junction") {
  testref::RandomProblem p = testref::random_problem(7u, 2, /*with_crossing=*/true);
  Discretization d = discretize(p);
  REQUIRE(!d.net.junctions.empty());
  const DofLayout layout = build_dof_layout(d);
  const SparseBlock Q = build_junction_constraints(d, layout);
  int expected_rows = 0;
  for (const auto& j : d.net.junctions)
    expected_rows += static_cast<int>(j.incidences.size()) - 1;
  REQUIRE(Q.rows() == expected_rows);
  for (int k = 0; k < Q.outerSize(); ++k)
    for (SparseBlock::InnerIterator it(Q, k); it; ++it)
      REQUIRE(std::abs(std::abs(it.value()) - 1.0) < 1e-15);
  // each row has exactly a +1 and a -1
  Eigen::VectorXd row_sum = Q * Vec::Ones(Q.cols());
  REQUIRE(row_sum.cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("X-crossing yields three junction rows") {
  Segment s1, s2;
  s1.a = Vec3(-0.8, 0, 0);
  s1.b = Vec3(0.8, 0, 0);
  s2.a = Vec3(0, -0.8, 0);
  s2.b = Vec3(0, 0.8, 0);
  s1.radius = s2.radius = 0.01;
  SegmentNetwork net = split_at_intersections({s1, s2}, 1e-9 * 2.0);
  Discretization d =
      build_discretization(build_box_mesh(2.0, 2), std::move(net), {});
  const DofLayout layout = build_dof_layout(d);
  const SparseBlock Q = build_junction_constraints(d, layout);
  REQUIRE(Q.rows() == 3);
}

TEST_CASE("coupling entries match a dense composite-Simpson reference") {
  for (unsigned seed : {1u, 2u, 3u}) {
    const testref::RandomProblem p = testref::random_problem(seed, 2, seed % 2 == 0);
    Discretization d = discretize(p);
    const DofLayout layout = build_dof_layout(d);
    const CouplingBlocks cpl = assemble_coupling(d, p.spec, layout);

    for (int i = 0; i < d.net.n_subsegments(); ++i) {
      const auto& sub = d.net.subsegments[i];
      const Vec3 dir = (sub.b - sub.a) / sub.length();
      const double gamma = sub.section_perimeter();
      const auto& pu = d.parts_u[i];
      const auto& pphi = d.parts_phi[i];
      const auto& ppsi = d.parts_psi[i];
      const std::vector<std::vector<double>> sets = {
          d.induced[i].breakpoints, pu.nodes, pphi.nodes, ppsi.nodes};

      // one u-hat x phi entry and one u-hat x psi entry per subsegment
      const int ku = pu.n_dofs() / 2;
      const int kphi = 0;
      const int kpsi = ppsi.n_dofs() / 2;
      const double bhat_entry = testref::simpson_on_merged(
          sets, [&](double s) {
            return gamma * testref::hat_value(pu.nodes, ku, s) *
                   testref::box_value(pphi.nodes, kphi, s);
          });
      REQUIRE(cpl.Bhat.coeff(layout.uhat_dof(i, ku), layout.phi_dof(i, kphi)) ==
              Catch::Approx(bhat_entry).margin(1e-12));

      const double chat_entry = testref::simpson_on_merged(
          sets, [&](double s) {
            return testref::hat_value(pu.nodes, ku, s) *
                   testref::hat_value(ppsi.nodes, kpsi, s);
          });
      REQUIRE(cpl.Chat.coeff(layout.uhat_dof(i, ku), layout.psi_dof(i, kpsi)) ==
              Catch::Approx(chat_entry).margin(1e-12));

      // a 3D-trace x phi entry: pick a vertex of the first crossed tet
      const int tet = d.induced[i].interval_tets.front();
      const int k3 = d.mesh.tets[tet][0];
      const double b_entry = testref::simpson_on_merged(
          sets, [&](double s) {
            const Vec3 q = sub.a + s * dir;
            const int tt = testref::locate_tet(d.mesh, q);
            const Eigen::Vector4d bb =
                testref::bary_direct(d.mesh.tet_vertices(tt), q);
            double phi_k = 0.0;
            for (int a = 0; a < 4; ++a)
              if (d.mesh.tets[tt][a] == k3) phi_k = bb[a];
            return gamma * phi_k * testref::box_value(pphi.nodes, kphi, s);
          });
      REQUIRE(cpl.B.coeff(k3, layout.phi_dof(i, kphi)) ==
              Catch::Approx(b_entry).margin(1e-12));
    }
  }
}

TEST_CASE("B row sums integrate the trace against the perimeter") {
  const testref::RandomProblem p = testref::random_problem(5u, 2);
  Discretization d = discretize(p);
  const DofLayout layout = build_dof_layout(d);
  const CouplingBlocks cpl = assemble_coupling(d, p.spec, layout);
  const Vec row_sums = cpl.B * Vec::Ones(layout.n_phi);

  // reference: 2 pi R int trace(phi_k) ds summed over subsegments
  Vec want = Vec::Zero(layout.n3d);
  for (int i = 0; i < d.net.n_subsegments(); ++i) {
    const auto& sub = d.net.subsegments[i];
    const Vec3 dir = (sub.b - sub.a) / sub.length();
    for (int k = 0; k < layout.n3d; ++k) {
      // only vertices of crossed tets can have support on the segment
      bool near = false;
      for (int tet : d.induced[i].interval_tets)
        for (int a = 0; a < 4; ++a)
          if (d.mesh.tets[tet][a] == k) near = true;
      if (!near) continue;
      want[k] += sub.section_perimeter() *
                 testref::simpson_on_merged(
                     {d.induced[i].breakpoints}, [&](double s) {
                       const Vec3 q = sub.a + s * dir;
                       const int tt = testref::locate_tet(d.mesh, q);
                       const Eigen::Vector4d bb =
                           testref::bary_direct(d.mesh.tet_vertices(tt), q);
                       double v = 0.0;
                       for (int a = 0; a < 4; ++a)
                         if (d.mesh.tets[tt][a] == k) v = bb[a];
                       return v;
                     });
    }
  }
  REQUIRE((row_sums - want).cwiseAbs().maxCoeff() < 1e-11);
}

TEST_CASE("segments away from a basis function leave its B row empty") {
  const testref::RandomProblem p = testref::random_problem(9u, 3);
  Discretization d = discretize(p);
  const DofLayout layout = build_dof_layout(d);
  const CouplingBlocks cpl = assemble_coupling(d, p.spec, layout);
  std::set<int> crossed;
  for (int i = 0; i < d.net.n_subsegments(); ++i)
    for (int tet : d.induced[i].interval_tets)
      for (int a = 0; a < 4; ++a) crossed.insert(d.mesh.tets[tet][a]);
  const Eigen::MatrixXd bd = Eigen::MatrixXd(cpl.B);
  for (int k = 0; k < layout.n3d; ++k)
    if (!crossed.count(k)) REQUIRE(bd.row(k).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("assembled blocks are symmetric where required") {
  const testref::RandomProblem p = testref::random_problem(12u, 2, true);
  Discretization d = discretize(p);
  const CoupledBlocks blocks = assemble_all(d, p.spec);
  REQUIRE(symmetry_error(blocks.A) <= 1e-12 * max_abs(blocks.A));
  REQUIRE(symmetry_error(blocks.Ahat) <= 1e-12 * max_abs(blocks.Ahat));
  REQUIRE(symmetry_error(blocks.Ahat_star) <= 1e-12 * max_abs(blocks.Ahat_star));
  REQUIRE(symmetry_error(blocks.cpl.G) <= 1e-12 * max_abs(blocks.cpl.G));
  REQUIRE(symmetry_error(blocks.cpl.Ghat) <= 1e-12 * max_abs(blocks.cpl.Ghat));
  REQUIRE(symmetry_error(blocks.cpl.Gpsi) <= 1e-12 * max_abs(blocks.cpl.Gpsi));
}

TEST_CASE("functional blocks are positive semi-definite, Gpsi definite") {
  const testref::RandomProblem p = testref::random_problem(21u, 2);
  Discretization d = discretize(p);
  const CoupledBlocks blocks = assemble_all(d, p.spec);
  const auto eig_min = [](const SparseBlock& m) {
    const Eigen::MatrixXd dense = Eigen::MatrixXd(m);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(dense);
    return es.eigenvalues().minCoeff();
  };
  REQUIRE(eig_min(blocks.cpl.G) >= -1e-12);
  REQUIRE(eig_min(blocks.cpl.Ghat) >= -1e-12);
  REQUIRE(eig_min(blocks.cpl.Gpsi) > 0.0);
}

TEST_CASE("load vector of a constant forcing integrates the volume") {
  const TetMesh mesh = build_box_mesh(2.0, 2);
  Discretization d;
  d.mesh = mesh;
  ProblemSpec spec;
  spec.f = [](const Vec3&) { return 1.0; };
  const DofLayout layout = build_dof_layout(d);
  auto [f, g] = assemble_rhs(d, spec, layout);
  REQUIRE(f.sum() == Catch::Approx(8.0).epsilon(1e-13));
  REQUIRE(g.size() == 0);

  spec.f = [](const Vec3&) { return 0.0; };
  auto [f0, g0] = assemble_rhs(d, spec, layout);
  REQUIRE(f0.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("segment load totals |Sigma| g_bar length") {
  // one segment of length 2 with g_bar = 3.14e-2 and radius 1e-2
  Segment s;
  s.a = Vec3(0, 0, -1);
  s.b = Vec3(0, 0, 1);
  s.radius = 0.01;
  SegmentNetwork net = split_at_intersections({s}, 1e-9 * 2.0);
  Discretization d =
      build_discretization(build_box_mesh(2.0, 2), std::move(net), {});
  ProblemSpec spec;
  spec.K_tilde = {100.0};
  spec.g_bar = {[](double) { return 3.14e-2; }};
  const DofLayout layout = build_dof_layout(d);
  auto [f, g] = assemble_rhs(d, spec, layout);
  REQUIRE(g.sum() ==
          Catch::Approx(3.14e-2 * M_PI * 1e-4 * 2.0).epsilon(1e-12));
}

TEST_CASE("bulk operator is positive definite after elimination") {
  Tp1Problem prob;
  const ProblemSpec spec = prob.spec();
  SegmentNetwork net =
      split_at_intersections({prob.segment()}, 1e-9 * 2.0);
  Discretization d =
      build_discretization(build_box_mesh(2.0, 2), std::move(net), {});
  const CoupledBlocks blocks = assemble_all(d, spec);
  const ConstrainedSystem sys = apply_dirichlet(blocks, d, spec);
  const Eigen::MatrixXd dense_a = Eigen::MatrixXd(sys.A);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(dense_a);
  REQUIRE(es.eigenvalues().minCoeff() > 0.0);
}

TEST_CASE("Dirichlet endpoints of the test problem are pinned to k1") {
  Tp1Problem prob;
  const ProblemSpec spec = prob.spec();
  SegmentNetwork net = split_at_intersections({prob.segment()}, 1e-9 * 2.0);
  Discretization d =
      build_discretization(build_box_mesh(2.0, 2), std::move(net), {});
  const DofLayout layout = build_dof_layout(d);
  const BoundaryConditions bc = identify_bcs(d, spec, layout);
  const int first = layout.uhat_dof(0, 0);
  const int last = layout.uhat_dof(0, d.parts_u[0].n_dofs() - 1);
  REQUIRE(bc.fixed1d[first] == 1);
  REQUIRE(bc.fixed1d[last] == 1);
  REQUIRE(bc.values1d[first] == Catch::Approx(0.5));
  REQUIRE(bc.values1d[last] == Catch::Approx(0.5));
  int n_fixed = 0;
  for (char c : bc.fixed1d) n_fixed += c;
  REQUIRE(n_fixed == 2);
}

TEST_CASE("conflicting Dirichlet data is rejected") {
  // two Dirichlet faces meeting at an edge with different constants
  const TetMesh mesh = build_box_mesh(2.0, 2);
  Discretization d;
  d.mesh = mesh;
  ProblemSpec spec;
  spec.dirichlet_faces[FaceTag::top] = [](const Vec3&) { return 1.0; };
  spec.dirichlet_faces[FaceTag::lateral] = [](const Vec3&) { return 0.0; };
  const DofLayout layout = build_dof_layout(d);
  REQUIRE_THROWS_AS(identify_bcs(d, spec, layout), std::runtime_error);
}
