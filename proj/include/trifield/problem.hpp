#pragma once

#include "trifield/mesh3d.hpp"
#include "trifield/net1d.hpp"

#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <vector>

namespace trifield {

using ScalarField3D = std::function<double(const Vec3&)>;

/// Coefficients, forcings and boundary data of one coupled run.
struct ProblemSpec {
  Eigen::Matrix3d K = Eigen::Matrix3d::Identity();  // bulk diffusivity, SPD
  std::vector<double> K_tilde;   // per input segment; broadcast if size 1
  ScalarField3D f = [](const Vec3&) { return 0.0; };
  std::vector<std::function<double(double)>> g_bar;  // per input segment
  double alpha = 1.0;
  double alpha_hat = 1.0;

  // Dirichlet data per tagged face; untagged faces are homogeneous Neumann.
  std::map<FaceTag, ScalarField3D> dirichlet_faces;

  void set_scalar_K(double k) { K = k * Eigen::Matrix3d::Identity(); }

  double k_tilde_of(int segment) const {
    if (K_tilde.empty()) return 1.0;
    if (K_tilde.size() == 1) return K_tilde[0];
    return K_tilde.at(segment);
  }

  double g_bar_of(int segment, double s) const {
    if (g_bar.empty()) return 0.0;
    if (g_bar.size() == 1) return g_bar[0](s);
    return g_bar.at(segment)(s);
  }

  void validate() const {
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(K);
    if (es.eigenvalues().minCoeff() <= 0.0)
      throw std::invalid_argument("ProblemSpec: K must be positive definite");
    for (double kt : K_tilde)
      if (kt <= 0.0)
        throw std::invalid_argument("ProblemSpec: K_tilde must be positive");
    if (alpha < 0.0 || alpha_hat < 0.0)
      throw std::invalid_argument("ProblemSpec: alpha, alpha_hat must be >= 0");
  }
};

/// Mesh-ratio parameters of the three independent 1D meshes.
struct MeshRatios {
  double delta_u = 1.0;
  double delta_phi = 0.5;
  double delta_psi = 0.5;
};

/// Everything fixed once geometry and mesh ratios are chosen: the 3D mesh,
/// the split network, the induced partitions and the three 1D partitions per
/// subsegment.
struct Discretization {
  TetMesh mesh;
  SegmentNetwork net;
  std::vector<InducedPartition> induced;
  std::vector<Partition1D> parts_u;    // P1
  std::vector<Partition1D> parts_phi;  // P0
  std::vector<Partition1D> parts_psi;  // P1
  MeshRatios ratios;
};

inline Discretization build_discretization(TetMesh mesh, SegmentNetwork net,
                                           const MeshRatios& ratios) {
  Discretization d;
  d.mesh = std::move(mesh);
  d.net = std::move(net);
  d.ratios = ratios;
  const int n = d.net.n_subsegments();
  d.induced.reserve(n);
  for (int i = 0; i < n; ++i) {
    const auto& sub = d.net.subsegments[i];
    d.induced.push_back(locate_segment_breakpoints(d.mesh, sub.a, sub.b));
    const int m = d.induced.back().n_intervals();
    const double S = d.induced.back().length;
    d.parts_u.push_back(
        make_partition(S, m, ratios.delta_u, BasisKind::p1_linear, i));
    d.parts_phi.push_back(
        make_partition(S, m, ratios.delta_phi, BasisKind::p0_constant, i));
    d.parts_psi.push_back(
        make_partition(S, m, ratios.delta_psi, BasisKind::p1_linear, i));
  }
  return d;
}

}  // namespace trifield
