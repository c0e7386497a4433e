#pragma once

#include "trifield/assembly.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace trifield {

/// Shortest-round-trip-ish decimal formatting, stable across runs.
inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path())
    std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

/// Legacy ASCII VTK unstructured grid (cell type 10), optionally with one
/// scalar point field.
inline void export_vtk(const TetMesh& mesh, const Vec& U,
                       const std::filesystem::path& path,
                       const std::string& field_name = "U") {
  if (U.size() != 0 && U.size() != mesh.n_vertices())
    throw std::invalid_argument("export_vtk: field size mismatch");
  auto out = open_output(path);
  out << "# vtk DataFile Version 3.0\n";
  out << "trifield output\n";
  out << "ASCII\n";
  out << "DATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << mesh.n_vertices() << " double\n";
  for (const auto& v : mesh.vertices)
    out << fmt(v.x()) << " " << fmt(v.y()) << " " << fmt(v.z()) << "\n";
  out << "CELLS " << mesh.n_tets() << " " << 5 * mesh.n_tets() << "\n";
  for (const auto& t : mesh.tets)
    out << "4 " << t[0] << " " << t[1] << " " << t[2] << " " << t[3] << "\n";
  out << "CELL_TYPES " << mesh.n_tets() << "\n";
  for (int i = 0; i < mesh.n_tets(); ++i) out << "10\n";
  if (U.size() > 0) {
    out << "POINT_DATA " << mesh.n_vertices() << "\n";
    out << "SCALARS " << field_name << " double 1\n";
    out << "LOOKUP_TABLE default\n";
    for (int i = 0; i < U.size(); ++i) out << fmt(U[i]) << "\n";
  }
}

/// One CSV per subsegment with columns s,u_hat,phi,psi sampled at the u-hat
/// nodes.
inline void export_segments_csv(const Discretization& disc,
                                const DofLayout& layout, const Vec& Uhat,
                                const Vec& Phi, const Vec& Psi,
                                const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (int i = 0; i < disc.net.n_subsegments(); ++i) {
    const auto& pu = disc.parts_u[i];
    auto out = open_output(dir / ("seg_" + std::to_string(i) + ".csv"));
    out << "s,u_hat,phi,psi\n";
    for (int k = 0; k < pu.n_dofs(); ++k) {
      const double s = pu.nodes[k];
      double phi = 0.0, psi = 0.0;
      for (const auto& [l, v] : eval_basis_1d(disc.parts_phi[i], s))
        phi += Phi[layout.phi_dof(i, l)] * v;
      for (const auto& [l, v] : eval_basis_1d(disc.parts_psi[i], s))
        psi += Psi[layout.psi_dof(i, l)] * v;
      out << fmt(s) << "," << fmt(Uhat[layout.uhat_dof(i, k)]) << ","
          << fmt(phi) << "," << fmt(psi) << "\n";
    }
  }
}

/// MatrixMarket coordinate text dump.
inline void write_matrix_market(const SparseBlock& m,
                                const std::filesystem::path& path) {
  auto out = open_output(path);
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << m.rows() << " " << m.cols() << " " << m.nonZeros() << "\n";
  for (int k = 0; k < m.outerSize(); ++k)
    for (SparseBlock::InnerIterator it(m, k); it; ++it)
      out << it.row() + 1 << " " << it.col() + 1 << " " << fmt(it.value())
          << "\n";
}

/// Minimal CSV table writer: a header row plus numeric rows.
struct CsvTable {
  std::string header;
  std::vector<std::vector<double>> rows;

  void write(const std::filesystem::path& path) const {
    auto out = open_output(path);
    out << header << "\n";
    for (const auto& row : rows) {
      for (std::size_t i = 0; i < row.size(); ++i)
        out << (i ? "," : "") << fmt(row[i]);
      out << "\n";
    }
  }
};

}  // namespace trifield
