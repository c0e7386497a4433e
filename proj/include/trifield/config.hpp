#pragma once

#include "trifield/net1d.hpp"
#include "trifield/problem.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace trifield {

enum class ForcingKind { constant, tp1 };

struct FaceBCConfig {
  enum class Kind { neumann, dirichlet_constant, dirichlet_tp1 };
  Kind kind = Kind::neumann;
  double value = 0.0;
};

struct SegmentConfig {
  Vec3 a = Vec3::Zero(), b = Vec3::Zero();
  double radius = 0.01;
  double k_tilde = 1.0;
  double g_bar = 0.0;
  EndpointBC bc_a, bc_b;
};

/// One run, fully defaulted: geometry, coefficients, mesh ratios, solver
/// choice and boundary conditions.
struct RunConfig {
  double edge = 2.0;
  int n = 8;
  double k_bulk = 1.0;
  double alpha = 1.0;
  double alpha_hat = 1.0;
  ForcingKind forcing = ForcingKind::constant;
  double forcing_value = 0.0;
  MeshRatios ratios{1.0, 0.5, 0.5};
  std::string method = "kkt";  // kkt | reduced-cg | reduced-sd
  double tol = 1e-10;
  int max_iter = 0;
  FaceBCConfig lateral, top, bottom;
  std::vector<SegmentConfig> segments;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> tokens(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  std::string t;
  while (in >> t) out.push_back(t);
  return out;
}

inline double to_double(const std::string& s, const std::string& key) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("config: bad number '" + s + "' for " + key);
  }
}

inline Vec3 to_vec3(const std::string& s, const std::string& key) {
  const auto t = tokens(s);
  if (t.size() != 3)
    throw std::runtime_error("config: expected three coordinates for " + key);
  return {to_double(t[0], key), to_double(t[1], key), to_double(t[2], key)};
}

inline EndpointBC to_endpoint_bc(const std::string& s, const std::string& key) {
  const auto t = tokens(s);
  if (t.size() == 1 && t[0] == "neumann") return EndpointBC::neumann();
  if (t.size() == 2 && t[0] == "dirichlet")
    return EndpointBC::dirichlet(to_double(t[1], key));
  throw std::runtime_error("config: bad endpoint condition '" + s + "' for " +
                           key);
}

inline FaceBCConfig to_face_bc(const std::string& s, const std::string& key) {
  const auto t = tokens(s);
  FaceBCConfig bc;
  if (t.size() == 1 && t[0] == "neumann") return bc;
  if (t.size() == 2 && t[0] == "dirichlet") {
    if (t[1] == "tp1") {
      bc.kind = FaceBCConfig::Kind::dirichlet_tp1;
    } else {
      bc.kind = FaceBCConfig::Kind::dirichlet_constant;
      bc.value = to_double(t[1], key);
    }
    return bc;
  }
  throw std::runtime_error("config: bad face condition '" + s + "' for " + key);
}

}  // namespace detail

inline RunConfig parse_config(const std::string& text) {
  RunConfig cfg;
  std::string section;
  SegmentConfig* seg = nullptr;

  std::istringstream in(text);
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string line = raw;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;

    if (line.front() == '[' && line.back() == ']') {
      section = detail::trim(line.substr(1, line.size() - 2));
      if (section == "segment") {
        cfg.segments.emplace_back();
        seg = &cfg.segments.back();
      }
      continue;
    }

    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config: line " + std::to_string(lineno) +
                               " is not 'key = value'");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    const std::string qual = section + "." + key;

    if (section == "mesh") {
      if (key == "edge") cfg.edge = detail::to_double(value, qual);
      else if (key == "n") cfg.n = static_cast<int>(detail::to_double(value, qual));
      else throw std::runtime_error("config: unknown key " + qual);
    } else if (section == "problem") {
      if (key == "k") cfg.k_bulk = detail::to_double(value, qual);
      else if (key == "alpha") cfg.alpha = detail::to_double(value, qual);
      else if (key == "alpha_hat") cfg.alpha_hat = detail::to_double(value, qual);
      else if (key == "f") {
        const auto t = detail::tokens(value);
        if (t.size() == 1 && t[0] == "tp1") {
          cfg.forcing = ForcingKind::tp1;
        } else if (t.size() == 2 && t[0] == "constant") {
          cfg.forcing = ForcingKind::constant;
          cfg.forcing_value = detail::to_double(t[1], qual);
        } else {
          throw std::runtime_error("config: bad forcing '" + value + "'");
        }
      } else throw std::runtime_error("config: unknown key " + qual);
    } else if (section == "partitions") {
      if (key == "delta_u") cfg.ratios.delta_u = detail::to_double(value, qual);
      else if (key == "delta_phi") cfg.ratios.delta_phi = detail::to_double(value, qual);
      else if (key == "delta_psi") cfg.ratios.delta_psi = detail::to_double(value, qual);
      else throw std::runtime_error("config: unknown key " + qual);
    } else if (section == "solver") {
      if (key == "method") {
        if (value != "kkt" && value != "reduced-cg" && value != "reduced-sd")
          throw std::runtime_error("config: unknown solver method '" + value + "'");
        cfg.method = value;
      }
      else if (key == "tol") cfg.tol = detail::to_double(value, qual);
      else if (key == "max_iter") cfg.max_iter = static_cast<int>(detail::to_double(value, qual));
      else throw std::runtime_error("config: unknown key " + qual);
    } else if (section == "bc") {
      if (key == "lateral") cfg.lateral = detail::to_face_bc(value, qual);
      else if (key == "top") cfg.top = detail::to_face_bc(value, qual);
      else if (key == "bottom") cfg.bottom = detail::to_face_bc(value, qual);
      else throw std::runtime_error("config: unknown key " + qual);
    } else if (section == "segment") {
      if (!seg) throw std::runtime_error("config: segment key outside block");
      if (key == "a") seg->a = detail::to_vec3(value, qual);
      else if (key == "b") seg->b = detail::to_vec3(value, qual);
      else if (key == "radius") seg->radius = detail::to_double(value, qual);
      else if (key == "k_tilde") seg->k_tilde = detail::to_double(value, qual);
      else if (key == "g_bar") seg->g_bar = detail::to_double(value, qual);
      else if (key == "bc_a") seg->bc_a = detail::to_endpoint_bc(value, qual);
      else if (key == "bc_b") seg->bc_b = detail::to_endpoint_bc(value, qual);
      else throw std::runtime_error("config: unknown key " + qual);
    } else {
      throw std::runtime_error("config: unknown section [" + section + "]");
    }
  }
  return cfg;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

namespace detail {
inline std::string face_bc_str(const FaceBCConfig& bc) {
  switch (bc.kind) {
    case FaceBCConfig::Kind::neumann: return "neumann";
    case FaceBCConfig::Kind::dirichlet_tp1: return "dirichlet tp1";
    case FaceBCConfig::Kind::dirichlet_constant: break;
  }
  char buf[40];
  std::snprintf(buf, sizeof(buf), "dirichlet %.17g", bc.value);
  return buf;
}
inline std::string endpoint_bc_str(const EndpointBC& bc) {
  if (!bc.is_dirichlet()) return "neumann";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "dirichlet %.17g", bc.value);
  return buf;
}
inline std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}
}  // namespace detail

/// Canonical text form; parse_config(serialize_config(c)) reproduces c.
inline std::string serialize_config(const RunConfig& cfg) {
  using detail::num;
  std::ostringstream out;
  out << "[mesh]\n";
  out << "edge = " << num(cfg.edge) << "\n";
  out << "n = " << cfg.n << "\n\n";
  out << "[problem]\n";
  out << "k = " << num(cfg.k_bulk) << "\n";
  out << "alpha = " << num(cfg.alpha) << "\n";
  out << "alpha_hat = " << num(cfg.alpha_hat) << "\n";
  out << "f = "
      << (cfg.forcing == ForcingKind::tp1
              ? std::string("tp1")
              : "constant " + num(cfg.forcing_value))
      << "\n\n";
  out << "[partitions]\n";
  out << "delta_u = " << num(cfg.ratios.delta_u) << "\n";
  out << "delta_phi = " << num(cfg.ratios.delta_phi) << "\n";
  out << "delta_psi = " << num(cfg.ratios.delta_psi) << "\n\n";
  out << "[solver]\n";
  out << "method = " << cfg.method << "\n";
  out << "tol = " << num(cfg.tol) << "\n";
  out << "max_iter = " << cfg.max_iter << "\n\n";
  out << "[bc]\n";
  out << "lateral = " << detail::face_bc_str(cfg.lateral) << "\n";
  out << "top = " << detail::face_bc_str(cfg.top) << "\n";
  out << "bottom = " << detail::face_bc_str(cfg.bottom) << "\n";
  for (const auto& s : cfg.segments) {
    out << "\n[segment]\n";
    out << "a = " << num(s.a.x()) << " " << num(s.a.y()) << " " << num(s.a.z()) << "\n";
    out << "b = " << num(s.b.x()) << " " << num(s.b.y()) << " " << num(s.b.z()) << "\n";
    out << "radius = " << num(s.radius) << "\n";
    out << "k_tilde = " << num(s.k_tilde) << "\n";
    out << "g_bar = " << num(s.g_bar) << "\n";
    out << "bc_a = " << detail::endpoint_bc_str(s.bc_a) << "\n";
    out << "bc_b = " << detail::endpoint_bc_str(s.bc_b) << "\n";
  }
  return out.str();
}

inline void save_config(const RunConfig& cfg, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write config " + path.string());
  out << serialize_config(cfg);
}

}  // namespace trifield
