#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "cones/error.hpp"
#include "cones/mesh.hpp"
#include "cones/pipeline.hpp"

namespace cones {

using ordered_json = nlohmann::ordered_json;

// x rounded to 12 significant digits; non-finite values become null.
inline ordered_json round12(double x) {
  if (!std::isfinite(x)) return nullptr;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return std::strtod(buf, nullptr);
}

inline ordered_json config_json(const Config& c) {
  ordered_json j;
  j["epsilon_tar"] = round12(c.epsilon_tar);
  j["n_g"] = c.n_g;
  j["bounds"] = {c.bounds.lo, c.bounds.hi};
  j["lambda_d"] = round12(c.lambda_d);
  j["eta0"] = round12(c.eta0);
  j["max_iter"] = c.max_iter;
  j["boundary"] = to_string(c.boundary);
  j["f_thres_ratio"] = round12(c.f_thres_ratio);
  j["holonomy_width"] = c.holonomy_width;
  return j;
}

inline ordered_json report_json(const SolveReport& r) {
  ordered_json j;
  j["mesh"] = {{"n_vertices", r.n_vertices}, {"genus", r.genus}, {"n_boundary_loops", r.n_boundary_loops}};
  j["config"] = config_json(r.config);
  j["cones"] = ordered_json::array();
  for (const auto& c : r.cones) j["cones"].push_back({{"vertex", c.vertex}, {"z", c.z}});
  j["n_c"] = r.n_c;
  j["n_0"] = r.n_0;
  j["distortion"] = round12(r.distortion);
  j["iterations"] = r.iterations;
  j["distortion_changes"] = r.distortion_changes;
  j["termination"] = r.termination;
  j["pin"] = r.pin;
  j["trace"] = ordered_json::array();
  for (const auto& e : r.trace) {
    ordered_json t{{"event", e.event}, {"iteration", e.iteration}, {"E", round12(e.E)}, {"n_c", e.n_c},
                   {"n_0", e.n_0}, {"sum_z", e.sum_z}};
    if (e.event == "remove_pairs") t["eta"] = round12(e.eta);
    j["trace"].push_back(std::move(t));
  }
  if (r.holonomy) {
    const auto& h = *r.holonomy;
    ordered_json hj;
    hj["r"] = h.r;
    hj["e_dif"] = round12(h.e_dif);
    hj["E"] = round12(h.E);
    hj["residual"] = round12(h.residual);
    hj["r_box"] = ordered_json::array();
    for (std::size_t i = 0; i < h.r.size(); ++i) hj["r_box"].push_back({h.r_lo[i], h.r_hi[i]});
    hj["at_box_edge"] = h.at_box_edge;
    hj["loops"] = ordered_json::array();
    for (std::size_t i = 0; i < h.loops.size(); ++i)
      hj["loops"].push_back({{"vertices", h.loops[i]}, {"left_curvature", round12(h.loop_curvature[i])}});
    hj["crossings"] = h.crossings;
    j["holonomy"] = std::move(hj);
  }
  ordered_json audit{{"yamabe_residual", round12(r.audit.yamabe_residual)}, {"sum_z", r.audit.sum_z}};
  if (r.audit.sum_target) audit["sum_target"] = *r.audit.sum_target;
  audit["bounds_ok"] = r.audit.bounds_ok;
  j["audit"] = std::move(audit);
  j["timings"] = ordered_json::object();
  for (const auto& [phase, s] : r.timings) j["timings"][phase] = round12(s);
  j["warnings"] = r.warnings;
  return j;
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline void emit_report(const SolveReport& r, const std::string& path) { write_text(path, report_json(r).dump(2) + "\n"); }

// PLY with the first three coordinates and a per-vertex "quality" = u.
inline void emit_field_ply(const Mesh& mesh, const Eigen::VectorXd& u, const std::string& path, bool binary = false) {
  if (u.size() != mesh.n_vertices()) throw SolverError("field length does not match the vertex count");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "ply\nformat " << (binary ? "binary_little_endian" : "ascii") << " 1.0\n"
      << "element vertex " << mesh.n_vertices() << "\n"
      << "property double x\nproperty double y\nproperty double z\nproperty double quality\n"
      << "element face " << mesh.n_faces() << "\n"
      << "property list uchar int vertex_indices\nend_header\n";
  const int dim = static_cast<int>(mesh.positions.cols());
  auto coord = [&](int v, int k) { return k < dim ? mesh.positions(v, k) : 0.0; };
  if (binary) {
    auto put = [&](const auto& x) { out.write(reinterpret_cast<const char*>(&x), sizeof x); };
    for (int v = 0; v < mesh.n_vertices(); ++v) {
      for (int k = 0; k < 3; ++k) put(coord(v, k));
      put(u[v]);
    }
    for (const auto& f : mesh.faces) {
      put(static_cast<std::uint8_t>(3));
      for (int k = 0; k < 3; ++k) put(static_cast<std::int32_t>(f[k]));
    }
  } else {
    char buf[160];
    for (int v = 0; v < mesh.n_vertices(); ++v) {
      std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g %.17g\n", coord(v, 0), coord(v, 1), coord(v, 2), u[v]);
      out << buf;
    }
    for (const auto& f : mesh.faces) out << "3 " << f[0] << ' ' << f[1] << ' ' << f[2] << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

// Reads the "quality" channel back from a PLY written by emit_field_ply.
inline Eigen::VectorXd read_field_ply(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  bool binary = false;
  int n = -1, n_props = 0, quality = -1;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    if (word == "format") {
      std::string fmt;
      ls >> fmt;
      binary = fmt == "binary_little_endian";
    } else if (word == "element") {
      std::string name;
      ls >> name;
      if (name == "vertex") ls >> n;
    } else if (word == "property" && n >= 0 && quality < 0 && line.find("list") == std::string::npos) {
      std::string type, name;
      ls >> type >> name;
      if (name == "quality") quality = n_props;
      ++n_props;
    } else if (word == "end_header") {
      break;
    }
  }
  if (n < 0 || quality < 0) throw MeshError("PLY has no vertex quality channel");
  Eigen::VectorXd u(n);
  std::vector<double> row(n_props);
  for (int v = 0; v < n; ++v) {
    if (binary)
      in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(n_props * sizeof(double)));
    else
      for (auto& x : row) in >> x;
    if (!in) throw MeshError("truncated PLY vertex data");
    u[v] = row[quality];
  }
  return u;
}

inline std::string trace_csv(const SolveReport& r) {
  std::ostringstream out;
  out << "event,iteration,E,n_c,n_0,sum_z,eta\n";
  char buf[64];
  for (const auto& e : r.trace) {
    std::snprintf(buf, sizeof buf, "%.12g", e.E);
    out << e.event << ',' << e.iteration << ',' << buf << ',' << e.n_c << ',' << e.n_0 << ',' << e.sum_z << ',';
    if (e.event == "remove_pairs") {
      std::snprintf(buf, sizeof buf, "%.12g", e.eta);
      out << buf;
    }
    out << '\n';
  }
  return out.str();
}

inline void emit_trace_csv(const SolveReport& r, const std::string& path) { write_text(path, trace_csv(r)); }

}  // namespace cones
