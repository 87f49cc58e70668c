// cones: integer cone singularities for low-distortion conformal maps.
//
//   cones solve mesh.obj --out report.json --field u.ply --trace trace.csv
//   cones generate icosphere sphere.obj --size 16

#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "cones/cones.hpp"
#include "cones/shapes.hpp"

namespace {

cones::Mesh generate(const std::string& shape, int size) {
  using namespace cones::shapes;
  if (shape == "cube") return cube(size);
  if (shape == "icosphere") return icosphere(size);
  if (shape == "disk") return flat_disk(size);
  if (shape == "hemisphere") return hemisphere(size);
  if (shape == "flat-torus") return flat_torus(size, size);
  if (shape == "torus") return ring_torus(2 * size, size, 1.0, 0.4, 0.2);
  if (shape == "blob") return blob(size);
  if (shape == "double-torus") return pillow(3 * size, 3 * size, {{size, size}, {2 * size, 2 * size}});
  throw std::invalid_argument("unknown shape '" + shape + "'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse integer cone singularities for conformal parameterization"};
  app.require_subcommand(1);

  cones::Config config;
  std::string input, out_path, field_path, trace_path, boundary = "dirichlet";
  std::vector<int> bound{config.bounds.lo, config.bounds.hi};
  bool binary_ply = false, verbose = false;

  auto* solve = app.add_subcommand("solve", "Compute cones for a closed or bounded triangle mesh");
  solve->add_option("input", input, "Input OBJ mesh")->required()->check(CLI::ExistingFile);
  solve->add_option("--target-distortion", config.epsilon_tar, "Target distortion")->capture_default_str();
  solve->add_option("--ng", config.n_g, "Maximum number of integer variables per angle solve")->capture_default_str();
  solve->add_option("--bound", bound, "Multiplier range LO HI")->expected(2)->capture_default_str();
  solve->add_option("--lambda-d", config.lambda_d, "Seam jump weight (genus >= 1)")->capture_default_str();
  solve->add_option("--eta", config.eta0, "Initial relative removal threshold")->capture_default_str();
  solve->add_option("--max-iter", config.max_iter, "Iteration cap")->capture_default_str();
  solve->add_option("--boundary", boundary, "Boundary condition")
      ->check(CLI::IsMember({"dirichlet", "neumann"}))
      ->capture_default_str();
  solve->add_option("--f-thres", config.f_thres_ratio, "Branch threshold relative to max |f|")->capture_default_str();
  solve->add_option("--out", out_path, "JSON report");
  solve->add_option("--field", field_path, "PLY with u as vertex quality");
  solve->add_flag("--binary-ply", binary_ply, "Write the PLY in binary");
  solve->add_option("--trace", trace_path, "Distortion trace CSV");
  solve->add_flag("-v,--verbose", verbose, "Print every trace event");

  std::string shape, gen_out;
  int size = 16;
  auto* gen = app.add_subcommand("generate", "Write a synthetic test mesh");
  gen->add_option("shape", shape,
                  "cube | icosphere | disk | hemisphere | flat-torus | torus | blob | double-torus")
      ->required();
  gen->add_option("output", gen_out, "Output OBJ")->required();
  gen->add_option("--size", size, "Resolution parameter")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  if (*gen) {
    try {
      const cones::Mesh m = generate(shape, size);
      std::ofstream out(gen_out);
      if (!out) throw std::runtime_error("cannot open " + gen_out + " for writing");
      cones::write_obj(m, out);
      std::printf("%s: %d vertices, %d faces\n", gen_out.c_str(), m.n_vertices(), m.n_faces());
      return 0;
    } catch (const std::exception& e) {
      std::fprintf(stderr, "error: %s\n", e.what());
      return 1;
    }
  }

  try {
    config.bounds = {bound[0], bound[1]};
    config.boundary = boundary == "neumann" ? cones::BoundaryMode::Neumann : cones::BoundaryMode::Dirichlet;
    const cones::Mesh mesh = cones::load_obj(input);
    auto on_event = [&](const cones::TraceEvent& e) {
      if (verbose)
        std::fprintf(stderr, "[%4d] %-13s E=%.6g n_c=%d n_0=%d\n", e.iteration, e.event.c_str(), e.E, e.n_c, e.n_0);
    };
    const cones::SolveReport rep = cones::run_pipeline(mesh, config, on_event);
    if (!out_path.empty()) cones::emit_report(rep, out_path);
    if (!field_path.empty()) cones::emit_field_ply(mesh, rep.u, field_path, binary_ply);
    if (!trace_path.empty()) cones::emit_trace_csv(rep, trace_path);
    for (const auto& w : rep.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
    std::printf("E=%.6g n_c=%d n_0=%d iterations=%d %s\n", rep.distortion, rep.n_c, rep.n_0, rep.iterations,
                rep.termination.c_str());
    if (rep.holonomy) {
      std::printf("holonomy r=[");
      for (std::size_t i = 0; i < rep.holonomy->r.size(); ++i) std::printf(i ? ",%d" : "%d", rep.holonomy->r[i]);
      std::printf("] E=%.6g E_dif=%.6g\n", rep.holonomy->E, rep.holonomy->e_dif);
    }
    return rep.reached_target ? 0 : 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    if (!out_path.empty()) {
      try {
        cones::write_text(out_path, cones::ordered_json{{"error", e.what()}}.dump(2) + "\n");
      } catch (...) {
      }
    }
    return 1;
  }
}
