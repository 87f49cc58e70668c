#pragma once

#include <Eigen/Core>

#include <chrono>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cones/angles.hpp"
#include "cones/cone_count.hpp"
#include "cones/error.hpp"
#include "cones/geometry.hpp"
#include "cones/high_genus.hpp"
#include "cones/homology.hpp"
#include "cones/mesh.hpp"
#include "cones/relocation.hpp"
#include "cones/state.hpp"
#include "cones/yamabe.hpp"

namespace cones {

struct Config {
  double epsilon_tar = 0.2;
  int n_g = 30;
  Bounds bounds;
  double lambda_d = 1e6;
  double eta0 = 0.10;
  int max_iter = 1000;
  BoundaryMode boundary = BoundaryMode::Dirichlet;
  double f_thres_ratio = 0.3;
  int holonomy_width = 2;

  void validate() const {
    if (!(epsilon_tar > 0)) throw SolverError("target distortion must be positive");
    if (bounds.lo > 0 || bounds.hi < 0) throw SolverError("bounds must satisfy lo <= 0 <= hi");
    if (n_g < 2) throw SolverError("N_g must be at least 2");
    if (max_iter < 1) throw SolverError("max_iter must be at least 1");
    if (!(lambda_d > 0)) throw SolverError("lambda_d must be positive");
    if (!(eta0 > 0)) throw SolverError("eta must be positive");
    if (!(f_thres_ratio >= 0 && f_thres_ratio < 1)) throw SolverError("f_thres_ratio must be in [0, 1)");
    if (holonomy_width < 0) throw SolverError("holonomy box width must be non-negative");
  }
};

struct TraceEvent {
  std::string event;  // init, add_cones, solve_angles, move_cones, remove_pairs
  int iteration = 0;
  double E = 0;
  int n_c = 0;  // nonzero-angle cones
  int n_0 = 0;  // zero-angle cones
  int sum_z = 0;
  double eta = 0;  // remove_pairs: threshold the accepted removal was tested against
};

struct HolonomyReport {
  std::vector<int> r;
  std::vector<int> r_lo, r_hi;
  bool at_box_edge = false;
  double E = 0;
  double e_dif = 0;
  double residual = 0;
  std::vector<std::vector<int>> loops;
  std::vector<double> loop_curvature;
  std::vector<int> crossings;
};

struct Audit {
  double yamabe_residual = 0;
  int sum_z = 0;
  std::optional<int> sum_target;
  bool bounds_ok = true;
};

struct SolveReport {
  int n_vertices = 0;
  int genus = 0;
  int n_boundary_loops = 0;
  Config config;
  std::vector<Cone> cones;  // sorted by vertex, zero-angle cones included
  int n_c = 0;
  int n_0 = 0;
  double distortion = 0;
  int iterations = 0;          // loop bodies executed
  int distortion_changes = 0;  // events where E changed
  bool reached_target = false;
  std::string termination;     // target_reached | iteration_cap
  std::vector<TraceEvent> trace;
  std::optional<HolonomyReport> holonomy;
  Audit audit;
  std::vector<std::pair<std::string, double>> timings;  // seconds
  std::vector<std::string> warnings;
  int pin = -1;
  Eigen::VectorXd u;
};

namespace detail {

class PhaseClock {
 public:
  using clock = std::chrono::steady_clock;
  void add(const std::string& phase, clock::time_point since) {
    const double s = std::chrono::duration<double>(clock::now() - since).count();
    for (auto& [name, t] : totals_)
      if (name == phase) {
        t += s;
        return;
      }
    totals_.emplace_back(phase, s);
  }
  const std::vector<std::pair<std::string, double>>& totals() const { return totals_; }

 private:
  std::vector<std::pair<std::string, double>> totals_;
};

}  // namespace detail

// Initialization (curvature, pin, initial cones, one angle solve), then
// add -> solve angles -> move -> remove until E <= epsilon_tar or max_iter
// loop bodies. Closed meshes keep sum z = 8(1 - g); meshes with boundary
// leave the sum free. On g >= 1 the holonomy problem is solved once for the
// final cones.
inline SolveReport run_pipeline(const Mesh& mesh, const Config& config,
                                const std::function<void(const TraceEvent&)>& on_event = {}) {
  using clock = std::chrono::steady_clock;
  config.validate();
  const auto t_start = clock::now();
  detail::PhaseClock clk;

  SolveReport rep;
  rep.config = config;
  const Topology topo = topology(mesh);
  rep.n_vertices = mesh.n_vertices();
  rep.genus = topo.genus;
  rep.n_boundary_loops = topo.boundary_loops;
  const bool closed = mesh.is_closed();

  auto t = clock::now();
  const CurvatureData curvature = curvature_data(mesh);
  const std::vector<int> sites = initial_candidates(mesh, curvature, topo.genus, config.f_thres_ratio);
  rep.pin = choose_pin(mesh, sites, config.boundary);
  const YamabeSystem sys(mesh, config.boundary, rep.pin);
  clk.add("setup", t);

  t = clock::now();
  State state(mesh, sys, config.bounds, closed ? 8 * (1 - topo.genus) : 0);
  for (int v : sites)
    if (v != rep.pin) state.cones.cones.push_back({v, 0});
  state.refresh();
  AngleOptions angle_options;
  angle_options.n_g = config.n_g;
  const AngleSolveInfo init = solve_angles(state, {}, angle_options);
  if (init.budget_exhausted) rep.warnings.push_back("node budget exhausted in the initial angle solve");
  clk.add("initialization", t);

  auto record = [&](const std::string& name, int iteration, double eta = 0) {
    TraceEvent e;
    e.event = name;
    e.iteration = iteration;
    e.E = state.E();
    for (const auto& c : state.cones.cones) (c.z != 0 ? e.n_c : e.n_0) += 1;
    e.sum_z = state.cones.sum_z();
    e.eta = eta;
    if (!rep.trace.empty() && rep.trace.back().E != e.E) ++rep.distortion_changes;
    rep.trace.push_back(e);
    if (on_event) on_event(e);
  };
  record("init", 0);

  RemovalBudget budget{config.eta0, 0.9};
  bool warned_full = false;
  const auto t_loop = clock::now();
  while (rep.iterations < config.max_iter && state.E() > config.epsilon_tar) {
    const int it = ++rep.iterations;

    t = clock::now();
    const int count = adaptive_add_count(state.E(), config.epsilon_tar, state.cones.size(), config.n_g);
    const std::vector<int> added = add_cones(state, count, config.f_thres_ratio);
    if (added.empty() && !warned_full) {
      rep.warnings.push_back("no admissible vertex left for new cones");
      warned_full = true;
    }
    clk.add("add_cones", t);
    record("add_cones", it);

    t = clock::now();
    const AngleSolveInfo a = solve_angles(state, added, angle_options);
    if (a.budget_exhausted) rep.warnings.push_back("node budget exhausted in iteration " + std::to_string(it));
    clk.add("solve_angles", t);
    record("solve_angles", it);

    t = clock::now();
    move_cones(state);
    clk.add("move_cones", t);
    record("move_cones", it);

    t = clock::now();
    remove_pairs(state, budget, [&](const RemovalEvent& ev) { record("remove_pairs", it, ev.eta); });
    clk.add("remove_pairs", t);
  }
  clk.add("loop", t_loop);

  rep.reached_target = state.E() <= config.epsilon_tar;
  rep.termination = rep.reached_target ? "target_reached" : "iteration_cap";
  rep.distortion = state.E();
  rep.u = state.eval.u;
  rep.cones = state.cones.cones;
  std::sort(rep.cones.begin(), rep.cones.end(), [](const Cone& a, const Cone& b) { return a.vertex < b.vertex; });
  for (const auto& c : rep.cones) (c.z != 0 ? rep.n_c : rep.n_0) += 1;

  // Independent checks of the final state.
  Eigen::VectorXd direct = sys.solve_direct(state.cones);
  if (sys.has_scale()) direct.array() += optimal_scale(direct, sys.area_weights());
  const double direct_E = distortion(direct, sys.area_weights());
  rep.audit.yamabe_residual = sys.residual(state.cones, state.eval.u);
  if (std::abs(direct_E - state.E()) > 1e-8 * std::max(1.0, state.E()))
    rep.warnings.push_back("reduced and direct distortion differ by " + std::to_string(std::abs(direct_E - state.E())));
  rep.audit.sum_z = state.cones.sum_z();
  if (closed) rep.audit.sum_target = 8 * (1 - topo.genus);
  for (const auto& c : state.cones.cones)
    if (c.z < config.bounds.lo || c.z > config.bounds.hi) rep.audit.bounds_ok = false;

  if (closed && topo.genus >= 1) {
    t = clock::now();
    const HomologyBasis basis = homology_loops(mesh);
    const CutMesh cut = cut_mesh(mesh, basis);
    const HolonomySystem hs = assemble_system(cut, state.cones, curvature.k_ori);
    HolonomyOptions ho;
    ho.lambda_d = config.lambda_d;
    ho.width = config.holonomy_width;
    const HolonomySolution sol = solve_holonomy(hs, ho);
    HolonomyReport h;
    h.r = sol.r;
    h.r_lo = sol.r_lo;
    h.r_hi = sol.r_hi;
    h.at_box_edge = sol.at_box_edge;
    h.E = sol.E;
    h.e_dif = sol.E_dif;
    h.residual = sol.residual;
    for (const auto& loop : basis.loops) {
      h.loops.push_back(loop.vertices);
      h.loop_curvature.push_back(loop.total_left_curvature());
    }
    h.crossings = basis.crossings;
    if (sol.at_box_edge) rep.warnings.push_back("holonomy integers hit the edge of their search box");
    rep.holonomy = std::move(h);
    clk.add("holonomy", t);
  }

  clk.add("total", t_start);
  rep.timings = clk.totals();
  return rep;
}

}  // namespace cones
