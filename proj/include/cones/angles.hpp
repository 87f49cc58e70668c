#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "cones/error.hpp"
#include "cones/mesh.hpp"
#include "cones/miqp.hpp"
#include "cones/state.hpp"
#include "cones/yamabe.hpp"

namespace cones {

// Cone vertices whose multipliers are optimized: all seeds, then the other
// cones by BFS distance to the nearest seed (ties: lower vertex id) up to
// n_g in total. Returns every cone when there are at most n_g.
inline std::vector<int> select_active(const Mesh& mesh, const ConeState& cones, const std::vector<int>& seeds, int n_g) {
  std::vector<int> all = cones.vertices();
  if (cones.size() <= n_g) {
    std::sort(all.begin(), all.end());
    return all;
  }
  std::vector<int> active;
  for (int s : seeds)
    if (cones.has(s) && std::find(active.begin(), active.end(), s) == active.end()) active.push_back(s);
  if (static_cast<int>(active.size()) > n_g) active.resize(n_g);
  const std::vector<int> dist = bfs_distances(mesh, active);
  std::vector<int> rest;
  for (int v : all)
    if (std::find(active.begin(), active.end(), v) == active.end()) rest.push_back(v);
  std::sort(rest.begin(), rest.end(), [&](int a, int b) { return dist[a] != dist[b] ? dist[a] < dist[b] : a < b; });
  for (int v : rest) {
    if (static_cast<int>(active.size()) >= n_g) break;
    active.push_back(v);
  }
  std::sort(active.begin(), active.end());
  return active;
}

// The integer problem over the active multipliers, with inactive cones
// frozen at their current values, the global scale minimized out, and, on
// closed meshes, the active cone with the largest vertex id eliminated
// through the sum constraint. Its range becomes the sum window of the QP.
struct ReducedAngles {
  ReducedQP qp;
  std::vector<int> free_cones;  // cone indices of the QP variables, in order
  int eliminated = -1;          // cone index, or -1
  int eliminated_total = 0;     // z_eliminated = eliminated_total - sum(y)

  // Full multiplier vector (indexed like cones) for a QP point.
  std::vector<int> reconstruct(const ConeState& cones, const std::vector<int>& y) const {
    std::vector<int> z;
    for (const auto& c : cones.cones) z.push_back(c.z);
    int s = 0;
    for (std::size_t i = 0; i < free_cones.size(); ++i) {
      z[free_cones[i]] = y[i];
      s += y[i];
    }
    if (eliminated >= 0) z[eliminated] = eliminated_total - s;
    return z;
  }

  // QP point of the current multipliers.
  std::vector<int> current(const ConeState& cones) const {
    std::vector<int> y;
    for (int i : free_cones) y.push_back(cones.cones[i].z);
    return y;
  }
};

inline ReducedAngles build_reduced_qp(const ReducedMap& map, const ConeState& cones, const std::vector<int>& active,
                                      int target_sum, Bounds bounds) {
  const YamabeSystem& sys = map.system();
  if (bounds.lo > bounds.hi) throw InfeasibleError("empty multiplier bounds");
  ReducedAngles out;
  std::vector<int> active_idx;
  for (int v : active) {
    const int i = cones.index_of(v);
    if (i < 0) throw SolverError("active vertex is not a cone");
    active_idx.push_back(i);
  }
  std::sort(active_idx.begin(), active_idx.end(),
            [&](int a, int b) { return cones.cones[a].vertex < cones.cones[b].vertex; });

  // d' = d + frozen contributions.
  Eigen::VectorXd dprime = map.d();
  int frozen_sum = 0;
  for (int i = 0; i < cones.size(); ++i) {
    if (std::find(active_idx.begin(), active_idx.end(), i) != active_idx.end()) continue;
    frozen_sum += cones.cones[i].z;
    if (cones.cones[i].z != 0) dprime += cones.cones[i].z * map.column(cones.cones[i].vertex);
  }

  const bool eliminate = sys.constrains_sum() && !active_idx.empty();
  if (sys.constrains_sum() && active_idx.empty() && frozen_sum != target_sum)
    throw InfeasibleError("no active cones and the frozen multipliers miss the target sum");
  if (eliminate) {
    out.eliminated = active_idx.back();
    active_idx.pop_back();
    out.eliminated_total = target_sum - frozen_sum;
    dprime += out.eliminated_total * map.column(cones.cones[out.eliminated].vertex);
  }
  out.free_cones = active_idx;

  const int n = sys.size(), m = static_cast<int>(active_idx.size());
  Eigen::MatrixXd b(n, m);
  for (int j = 0; j < m; ++j) {
    b.col(j) = map.column(cones.cones[active_idx[j]].vertex);
    if (eliminate) b.col(j) -= map.column(cones.cones[out.eliminated].vertex);
  }
  const Eigen::VectorXd& w = sys.area_weights();
  if (sys.has_scale()) {
    // Center against the area weights: P v = v - (w . v) 1.
    for (int j = 0; j < m; ++j) b.col(j).array() -= w.dot(b.col(j));
    dprime.array() -= w.dot(dprime);
  }
  const Eigen::MatrixXd wb = w.asDiagonal() * b;
  out.qp.H = b.transpose() * wb;
  out.qp.H = 0.5 * (out.qp.H + out.qp.H.transpose()).eval();
  out.qp.g = wb.transpose() * dprime;
  out.qp.c0 = dprime.dot(w.cwiseProduct(dprime));
  out.qp.lo.assign(m, bounds.lo);
  out.qp.hi.assign(m, bounds.hi);
  if (eliminate) {
    out.qp.has_sum = true;
    out.qp.sum_lo = out.eliminated_total - bounds.hi;
    out.qp.sum_hi = out.eliminated_total - bounds.lo;
    if (static_cast<long>(m) * bounds.lo > out.qp.sum_hi || static_cast<long>(m) * bounds.hi < out.qp.sum_lo)
      throw InfeasibleError("target sum " + std::to_string(target_sum) + " is unreachable within the bounds");
  }
  return out;
}

struct AngleSolveInfo {
  bool accepted = false;
  bool changed = false;
  double E_before = 0, E_after = 0;
  int n_active = 0;
  long nodes = 0;
  bool budget_exhausted = false;
};

struct AngleOptions {
  int n_g = 30;
  BnbOptions bnb;
};

// Re-optimizes the active multipliers. The current multipliers seed the
// search when feasible, so the result never has higher distortion; a
// solution is only adopted when E does not increase (or when the current
// multipliers violate the constraints).
inline AngleSolveInfo solve_angles(State& state, std::vector<int> seeds, const AngleOptions& options = {}) {
  AngleSolveInfo info;
  info.E_before = info.E_after = state.E();
  if (state.cones.size() == 0) return info;
  if (options.n_g < 2) throw SolverError("n_g must be at least 2");

  if (seeds.empty() && state.cones.size() > options.n_g) {
    // No new cones: center the window on the cone where |u| is largest.
    int best = state.cones.cones.front().vertex;
    for (const auto& c : state.cones.cones) {
      const double a = std::abs(state.eval.u[c.vertex]), b = std::abs(state.eval.u[best]);
      if (a > b || (a == b && c.vertex < best)) best = c.vertex;
    }
    seeds = {best};
  }
  const std::vector<int> active = select_active(*state.mesh, state.cones, seeds, options.n_g);
  info.n_active = static_cast<int>(active.size());
  const ReducedAngles red = build_reduced_qp(state.map, state.cones, active, state.target_sum, state.bounds);

  const bool was_feasible = state.z_feasible();
  std::optional<std::vector<int>> incumbent;
  if (was_feasible) incumbent = red.current(state.cones);
  const BnbResult res = branch_and_bound(red.qp, incumbent, options.bnb);
  info.nodes = res.nodes;
  info.budget_exhausted = res.budget_exhausted;

  const std::vector<int> z = red.reconstruct(state.cones, res.y);
  ConeState trial = state.cones;
  for (int i = 0; i < trial.size(); ++i) trial.cones[i].z = z[i];
  if (trial == state.cones) {
    info.accepted = true;
    return info;
  }
  const Evaluation e = state.map.evaluate(trial);
  if (!was_feasible || e.E <= state.E()) {
    state.cones = std::move(trial);
    state.eval = e;
    info.accepted = info.changed = true;
    info.E_after = e.E;
  }
  return info;
}

}  // namespace cones
