#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "cones/geometry.hpp"
#include "cones/mesh.hpp"
#include "cones/state.hpp"
#include "cones/yamabe.hpp"

namespace cones {

// Maximal connected set of same-sign vertices with |f| above a threshold.
struct Branch {
  std::vector<int> vertices;  // ascending
  double energy = 0;          // sum of Area(v) f(v)^2
  int extremal = -1;          // max |f| (ties: lower id)
};

inline std::vector<Branch> find_branches(const Mesh& mesh, const Eigen::VectorXd& f, double f_thres,
                                         const Eigen::VectorXd& vertex_areas) {
  const int n = mesh.n_vertices();
  std::vector<char> seen(n, 0);
  std::vector<Branch> branches;
  for (int s = 0; s < n; ++s) {
    if (seen[s] || !(std::abs(f[s]) > f_thres)) continue;
    const bool positive = f[s] > 0;
    Branch b;
    std::vector<int> stack{s};
    seen[s] = 1;
    while (!stack.empty()) {
      const int v = stack.back();
      stack.pop_back();
      b.vertices.push_back(v);
      for (int w : mesh.ring[v]) {
        if (seen[w] || !(std::abs(f[w]) > f_thres) || (f[w] > 0) != positive) continue;
        seen[w] = 1;
        stack.push_back(w);
      }
    }
    std::sort(b.vertices.begin(), b.vertices.end());
    for (int v : b.vertices) {
      b.energy += vertex_areas[v] * f[v] * f[v];
      if (b.extremal < 0 || std::abs(f[v]) > std::abs(f[b.extremal])) b.extremal = v;
    }
    branches.push_back(std::move(b));
  }
  std::stable_sort(branches.begin(), branches.end(), [](const Branch& a, const Branch& b) {
    if (a.energy != b.energy) return a.energy > b.energy;
    return a.vertices.front() < b.vertices.front();
  });
  return branches;
}

// Up to `count` vertices: extremal vertices of the top branches of f, then
// the largest-|f| remaining vertices. Only vertices with allowed[v] and
// |f(v)| > min_abs are used.
inline std::vector<int> pick_extrema(const Mesh& mesh, const Eigen::VectorXd& f, int count, double f_thres_ratio,
                                     const Eigen::VectorXd& vertex_areas, const std::vector<char>& allowed,
                                     double min_abs = 0.0) {
  std::vector<int> out;
  if (count <= 0) return out;
  Eigen::VectorXd g = f;
  for (int v = 0; v < mesh.n_vertices(); ++v)
    if (!allowed[v]) g[v] = 0.0;
  const double fmax = g.size() ? g.cwiseAbs().maxCoeff() : 0.0;
  if (!(fmax > min_abs)) return out;
  std::vector<char> taken(mesh.n_vertices(), 0);
  for (const auto& b : find_branches(mesh, g, f_thres_ratio * fmax, vertex_areas)) {
    if (static_cast<int>(out.size()) >= count) break;
    if (!(std::abs(g[b.extremal]) > min_abs)) continue;
    out.push_back(b.extremal);
    taken[b.extremal] = 1;
  }
  if (static_cast<int>(out.size()) < count) {
    std::vector<int> order;
    for (int v = 0; v < mesh.n_vertices(); ++v)
      if (!taken[v] && std::abs(g[v]) > min_abs) order.push_back(v);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return std::abs(g[a]) > std::abs(g[b]); });
    for (int v : order) {
      if (static_cast<int>(out.size()) >= count) break;
      out.push_back(v);
    }
  }
  return out;
}

// N_a: 8 for genus zero (with or without boundary), |8(1-g)| otherwise.
inline int initial_cone_count(int genus) { return genus == 0 ? 8 : std::abs(8 * (1 - genus)); }

// Numerical floor below which a curvature value counts as zero.
inline constexpr double kCurvatureFloor = 1e-9;

// Interior vertices are the only cone sites.
inline std::vector<char> interior_mask(const Mesh& mesh) {
  std::vector<char> m(mesh.n_vertices());
  for (int v = 0; v < mesh.n_vertices(); ++v) m[v] = !mesh.on_boundary[v];
  return m;
}

// Initial cone sites from the angle defects.
inline std::vector<int> initial_candidates(const Mesh& mesh, const CurvatureData& curvature, int genus,
                                           double f_thres_ratio = 0.3) {
  return pick_extrema(mesh, curvature.k_ori, initial_cone_count(genus), f_thres_ratio, curvature.vertex_areas,
                      interior_mask(mesh), kCurvatureFloor);
}

// Pinned vertex: on closed meshes the vertex farthest (in edges) from the
// initial cone sites, ties to the lower id, vertex 0 without sites; on
// Neumann boundaries the farthest boundary vertex. Dirichlet needs no pin.
inline int choose_pin(const Mesh& mesh, const std::vector<int>& sites, BoundaryMode mode) {
  if (!mesh.is_closed() && mode == BoundaryMode::Dirichlet) return -1;
  const bool boundary_only = !mesh.is_closed();
  if (sites.empty()) {
    for (int v = 0; v < mesh.n_vertices(); ++v)
      if (!boundary_only || mesh.on_boundary[v]) return v;
  }
  const std::vector<int> dist = bfs_distances(mesh, sites);
  int best = -1;
  for (int v = 0; v < mesh.n_vertices(); ++v) {
    if (boundary_only && !mesh.on_boundary[v]) continue;
    if (best < 0 || dist[v] > dist[best]) best = v;
  }
  return best;
}

// Cones with zero multipliers at the initial sites (the pin excluded).
inline ConeState initial_cones(const Mesh& mesh, const CurvatureData& curvature, int genus, int pin,
                               double f_thres_ratio = 0.3) {
  ConeState s;
  s.pin = pin;
  for (int v : initial_candidates(mesh, curvature, genus, f_thres_ratio))
    if (v != pin) s.cones.push_back({v, 0});
  return s;
}

// min(m, 10) when E exceeds m * eps_tar for some m >= 2 (maximal m) and
// there are more than n_g cones; 1 otherwise.
inline int adaptive_add_count(double E, double eps_tar, int n_c, int n_g) {
  if (!(eps_tar > 0)) throw SolverError("target distortion must be positive");
  double q = std::floor(E / eps_tar);
  if (!(q < 1e6)) q = 1e6;
  int m = static_cast<int>(q);
  while (m > 0 && !(E > m * eps_tar)) --m;
  if (m >= 2 && n_c > n_g) return std::min(m, 10);
  return 1;
}

// Inserts up to `count` zero-angle cones at extremal vertices of branches
// of f = u. Returns the new cone vertices (empty when no vertex is left).
inline std::vector<int> add_cones(State& state, int count, double f_thres_ratio = 0.3) {
  const Mesh& mesh = *state.mesh;
  std::vector<char> allowed(mesh.n_vertices());
  for (int v = 0; v < mesh.n_vertices(); ++v) allowed[v] = state.system->admissible(v) && !state.cones.has(v);
  const std::vector<int> added = pick_extrema(mesh, state.eval.u, count, f_thres_ratio,
                                              state.system->curvature().vertex_areas, allowed, 0.0);
  for (int v : added) state.cones.cones.push_back({v, 0});
  if (!added.empty()) state.refresh();
  return added;
}

// Relative distortion-increase threshold for removals.
struct RemovalBudget {
  double eta = 0.10;
  double decay = 0.9;
};

struct RemovalEvent {
  int a = -1, b = -1;  // removed cone vertices
  int distance = 0;
  double E_before = 0, E_after = 0;
  double eta = 0;      // threshold the removal was tested against
};

inline int removal_distance_limit(int n_vertices) {
  return std::max(1, static_cast<int>(std::ceil(5e-4 * n_vertices)));
}

// Removes opposite-sign cone pairs that are close together when doing so
// raises E by a relative amount below eta. Pairs are tried by increasing
// distance (ties: lower vertex pair). Each acceptance shrinks eta by the
// decay factor and becomes the new reference distortion. `on_accept` runs
// after each accepted removal has been applied.
inline std::vector<RemovalEvent> remove_pairs(State& state, RemovalBudget& budget,
                                              const std::function<void(const RemovalEvent&)>& on_accept = {}) {
  const Mesh& mesh = *state.mesh;
  const int n = mesh.n_vertices();
  const int cap = removal_distance_limit(n);
  struct Pair {
    int d, a, b;
  };
  std::vector<Pair> pairs;
  for (int i = 0; i < state.cones.size(); ++i) {
    const Cone ci = state.cones.cones[i];
    if (ci.z == 0) continue;
    for (int j = i + 1; j < state.cones.size(); ++j) {
      const Cone cj = state.cones.cones[j];
      if (cj.z != -ci.z) continue;
      const auto d = bfs_edge_distance(mesh, ci.vertex, cj.vertex, cap);
      if (!d) continue;
      // Adjacent pairs always qualify; farther ones need d < 5e-4 N.
      if (*d <= 1 || *d < 5e-4 * n) pairs.push_back({*d, std::min(ci.vertex, cj.vertex), std::max(ci.vertex, cj.vertex)});
    }
  }
  std::sort(pairs.begin(), pairs.end(), [](const Pair& x, const Pair& y) {
    if (x.d != y.d) return x.d < y.d;
    if (x.a != y.a) return x.a < y.a;
    return x.b < y.b;
  });

  std::vector<RemovalEvent> events;
  for (const auto& p : pairs) {
    const int ia = state.cones.index_of(p.a), ib = state.cones.index_of(p.b);
    if (ia < 0 || ib < 0) continue;
    const int za = state.cones.cones[ia].z, zb = state.cones.cones[ib].z;
    if (za == 0 || za != -zb) continue;
    Eigen::VectorXd r = state.eval.u;
    r.array() -= state.eval.a;
    r -= za * state.map.column(p.a) + zb * state.map.column(p.b);
    Evaluation trial = state.map.finish(std::move(r));
    const double E_old = state.E();
    if (trial.E - E_old < budget.eta * E_old) {
      events.push_back({p.a, p.b, p.d, E_old, trial.E, budget.eta});
      ConeState next = state.cones;
      next.cones.erase(std::remove_if(next.cones.begin(), next.cones.end(),
                                      [&](const Cone& c) { return c.vertex == p.a || c.vertex == p.b; }),
                       next.cones.end());
      state.cones = std::move(next);
      state.map.sync(state.cones);
      state.eval = std::move(trial);
      budget.eta *= budget.decay;
      if (on_accept) on_accept(events.back());
    }
  }
  return events;
}

}  // namespace cones
