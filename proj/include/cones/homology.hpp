#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <queue>
#include <vector>

#include "cones/error.hpp"
#include "cones/geometry.hpp"
#include "cones/mesh.hpp"

namespace cones {

// A closed edge cycle stored as its vertex sequence; edge j runs from
// vertices[j] to vertices[j+1] (wrapping). Its left side is the side on the
// left when walking in that order on the oriented surface.
struct Loop {
  std::vector<int> vertices;
  // Per loop vertex: pi minus the sum of corner angles in the left fan.
  std::vector<double> left_curvature;

  int size() const { return static_cast<int>(vertices.size()); }
  int prev(int j) const { return vertices[(j + size() - 1) % size()]; }
  int next(int j) const { return vertices[(j + 1) % size()]; }
  double total_left_curvature() const {
    return std::accumulate(left_curvature.begin(), left_curvature.end(), 0.0);
  }
};

// 2g loops. Loops 2i and 2i+1 cross transversally at exactly one vertex,
// crossings[i]; loops of different pairs share no vertex.
struct HomologyBasis {
  std::vector<Loop> loops;
  std::vector<int> crossings;
};

// Ring positions t (faces ring_faces[v][t]) strictly to the left of the path
// prev -> v -> next, i.e. swept counter-clockwise from next to prev.
inline std::vector<int> left_fan(const Mesh& mesh, int v, int prev, int next) {
  const int ip = mesh.ring_index(v, prev), in = mesh.ring_index(v, next);
  if (ip < 0 || in < 0) throw MeshError("loop step is not a mesh edge");
  if (mesh.on_boundary[v]) throw MeshError("loops must avoid boundary vertices");
  const int deg = static_cast<int>(mesh.ring[v].size());
  std::vector<int> fan;
  for (int t = in; t != ip; t = (t + 1) % deg) fan.push_back(t);
  return fan;
}

// Corner angle at vertex v of face f.
inline double angle_at(const Mesh& mesh, const std::vector<std::array<double, 3>>& angles, int f, int v) {
  const auto& t = mesh.faces[f];
  for (int k = 0; k < 3; ++k)
    if (t[k] == v) return angles[f][k];
  throw MeshError("vertex not in face");
}

inline void compute_left_curvature(const Mesh& mesh, const std::vector<std::array<double, 3>>& angles, Loop& loop) {
  loop.left_curvature.assign(loop.vertices.size(), std::numbers::pi);
  for (int j = 0; j < loop.size(); ++j) {
    const int v = loop.vertices[j];
    for (int t : left_fan(mesh, v, loop.prev(j), loop.next(j)))
      loop.left_curvature[j] -= angle_at(mesh, angles, mesh.ring_faces[v][t], v);
  }
}

namespace detail {

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  bool unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent[std::max(a, b)] = std::min(a, b);
    return true;
  }
};

// Faces on either side of every undirected edge.
inline std::vector<std::array<int, 2>> edge_faces(const Mesh& mesh) {
  std::vector<std::array<int, 2>> ef(mesh.edges.size(), {-1, -1});
  for (int f = 0; f < mesh.n_faces(); ++f) {
    for (int k = 0; k < 3; ++k) {
      const int a = mesh.faces[f][k], b = mesh.faces[f][(k + 1) % 3];
      const std::array<int, 2> key{std::min(a, b), std::max(a, b)};
      const auto it = std::lower_bound(mesh.edges.begin(), mesh.edges.end(), key);
      auto& slot = ef[static_cast<std::size_t>(it - mesh.edges.begin())];
      (slot[0] < 0 ? slot[0] : slot[1]) = f;
    }
  }
  return ef;
}

// Shortest path leaving loop vertex x on its left and returning from its
// right, avoiding blocked vertices. Returns the crossing loop starting at x,
// or an empty vector.
inline std::vector<int> crossing_loop(const Mesh& mesh, const Loop& loop, int j, const std::vector<char>& blocked) {
  const int x = loop.vertices[j];
  const auto& ring = mesh.ring[x];
  const int deg = static_cast<int>(ring.size());
  const int ip = mesh.ring_index(x, loop.prev(j)), in = mesh.ring_index(x, loop.next(j));
  std::vector<char> is_target(mesh.n_vertices(), 0);
  std::vector<int> sources;
  for (int t = (in + 1) % deg; t != ip; t = (t + 1) % deg)
    if (!blocked[ring[t]]) sources.push_back(ring[t]);
  bool any_target = false;
  for (int t = (ip + 1) % deg; t != in; t = (t + 1) % deg)
    if (!blocked[ring[t]]) is_target[ring[t]] = any_target = true;
  if (sources.empty() || !any_target) return {};

  std::vector<int> parent(mesh.n_vertices(), -2);
  std::queue<int> q;
  for (int s : sources) {
    if (is_target[s]) continue;
    parent[s] = -1;
    q.push(s);
  }
  while (!q.empty()) {
    const int v = q.front();
    q.pop();
    for (int w : mesh.ring[v]) {
      if (blocked[w] || parent[w] != -2) continue;
      parent[w] = v;
      if (is_target[w]) {
        std::vector<int> path;
        for (int c = w; c != -1; c = parent[c]) path.push_back(c);
        path.push_back(x);
        std::reverse(path.begin(), path.end());  // x, left..., right
        return path;
      }
      q.push(w);
    }
  }
  return {};
}

}  // namespace detail

// Homology basis of a closed genus-g mesh.
//
// Handles are taken one at a time from tree-cotree generators of the region
// not yet used by earlier loops; each is paired with the shortest loop that
// leaves it on one side and returns on the other. The pairs are
// vertex-disjoint and each pair crosses once, so the intersection form is
// the standard symplectic one and the 2g loops are independent.
inline HomologyBasis homology_loops(const Mesh& mesh) {
  if (!mesh.is_closed()) throw MeshError("homology loops require a closed mesh");
  const int g = topology(mesh).genus;
  if (g < 1) throw MeshError("homology loops require genus >= 1");
  const int n = mesh.n_vertices();
  const auto angles = corner_angles(mesh);
  const auto ef = detail::edge_faces(mesh);

  HomologyBasis basis;
  std::vector<char> used(n, 0);
  for (int handle = 0; handle < g; ++handle) {
    // Primal BFS forest over unused vertices.
    std::vector<int> parent(n, -1), depth(n, -1);
    std::vector<int> order;
    for (int root = 0; root < n; ++root) {
      if (used[root] || depth[root] >= 0) continue;
      depth[root] = 0;
      std::queue<int> q;
      q.push(root);
      while (!q.empty()) {
        const int v = q.front();
        q.pop();
        order.push_back(v);
        for (int w : mesh.ring[v]) {
          if (used[w] || depth[w] >= 0) continue;
          depth[w] = depth[v] + 1;
          parent[w] = v;
          q.push(w);
        }
      }
    }

    // Dual spanning forest over non-tree edges; faces touching used vertices
    // collapse into one outside node.
    const int outside = mesh.n_faces();
    auto node = [&](int f) {
      for (int v : mesh.faces[f])
        if (used[v]) return outside;
      return f;
    };
    detail::UnionFind uf(mesh.n_faces() + 1);
    std::vector<int> generators, non_tree;
    for (int e = 0; e < mesh.n_edges(); ++e) {
      const auto [a, b] = mesh.edges[e];
      if (used[a] || used[b] || parent[a] == b || parent[b] == a) continue;
      non_tree.push_back(e);
      if (!uf.unite(node(ef[e][0]), node(ef[e][1]))) generators.push_back(e);
    }

    auto fundamental_cycle = [&](int e) {
      int a = mesh.edges[e][0], b = mesh.edges[e][1];
      std::vector<int> up_a, up_b;
      while (depth[a] > depth[b]) { up_a.push_back(a); a = parent[a]; }
      while (depth[b] > depth[a]) { up_b.push_back(b); b = parent[b]; }
      while (a != b) {
        up_a.push_back(a);
        up_b.push_back(b);
        a = parent[a];
        b = parent[b];
      }
      up_a.push_back(a);
      up_a.insert(up_a.end(), up_b.rbegin(), up_b.rend());
      Loop loop;
      loop.vertices = std::move(up_a);
      return loop;
    };

    auto try_edges = [&](std::vector<int> edges) -> bool {
      std::vector<Loop> candidates;
      for (int e : edges) candidates.push_back(fundamental_cycle(e));
      std::vector<int> idx(candidates.size());
      std::iota(idx.begin(), idx.end(), 0);
      std::stable_sort(idx.begin(), idx.end(), [&](int x, int y) { return candidates[x].size() < candidates[y].size(); });
      for (int c : idx) {
        const Loop& gamma = candidates[c];
        std::vector<char> blocked = used;
        for (int v : gamma.vertices) blocked[v] = 1;
        std::vector<int> best;
        int best_j = -1;
        for (int j = 0; j < gamma.size(); ++j) {
          auto path = detail::crossing_loop(mesh, gamma, j, blocked);
          if (!path.empty() && (best.empty() || path.size() < best.size())) {
            best = std::move(path);
            best_j = j;
          }
        }
        if (best.empty()) continue;
        Loop a = gamma, b;
        b.vertices = std::move(best);
        compute_left_curvature(mesh, angles, a);
        compute_left_curvature(mesh, angles, b);
        for (int v : a.vertices) used[v] = 1;
        for (int v : b.vertices) used[v] = 1;
        basis.crossings.push_back(a.vertices[best_j]);
        basis.loops.push_back(std::move(a));
        basis.loops.push_back(std::move(b));
        return true;
      }
      return false;
    };

    if (!try_edges(generators) && !try_edges(non_tree))
      throw MeshError("could not find a crossing loop pair for handle " + std::to_string(handle) +
                      " (mesh too coarse around the handle)");
  }
  return basis;
}

// Row of the partial (left-fan) Laplacian summed over a loop, as a dense
// per-vertex coefficient vector, plus the loop's total left curvature.
struct HolonomyRow {
  Eigen::VectorXd coefficients;
  double curvature_sum = 0.0;
};

inline std::vector<HolonomyRow> holonomy_rows(const Mesh& mesh, const HomologyBasis& basis) {
  std::vector<HolonomyRow> rows;
  for (const auto& loop : basis.loops) {
    HolonomyRow row;
    row.coefficients = Eigen::VectorXd::Zero(mesh.n_vertices());
    for (int j = 0; j < loop.size(); ++j) {
      const int v = loop.vertices[j];
      for (int t : left_fan(mesh, v, loop.prev(j), loop.next(j))) {
        const int f = mesh.ring_faces[v][t];
        const auto& tri = mesh.faces[f];
        int k = 0;
        while (tri[k] != v) ++k;
        const int a = tri[(k + 1) % 3], b = tri[(k + 2) % 3];
        // Edge (v,a) is opposite corner b and edge (v,b) opposite corner a.
        const double wa = 0.5 * corner_cotangent(mesh, f, (k + 2) % 3);
        const double wb = 0.5 * corner_cotangent(mesh, f, (k + 1) % 3);
        row.coefficients[v] += wa + wb;
        row.coefficients[a] -= wa;
        row.coefficients[b] -= wb;
      }
    }
    row.curvature_sum = loop.total_left_curvature();
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace cones
