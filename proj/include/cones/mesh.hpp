#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <limits>
#include <optional>
#include <queue>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "cones/error.hpp"

namespace cones {

using Face = std::array<int, 3>;

// Indexed triangle mesh with oriented one-ring adjacency.
//
// Positions may live in any dimension >= 2; all geometry is computed from
// edge vectors, so intrinsically flat surfaces embedded in R^4 (e.g. the
// Clifford torus) are representable.
struct Mesh {
  Eigen::MatrixXd positions;  // N x dim
  std::vector<Face> faces;
  std::vector<char> on_boundary;
  // ring[v] lists neighbors counter-clockwise. ring_faces[v][t] is the face
  // (v, ring[v][t], ring[v][t+1]); interior rings wrap around, boundary rings
  // have one fewer face than neighbors.
  std::vector<std::vector<int>> ring;
  std::vector<std::vector<int>> ring_faces;
  std::vector<std::array<int, 2>> edges;  // undirected, first < second

  int n_vertices() const { return static_cast<int>(positions.rows()); }
  int n_faces() const { return static_cast<int>(faces.size()); }
  int n_edges() const { return static_cast<int>(edges.size()); }
  bool is_closed() const {
    return std::none_of(on_boundary.begin(), on_boundary.end(), [](char b) { return b != 0; });
  }
  Eigen::VectorXd position(int v) const { return positions.row(v).transpose(); }

  // Index of w within ring[v], or -1.
  int ring_index(int v, int w) const {
    const auto& r = ring[v];
    auto it = std::find(r.begin(), r.end(), w);
    return it == r.end() ? -1 : static_cast<int>(it - r.begin());
  }
};

namespace detail {

inline std::int64_t edge_key(int a, int b, int n) {
  return static_cast<std::int64_t>(a) * n + b;
}

inline double triangle_area(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double aa = a.squaredNorm();
  const double bb = b.squaredNorm();
  const double ab = a.dot(b);
  return 0.5 * std::sqrt(std::max(0.0, aa * bb - ab * ab));
}

}  // namespace detail

// Builds adjacency and validates the mesh: index range, non-degenerate
// faces, consistent orientation, edge- and vertex-manifoldness,
// connectivity and absence of unreferenced vertices.
inline Mesh make_mesh(Eigen::MatrixXd positions, std::vector<Face> faces) {
  const int n = static_cast<int>(positions.rows());
  if (n == 0 || faces.empty()) throw MeshError("mesh has no vertices or no faces");
  if (positions.cols() < 2) throw MeshError("vertex positions need at least two coordinates");

  for (std::size_t f = 0; f < faces.size(); ++f) {
    for (int k = 0; k < 3; ++k) {
      if (faces[f][k] < 0 || faces[f][k] >= n)
        throw MeshError("face " + std::to_string(f) + " references vertex index out of range");
    }
    if (faces[f][0] == faces[f][1] || faces[f][1] == faces[f][2] || faces[f][0] == faces[f][2])
      throw MeshError("degenerate face " + std::to_string(f) + " repeats a vertex");
  }

  const Eigen::VectorXd lo = positions.colwise().minCoeff().transpose();
  const Eigen::VectorXd hi = positions.colwise().maxCoeff().transpose();
  const double bbox2 = (hi - lo).squaredNorm();
  for (std::size_t f = 0; f < faces.size(); ++f) {
    const auto& t = faces[f];
    const Eigen::VectorXd p0 = positions.row(t[0]).transpose();
    const double area = detail::triangle_area(positions.row(t[1]).transpose() - p0,
                                              positions.row(t[2]).transpose() - p0);
    if (!(area >= 1e-12 * bbox2))
      throw MeshError("degenerate face " + std::to_string(f) + " has (near) zero area");
  }

  // Directed half-edges must be unique: each interior edge appears once per
  // direction, which enforces both orientation and two faces per edge.
  std::unordered_map<std::int64_t, int> directed;
  directed.reserve(faces.size() * 3);
  for (std::size_t f = 0; f < faces.size(); ++f) {
    for (int k = 0; k < 3; ++k) {
      const int a = faces[f][k], b = faces[f][(k + 1) % 3];
      if (!directed.emplace(detail::edge_key(a, b, n), static_cast<int>(f)).second)
        throw MeshError("non-manifold or inconsistently oriented edge (" + std::to_string(a) +
                        ", " + std::to_string(b) + ")");
    }
  }

  Mesh mesh;
  mesh.positions = std::move(positions);
  mesh.faces = std::move(faces);
  mesh.on_boundary.assign(n, 0);
  mesh.ring.assign(n, {});
  mesh.ring_faces.assign(n, {});

  // Per vertex: successor map b -> c for each incident face (v, b, c).
  std::vector<std::vector<std::array<int, 3>>> corners(n);
  for (int f = 0; f < mesh.n_faces(); ++f) {
    const auto& t = mesh.faces[f];
    for (int k = 0; k < 3; ++k) corners[t[k]].push_back({t[(k + 1) % 3], t[(k + 2) % 3], f});
  }

  for (int v = 0; v < n; ++v) {
    auto& cs = corners[v];
    if (cs.empty()) throw MeshError("vertex " + std::to_string(v) + " is not referenced by any face");
    std::sort(cs.begin(), cs.end());
    std::unordered_map<int, std::size_t> by_first;
    std::unordered_map<int, int> pred_count;
    for (std::size_t i = 0; i < cs.size(); ++i) {
      by_first[cs[i][0]] = i;
      ++pred_count[cs[i][1]];
    }
    int start = -1, n_starts = 0;
    for (const auto& c : cs) {
      if (!pred_count.count(c[0])) {
        ++n_starts;
        if (start < 0) start = c[0];
      }
    }
    if (n_starts > 1) throw MeshError("non-manifold vertex " + std::to_string(v));
    const bool boundary = n_starts == 1;
    if (!boundary) start = cs.front()[0];

    auto& r = mesh.ring[v];
    auto& rf = mesh.ring_faces[v];
    int cur = start;
    r.push_back(cur);
    for (std::size_t step = 0; step < cs.size(); ++step) {
      auto it = by_first.find(cur);
      if (it == by_first.end()) break;
      const auto& c = cs[it->second];
      rf.push_back(c[2]);
      cur = c[1];
      if (!boundary && cur == start) break;
      r.push_back(cur);
    }
    if (rf.size() != cs.size()) throw MeshError("non-manifold vertex " + std::to_string(v));
    mesh.on_boundary[v] = boundary ? 1 : 0;
  }

  for (const auto& [key, f] : directed) {
    (void)f;
    const int a = static_cast<int>(key / n), b = static_cast<int>(key % n);
    if (a < b || !directed.count(detail::edge_key(b, a, n))) mesh.edges.push_back({std::min(a, b), std::max(a, b)});
  }
  std::sort(mesh.edges.begin(), mesh.edges.end());

  // Connectivity.
  std::vector<char> seen(n, 0);
  std::vector<int> stack{0};
  seen[0] = 1;
  int reached = 1;
  while (!stack.empty()) {
    const int v = stack.back();
    stack.pop_back();
    for (int w : mesh.ring[v]) {
      if (!seen[w]) {
        seen[w] = 1;
        ++reached;
        stack.push_back(w);
      }
    }
  }
  if (reached != n) throw MeshError("mesh is not connected");
  return mesh;
}

// Parses ASCII OBJ: `v x y z` and `f i j k` records (1-based, negative
// indices relative, `i/t/n` forms accepted); everything else is ignored.
inline Mesh parse_obj(std::istream& in) {
  std::vector<Eigen::Vector3d> verts;
  std::vector<Face> faces;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag)) continue;
    if (tag == "v") {
      Eigen::Vector3d p;
      if (!(ls >> p.x() >> p.y() >> p.z()))
        throw MeshError("line " + std::to_string(line_no) + ": malformed vertex record");
      verts.push_back(p);
    } else if (tag == "f") {
      std::vector<int> idx;
      std::string tok;
      while (ls >> tok) {
        const std::string head = tok.substr(0, tok.find('/'));
        int i = 0;
        try {
          std::size_t used = 0;
          i = std::stoi(head, &used);
          if (used != head.size()) throw std::invalid_argument(head);
        } catch (const std::exception&) {
          throw MeshError("line " + std::to_string(line_no) + ": malformed face index '" + tok + "'");
        }
        const int resolved = i > 0 ? i - 1 : static_cast<int>(verts.size()) + i;
        if (i == 0 || resolved < 0 || resolved >= static_cast<int>(verts.size()))
          throw MeshError("line " + std::to_string(line_no) + ": face index out of range");
        idx.push_back(resolved);
      }
      if (idx.size() != 3) throw MeshError("line " + std::to_string(line_no) + ": non-triangle face");
      faces.push_back({idx[0], idx[1], idx[2]});
    }
  }
  Eigen::MatrixXd pos(static_cast<Eigen::Index>(verts.size()), 3);
  for (std::size_t i = 0; i < verts.size(); ++i) pos.row(static_cast<Eigen::Index>(i)) = verts[i].transpose();
  return make_mesh(std::move(pos), std::move(faces));
}

inline Mesh load_obj(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MeshError("cannot open " + path.string());
  return parse_obj(in);
}

inline void write_obj(const Mesh& mesh, std::ostream& out) {
  out.precision(17);
  for (int v = 0; v < mesh.n_vertices(); ++v) {
    out << 'v';
    for (int d = 0; d < std::min<int>(3, static_cast<int>(mesh.positions.cols())); ++d) out << ' ' << mesh.positions(v, d);
    out << '\n';
  }
  for (const auto& f : mesh.faces) out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
}

// Unweighted BFS edge count between a and b; nullopt once it exceeds cap.
inline std::optional<int> bfs_edge_distance(const Mesh& mesh, int a, int b, int cap) {
  const int n = mesh.n_vertices();
  if (a < 0 || a >= n || b < 0 || b >= n) throw MeshError("invalid vertex id");
  if (a == b) return 0;
  std::vector<int> dist(n, -1);
  std::queue<int> q;
  dist[a] = 0;
  q.push(a);
  while (!q.empty()) {
    const int v = q.front();
    q.pop();
    if (dist[v] >= cap) break;
    for (int w : mesh.ring[v]) {
      if (dist[w] >= 0) continue;
      dist[w] = dist[v] + 1;
      if (w == b) return dist[w];
      q.push(w);
    }
  }
  return std::nullopt;
}

// Multi-source BFS hop distances; unreachable vertices get INT_MAX.
inline std::vector<int> bfs_distances(const Mesh& mesh, const std::vector<int>& sources) {
  std::vector<int> dist(mesh.n_vertices(), std::numeric_limits<int>::max());
  std::queue<int> q;
  for (int s : sources) {
    if (dist[s] != 0) {
      dist[s] = 0;
      q.push(s);
    }
  }
  while (!q.empty()) {
    const int v = q.front();
    q.pop();
    for (int w : mesh.ring[v]) {
      if (dist[w] == std::numeric_limits<int>::max()) {
        dist[w] = dist[v] + 1;
        q.push(w);
      }
    }
  }
  return dist;
}

}  // namespace cones
