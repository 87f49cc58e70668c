#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include "cones/error.hpp"
#include "cones/mesh.hpp"
#include "cones/sparse.hpp"

namespace cones {

// Interior angles of every face, indexed like the face's corners.
inline std::vector<std::array<double, 3>> corner_angles(const Mesh& mesh) {
  std::vector<std::array<double, 3>> angles(mesh.faces.size());
  for (int f = 0; f < mesh.n_faces(); ++f) {
    const auto& t = mesh.faces[f];
    for (int k = 0; k < 3; ++k) {
      const Eigen::VectorXd p = mesh.position(t[k]);
      const Eigen::VectorXd a = mesh.position(t[(k + 1) % 3]) - p;
      const Eigen::VectorXd b = mesh.position(t[(k + 2) % 3]) - p;
      const double cross = std::sqrt(std::max(0.0, a.squaredNorm() * b.squaredNorm() - std::pow(a.dot(b), 2)));
      if (cross == 0.0) throw MeshError("degenerate face " + std::to_string(f));
      angles[f][k] = std::atan2(cross, a.dot(b));
    }
  }
  return angles;
}

// Angle defect per vertex: 2*pi (interior) or pi (boundary) minus the sum of
// incident corner angles.
inline Eigen::VectorXd angle_defects(const Mesh& mesh) {
  const auto angles = corner_angles(mesh);
  Eigen::VectorXd k(mesh.n_vertices());
  for (int v = 0; v < mesh.n_vertices(); ++v) k[v] = mesh.on_boundary[v] ? std::numbers::pi : 2 * std::numbers::pi;
  for (int f = 0; f < mesh.n_faces(); ++f)
    for (int c = 0; c < 3; ++c) k[mesh.faces[f][c]] -= angles[f][c];
  return k;
}

// Cotangent of the corner angle at faces[f][k].
inline double corner_cotangent(const Mesh& mesh, int f, int k) {
  const auto& t = mesh.faces[f];
  const Eigen::VectorXd p = mesh.position(t[k]);
  const Eigen::VectorXd a = mesh.position(t[(k + 1) % 3]) - p;
  const Eigen::VectorXd b = mesh.position(t[(k + 2) % 3]) - p;
  const double cross = std::sqrt(std::max(0.0, a.squaredNorm() * b.squaredNorm() - std::pow(a.dot(b), 2)));
  if (cross == 0.0) throw MeshError("degenerate face " + std::to_string(f));
  return a.dot(b) / cross;
}

// Positive semidefinite cotangent Laplacian: L_ij = -(cot a_ij + cot b_ij)/2,
// L_ii = -sum_j L_ij. Obtuse (negative) weights are kept.
inline std::vector<Eigen::Triplet<double>> cotan_triplets(const Mesh& mesh) {
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(mesh.faces.size() * 12);
  for (int f = 0; f < mesh.n_faces(); ++f) {
    const auto& t = mesh.faces[f];
    for (int k = 0; k < 3; ++k) {
      const double w = 0.5 * corner_cotangent(mesh, f, k);
      const int i = t[(k + 1) % 3], j = t[(k + 2) % 3];
      trips.emplace_back(i, j, -w);
      trips.emplace_back(j, i, -w);
      trips.emplace_back(i, i, w);
      trips.emplace_back(j, j, w);
    }
  }
  return trips;
}

inline SparseSym cotan_laplacian(const Mesh& mesh) {
  return SparseSym::assemble(cotan_triplets(mesh), mesh.n_vertices());
}

inline double face_area(const Mesh& mesh, int f) {
  const auto& t = mesh.faces[f];
  const Eigen::VectorXd p = mesh.position(t[0]);
  return detail::triangle_area(mesh.position(t[1]) - p, mesh.position(t[2]) - p);
}

// Barycentric vertex areas: one third of every incident face.
inline Eigen::VectorXd vertex_areas(const Mesh& mesh) {
  Eigen::VectorXd a = Eigen::VectorXd::Zero(mesh.n_vertices());
  for (int f = 0; f < mesh.n_faces(); ++f) {
    const double third = face_area(mesh, f) / 3.0;
    for (int v : mesh.faces[f]) a[v] += third;
  }
  return a;
}

// Diagonal of the normalized area matrix; entries sum to one.
inline Eigen::VectorXd area_weights(const Mesh& mesh) {
  const Eigen::VectorXd a = vertex_areas(mesh);
  const double total = a.sum();
  if (!(total > 0)) throw MeshError("mesh has zero total area");
  return a / total;
}

struct CurvatureData {
  Eigen::VectorXd k_ori;         // angle defects
  Eigen::VectorXd area_weights;  // normalized, sums to one
  Eigen::VectorXd vertex_areas;  // raw barycentric areas
};

inline CurvatureData curvature_data(const Mesh& mesh) {
  CurvatureData c;
  c.k_ori = angle_defects(mesh);
  c.vertex_areas = vertex_areas(mesh);
  c.area_weights = c.vertex_areas / c.vertex_areas.sum();
  return c;
}

struct Topology {
  int euler_characteristic = 0;
  int genus = 0;
  int boundary_loops = 0;
};

inline int count_boundary_loops(const Mesh& mesh) {
  // Boundary half-edges (v -> ring.front()) chain into loops; the last ring
  // neighbor of a boundary vertex is its predecessor on the boundary.
  std::vector<char> seen(mesh.n_vertices(), 0);
  int loops = 0;
  for (int v = 0; v < mesh.n_vertices(); ++v) {
    if (!mesh.on_boundary[v] || seen[v]) continue;
    ++loops;
    int cur = v;
    while (!seen[cur]) {
      seen[cur] = 1;
      cur = mesh.ring[cur].back();
    }
  }
  return loops;
}

inline Topology topology(const Mesh& mesh) {
  Topology t;
  t.euler_characteristic = mesh.n_vertices() - mesh.n_edges() + mesh.n_faces();
  t.boundary_loops = count_boundary_loops(mesh);
  t.genus = (2 - t.euler_characteristic - t.boundary_loops) / 2;
  return t;
}

}  // namespace cones
