#pragma once

// Procedural meshes used by the tests, the acceptance suite and
// `cones generate`.

#include <Eigen/Core>

#include <array>
#include <cmath>
#include <map>
#include <numbers>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "cones/mesh.hpp"

namespace cones::shapes {

namespace detail {

// Deduplicates vertices by quantized position.
class VertexPool {
 public:
  int add(const Eigen::Vector3d& p) {
    const auto key = std::make_tuple(std::llround(p.x() * 1e9), std::llround(p.y() * 1e9), std::llround(p.z() * 1e9));
    auto [it, inserted] = index_.emplace(key, static_cast<int>(points_.size()));
    if (inserted) points_.push_back(p);
    return it->second;
  }
  Eigen::MatrixXd positions() const {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(points_.size()), 3);
    for (std::size_t i = 0; i < points_.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = points_[i].transpose();
    return m;
  }
  std::vector<Eigen::Vector3d>& points() { return points_; }

 private:
  std::map<std::tuple<long long, long long, long long>, int> index_;
  std::vector<Eigen::Vector3d> points_;
};

inline Mesh from_points(const std::vector<Eigen::Vector3d>& pts, std::vector<Face> faces) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(pts.size()), 3);
  for (std::size_t i = 0; i < pts.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = pts[i].transpose();
  return make_mesh(std::move(m), std::move(faces));
}

}  // namespace detail

inline Mesh tetrahedron() {
  std::vector<Eigen::Vector3d> p = {{1, 1, 1}, {1, -1, -1}, {-1, 1, -1}, {-1, -1, 1}};
  return detail::from_points(p, {{0, 1, 2}, {0, 2, 3}, {0, 3, 1}, {1, 3, 2}});
}

inline Mesh single_triangle() {
  std::vector<Eigen::Vector3d> p = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
  return detail::from_points(p, {{0, 1, 2}});
}

// Two right triangles forming the unit square.
inline Mesh unit_square() {
  std::vector<Eigen::Vector3d> p = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}};
  return detail::from_points(p, {{0, 1, 2}, {0, 2, 3}});
}

// Surface of [-1,1]^3 with every face split into an n x n quad grid;
// 6n^2 + 2 vertices.
inline Mesh cube(int n) {
  detail::VertexPool pool;
  std::vector<Face> faces;
  const std::array<Eigen::Vector3d, 3> axes = {Eigen::Vector3d::UnitX(), Eigen::Vector3d::UnitY(), Eigen::Vector3d::UnitZ()};
  for (int a = 0; a < 3; ++a) {
    for (int s : {-1, 1}) {
      const Eigen::Vector3d normal = s * axes[a];
      Eigen::Vector3d du = axes[(a + 1) % 3];
      Eigen::Vector3d dv = axes[(a + 2) % 3];
      if (du.cross(dv).dot(normal) < 0) std::swap(du, dv);
      std::vector<int> ids((n + 1) * (n + 1));
      for (int i = 0; i <= n; ++i)
        for (int j = 0; j <= n; ++j)
          ids[i * (n + 1) + j] = pool.add(normal + du * (2.0 * i / n - 1) + dv * (2.0 * j / n - 1));
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
          const int v00 = ids[i * (n + 1) + j], v10 = ids[(i + 1) * (n + 1) + j];
          const int v01 = ids[i * (n + 1) + j + 1], v11 = ids[(i + 1) * (n + 1) + j + 1];
          faces.push_back({v00, v10, v11});
          faces.push_back({v00, v11, v01});
        }
      }
    }
  }
  return make_mesh(pool.positions(), std::move(faces));
}

// Geodesic sphere: icosahedron faces split into n^2 triangles and projected
// to the unit sphere; 10n^2 + 2 vertices.
inline Mesh icosphere(int n) {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Eigen::Vector3d> ico = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                                      {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  for (auto& p : ico) p.normalize();
  const std::vector<Face> ico_faces = {{0, 11, 5}, {0, 5, 1}, {0, 1, 7}, {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
                                       {11, 10, 2}, {10, 7, 6}, {7, 1, 8}, {3, 9, 4}, {3, 4, 2}, {3, 2, 6}, {3, 6, 8},
                                       {3, 8, 9}, {4, 9, 5}, {2, 4, 11}, {6, 2, 10}, {8, 6, 7}, {9, 8, 1}};
  detail::VertexPool pool;
  std::vector<Face> faces;
  for (const auto& f : ico_faces) {
    const Eigen::Vector3d a = ico[f[0]], b = ico[f[1]], c = ico[f[2]];
    auto id = [&](int i, int j) {
      const Eigen::Vector3d p = (a * (n - i - j) + b * i + c * j) / n;
      return pool.add(p.normalized());
    };
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n - i; ++j) {
        faces.push_back({id(i, j), id(i + 1, j), id(i, j + 1)});
        if (i + j < n - 1) faces.push_back({id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)});
      }
    }
  }
  return make_mesh(pool.positions(), std::move(faces));
}

namespace detail {

// Concentric-ring disk: ring k has 6k vertices at parameter radius k/rings.
// Returns (radius, angle) per vertex and the faces.
inline std::pair<std::vector<std::pair<double, double>>, std::vector<Face>> polar_disk(int rings) {
  std::vector<std::pair<double, double>> polar = {{0.0, 0.0}};
  std::vector<Face> faces;
  std::vector<int> prev = {0};
  std::vector<double> prev_angle = {0.0};
  for (int k = 1; k <= rings; ++k) {
    std::vector<int> cur;
    std::vector<double> cur_angle;
    for (int j = 0; j < 6 * k; ++j) {
      cur.push_back(static_cast<int>(polar.size()));
      cur_angle.push_back(2 * std::numbers::pi * j / (6 * k));
      polar.emplace_back(static_cast<double>(k) / rings, cur_angle.back());
    }
    if (k == 1) {
      for (int j = 0; j < 6; ++j) faces.push_back({0, cur[j], cur[(j + 1) % 6]});
    } else {
      // Zip the two rings in angular order.
      const int a = static_cast<int>(prev.size()), b = static_cast<int>(cur.size());
      int i = 0, j = 0;
      while (i < a || j < b) {
        const double next_a = i < a ? 2 * std::numbers::pi * (i + 1) / a : 1e9;
        const double next_b = j < b ? 2 * std::numbers::pi * (j + 1) / b : 1e9;
        if (next_b <= next_a) {
          faces.push_back({prev[i % a], cur[j % b], cur[(j + 1) % b]});
          ++j;
        } else {
          faces.push_back({prev[i % a], cur[j % b], prev[(i + 1) % a]});
          ++i;
        }
      }
    }
    prev = cur;
    prev_angle = cur_angle;
  }
  return {polar, faces};
}

}  // namespace detail

// Planar unit disk with 3 rings(rings+1) + 1 vertices.
inline Mesh flat_disk(int rings) {
  auto [polar, faces] = detail::polar_disk(rings);
  std::vector<Eigen::Vector3d> p;
  for (auto [r, a] : polar) p.emplace_back(r * std::cos(a), r * std::sin(a), 0.0);
  return detail::from_points(p, std::move(faces));
}

// Upper unit hemisphere, boundary on the equator.
inline Mesh hemisphere(int rings) {
  auto [polar, faces] = detail::polar_disk(rings);
  std::vector<Eigen::Vector3d> p;
  for (auto [r, a] : polar) {
    const double theta = r * std::numbers::pi / 2;
    p.emplace_back(std::sin(theta) * std::cos(a), std::sin(theta) * std::sin(a), std::cos(theta));
  }
  return detail::from_points(p, std::move(faces));
}

namespace detail {

inline std::vector<Face> torus_faces(int nu, int nv) {
  std::vector<Face> faces;
  auto id = [&](int i, int j) { return ((i + nu) % nu) * nv + (j + nv) % nv; };
  for (int i = 0; i < nu; ++i) {
    for (int j = 0; j < nv; ++j) {
      faces.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
      faces.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
    }
  }
  return faces;
}

}  // namespace detail

// Intrinsically flat nu x nv grid torus: the Clifford torus in R^4, every
// grid quad is a planar rectangle.
inline Mesh flat_torus(int nu, int nv) {
  Eigen::MatrixXd p(nu * nv, 4);
  for (int i = 0; i < nu; ++i) {
    for (int j = 0; j < nv; ++j) {
      const double u = 2 * std::numbers::pi * i / nu, v = 2 * std::numbers::pi * j / nv;
      p.row(i * nv + j) << std::cos(u), std::sin(u), std::cos(v), std::sin(v);
    }
  }
  return make_mesh(p / std::sqrt(2.0), detail::torus_faces(nu, nv));
}

// Ring torus in R^3 with major radius R, minor radius r, optionally with a
// smooth bump pattern of relative amplitude `bump` on the tube radius.
inline Mesh ring_torus(int nu, int nv, double major = 1.0, double minor = 0.4, double bump = 0.0) {
  Eigen::MatrixXd p(nu * nv, 3);
  for (int i = 0; i < nu; ++i) {
    for (int j = 0; j < nv; ++j) {
      const double u = 2 * std::numbers::pi * i / nu, v = 2 * std::numbers::pi * j / nv;
      const double r = minor * (1.0 + bump * std::sin(2 * u) * std::cos(v) + 0.5 * bump * std::cos(3 * u));
      p.row(i * nv + j) << (major + r * std::cos(v)) * std::cos(u), (major + r * std::cos(v)) * std::sin(u), r * std::sin(v);
    }
  }
  return make_mesh(p, detail::torus_faces(nu, nv));
}

// Star-shaped organic blob: a geodesic sphere with smoothly modulated radius.
inline Mesh blob(int n) {
  Mesh m = icosphere(n);
  const std::vector<std::pair<Eigen::Vector3d, double>> bumps = {
      {Eigen::Vector3d(0.2, 0.9, 0.3).normalized(), 0.45}, {Eigen::Vector3d(-0.7, -0.2, 0.6).normalized(), 0.3},
      {Eigen::Vector3d(0.5, -0.6, -0.6).normalized(), 0.35}, {Eigen::Vector3d(-0.3, 0.4, -0.85).normalized(), 0.2}};
  for (int v = 0; v < m.n_vertices(); ++v) {
    const Eigen::Vector3d d = m.positions.row(v).transpose();
    double r = 1.0 + 0.08 * std::sin(3 * d.x()) * std::cos(2 * d.y() + 1.0);
    for (const auto& [c, h] : bumps) r += h * std::exp(-(d - c).squaredNorm() / 0.18);
    m.positions.row(v) = (r * d).transpose();
  }
  return make_mesh(m.positions, m.faces);
}

// Closed genus-g surface: two sheets over an nx x ny grid with g square holes,
// glued along the outer boundary and along every hole.
inline Mesh pillow(int nx, int ny, const std::vector<std::pair<int, int>>& holes, double height = 0.5) {
  std::set<std::pair<int, int>> removed(holes.begin(), holes.end());
  auto cell_kept = [&](int i, int j) { return i >= 0 && j >= 0 && i < nx && j < ny && !removed.count({i, j}); };
  // A grid point is on the glue seam if any of its four cells is missing.
  auto seam = [&](int i, int j) {
    return !cell_kept(i - 1, j - 1) || !cell_kept(i, j - 1) || !cell_kept(i - 1, j) || !cell_kept(i, j);
  };
  std::vector<Eigen::Vector3d> pts;
  std::map<std::tuple<int, int, int>, int> id;
  auto vert = [&](int i, int j, int sheet) {
    const int s = seam(i, j) ? 0 : sheet;
    auto key = std::make_tuple(i, j, s);
    auto it = id.find(key);
    if (it != id.end()) return it->second;
    const double z = s == 0 ? 0.0 : s * height * (1.0 + 0.1 * std::sin(0.7 * i + 0.3 * j));
    pts.emplace_back(static_cast<double>(i), static_cast<double>(j), z);
    id.emplace(key, static_cast<int>(pts.size()) - 1);
    return static_cast<int>(pts.size()) - 1;
  };
  std::vector<Face> faces;
  for (int i = 0; i < nx; ++i) {
    for (int j = 0; j < ny; ++j) {
      if (!cell_kept(i, j)) continue;
      for (int sheet : {1, -1}) {
        const int a = vert(i, j, sheet), b = vert(i + 1, j, sheet), c = vert(i + 1, j + 1, sheet), d = vert(i, j + 1, sheet);
        // Alternate the diagonal so no triangle has three seam vertices.
        const bool flip = seam(i, j) && seam(i + 1, j + 1);
        if (sheet > 0) {
          if (flip) {
            faces.push_back({a, b, d});
            faces.push_back({b, c, d});
          } else {
            faces.push_back({a, b, c});
            faces.push_back({a, c, d});
          }
        } else {
          if (flip) {
            faces.push_back({a, d, b});
            faces.push_back({b, d, c});
          } else {
            faces.push_back({a, c, b});
            faces.push_back({a, d, c});
          }
        }
      }
    }
  }
  return detail::from_points(pts, std::move(faces));
}

}  // namespace cones::shapes
