#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cones/error.hpp"
#include "cones/geometry.hpp"
#include "cones/mesh.hpp"
#include "cones/sparse.hpp"

namespace cones {

inline constexpr double kHalfPi = std::numbers::pi / 2;

enum class BoundaryMode { Dirichlet, Neumann };

inline const char* to_string(BoundaryMode m) { return m == BoundaryMode::Dirichlet ? "dirichlet" : "neumann"; }

struct Cone {
  int vertex = -1;
  int z = 0;  // target curvature (pi/2) z
  bool operator==(const Cone&) const = default;
};

struct ConeState {
  std::vector<Cone> cones;
  int pin = -1;

  bool operator==(const ConeState&) const = default;
  int size() const { return static_cast<int>(cones.size()); }
  int sum_z() const {
    return std::accumulate(cones.begin(), cones.end(), 0, [](int s, const Cone& c) { return s + c.z; });
  }
  int n_nonzero() const {
    return static_cast<int>(std::count_if(cones.begin(), cones.end(), [](const Cone& c) { return c.z != 0; }));
  }
  int index_of(int vertex) const {
    for (int i = 0; i < size(); ++i)
      if (cones[i].vertex == vertex) return i;
    return -1;
  }
  bool has(int vertex) const { return index_of(vertex) >= 0; }
  std::vector<int> vertices() const {
    std::vector<int> v;
    for (const auto& c : cones) v.push_back(c.vertex);
    return v;
  }
};

// The mesh-dependent half of the discrete Yamabe problem
//   L u = (pi/2) T z - k_ori
// in one of three settings:
//   closed    : pinned full system, free global scale a;
//   dirichlet : u_B = b fixed, L_II factorized, no scale variable;
//   neumann   : pinned full system, free scale; the boundary rows absorb
//               the interior curvature change in proportion to boundary
//               dual length, so every right-hand side is compatible.
class YamabeSystem {
 public:
  enum class Kind { Closed, Dirichlet, Neumann };

  YamabeSystem() = default;

  // `pin` is used for closed and Neumann systems and ignored for Dirichlet.
  YamabeSystem(const Mesh& mesh, BoundaryMode mode, int pin, std::optional<Eigen::VectorXd> boundary_values = {})
      : n_(mesh.n_vertices()) {
    laplacian_ = cotan_laplacian(mesh);
    curvature_ = curvature_data(mesh);
    on_boundary_ = mesh.on_boundary;
    if (mesh.is_closed()) {
      kind_ = Kind::Closed;
    } else {
      kind_ = mode == BoundaryMode::Dirichlet ? Kind::Dirichlet : Kind::Neumann;
    }

    if (kind_ == Kind::Dirichlet) {
      pin_ = -1;
      interior_index_.assign(n_, -1);
      for (int v = 0; v < n_; ++v)
        if (!on_boundary_[v]) {
          interior_index_[v] = static_cast<int>(interior_.size());
          interior_.push_back(v);
        }
      b_ = boundary_values ? *boundary_values : Eigen::VectorXd::Zero(n_);
      if (b_.size() != n_) throw SolverError("boundary value vector has wrong length");
      if (!interior_.empty()) {
        std::vector<Triplet> trips;
        const SparseMatrix& l = laplacian_.matrix();
        for (int k = 0; k < l.outerSize(); ++k)
          for (SparseMatrix::InnerIterator it(l, k); it; ++it) {
            const int i = interior_index_[it.row()], j = interior_index_[it.col()];
            if (i >= 0 && j >= 0) trips.emplace_back(i, j, it.value());
          }
        SparseMatrix lii(static_cast<Eigen::Index>(interior_.size()), static_cast<Eigen::Index>(interior_.size()));
        lii.setFromTriplets(trips.begin(), trips.end());
        interior_factor_ = SymmetricFactor(lii);
      }
    } else {
      if (pin < 0 || pin >= n_) throw SolverError("pinned vertex out of range");
      pin_ = pin;
      pinned_ = PinnedSystem(laplacian_, pin);
      if (kind_ == Kind::Neumann) {
        boundary_share_ = Eigen::VectorXd::Zero(n_);
        for (int v = 0; v < n_; ++v) {
          if (!on_boundary_[v]) continue;
          // Half of each incident boundary edge.
          const int next = mesh.ring[v].front(), prev = mesh.ring[v].back();
          boundary_share_[v] = 0.5 * ((mesh.position(next) - mesh.position(v)).norm() +
                                      (mesh.position(prev) - mesh.position(v)).norm());
        }
        boundary_share_ /= boundary_share_.sum();
      }
    }
    base_ = solve_rhs(base_rhs());
    if (kind_ == Kind::Dirichlet) base_ += dirichlet_lift();
  }

  Kind kind() const { return kind_; }
  int size() const { return n_; }
  int pin() const { return pin_; }
  bool has_scale() const { return kind_ != Kind::Dirichlet; }
  // Closed meshes constrain the sum of multipliers; boundaries do not.
  bool constrains_sum() const { return kind_ == Kind::Closed; }
  const SparseSym& laplacian() const { return laplacian_; }
  const CurvatureData& curvature() const { return curvature_; }
  const Eigen::VectorXd& k_ori() const { return curvature_.k_ori; }
  const Eigen::VectorXd& area_weights() const { return curvature_.area_weights; }
  const std::vector<char>& on_boundary() const { return on_boundary_; }
  const PinnedSystem& pinned() const { return pinned_; }

  // Whether a cone may sit at v.
  bool admissible(int v) const {
    if (v < 0 || v >= n_ || v == pin_) return false;
    return !on_boundary_[v];
  }

  // Response of u to a unit multiplier at vertex v: L^{-1} M (pi/2 e_v).
  Eigen::VectorXd column(int v) const {
    if (v == pin_) throw SolverError("cone placed at the pinned vertex " + std::to_string(v));
    if (!admissible(v)) throw SolverError("vertex " + std::to_string(v) + " cannot carry a cone");
    return solve_rhs(cone_rhs(v));
  }

  // Batched columns; identical to calling column() for each vertex.
  Eigen::MatrixXd columns(const std::vector<int>& vs) const {
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(n_, static_cast<Eigen::Index>(vs.size()));
    for (std::size_t i = 0; i < vs.size(); ++i) {
      if (!admissible(vs[i])) throw SolverError("vertex " + std::to_string(vs[i]) + " cannot carry a cone");
      rhs.col(static_cast<Eigen::Index>(i)) = cone_rhs(vs[i]);
    }
    return solve_rhs(rhs);
  }

  // u for z = 0 and a = 0.
  const Eigen::VectorXd& base() const { return base_; }

  // Full right-hand side (pi/2) T z - k_ori, including the boundary
  // redistribution for Neumann systems.
  Eigen::VectorXd rhs(const ConeState& cones) const {
    Eigen::VectorXd r = base_rhs();
    for (const auto& c : cones.cones) r += c.z * cone_rhs(c.vertex);
    return r;
  }

  // Direct solve of the full system for a cone configuration, without the
  // global scale: the reference the reduced map must reproduce.
  Eigen::VectorXd solve_direct(const ConeState& cones) const {
    Eigen::VectorXd u = solve_rhs(rhs(cones));
    if (kind_ == Kind::Dirichlet) u += dirichlet_lift();
    return u;
  }

  Eigen::VectorXd solve_rhs(const Eigen::VectorXd& rhs) const {
    return solve_rhs(Eigen::MatrixXd(rhs)).col(0);
  }

  Eigen::MatrixXd solve_rhs(const Eigen::MatrixXd& rhs) const {
    if (kind_ != Kind::Dirichlet) return pinned_.solve(rhs);
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n_, rhs.cols());
    if (interior_.empty()) return out;
    Eigen::MatrixXd ri(static_cast<Eigen::Index>(interior_.size()), rhs.cols());
    for (std::size_t i = 0; i < interior_.size(); ++i) ri.row(static_cast<Eigen::Index>(i)) = rhs.row(interior_[i]);
    const Eigen::MatrixXd xi = interior_factor_.solve(ri);
    for (std::size_t i = 0; i < interior_.size(); ++i) out.row(interior_[i]) = xi.row(static_cast<Eigen::Index>(i));
    return out;
  }

  // Max-norm residual of the equations the solution must satisfy: all rows
  // but the pin (closed, Neumann) or the interior rows (Dirichlet).
  double residual(const ConeState& cones, const Eigen::VectorXd& u) const {
    Eigen::VectorXd r = laplacian_.matrix() * u - rhs(cones);
    if (kind_ == Kind::Dirichlet) {
      // rhs() carries -L_IB b, which L u already contains.
      r -= laplacian_.matrix() * boundary_part(b_);
      double m = 0;
      for (int v : interior_) m = std::max(m, std::abs(r[v]));
      for (int v = 0; v < n_; ++v)
        if (on_boundary_[v]) m = std::max(m, std::abs(u[v] - b_[v]));
      return m;
    }
    r[pin_] = 0;
    return r.cwiseAbs().maxCoeff();
  }

 private:
  Eigen::VectorXd cone_rhs(int v) const {
    Eigen::VectorXd r = Eigen::VectorXd::Zero(n_);
    r[v] = kHalfPi;
    if (kind_ == Kind::Neumann) r -= kHalfPi * boundary_share_;
    return r;
  }

  Eigen::VectorXd base_rhs() const {
    Eigen::VectorXd r = -curvature_.k_ori;
    if (kind_ == Kind::Neumann) {
      double interior = 0;
      for (int v = 0; v < n_; ++v) {
        if (on_boundary_[v]) r[v] = 0;
        else interior += curvature_.k_ori[v];
      }
      r += interior * boundary_share_;
    } else if (kind_ == Kind::Dirichlet) {
      // -L_IB b on interior rows.
      const Eigen::VectorXd lb = laplacian_.matrix() * boundary_part(b_);
      for (int v = 0; v < n_; ++v)
        if (!on_boundary_[v]) r[v] -= lb[v];
    }
    return r;
  }

  Eigen::VectorXd boundary_part(const Eigen::VectorXd& x) const {
    Eigen::VectorXd y = Eigen::VectorXd::Zero(n_);
    for (int v = 0; v < n_; ++v)
      if (on_boundary_[v]) y[v] = x[v];
    return y;
  }

  Eigen::VectorXd dirichlet_lift() const { return boundary_part(b_); }

  Kind kind_ = Kind::Closed;
  int n_ = 0;
  int pin_ = -1;
  SparseSym laplacian_;
  CurvatureData curvature_;
  std::vector<char> on_boundary_;
  PinnedSystem pinned_;
  std::vector<int> interior_, interior_index_;
  SymmetricFactor interior_factor_;
  Eigen::VectorXd b_, boundary_share_, base_;
};

// a* = -sum_i A_ii r_i, the minimizer of ||A^{1/2}(r + a 1)||^2.
inline double optimal_scale(const Eigen::VectorXd& r, const Eigen::VectorXd& area_weights) {
  return -area_weights.dot(r);
}

// E = sqrt(u^T A u).
inline double distortion(const Eigen::VectorXd& u, const Eigen::VectorXd& area_weights) {
  return std::sqrt(std::max(0.0, u.dot(area_weights.cwiseProduct(u))));
}

struct Evaluation {
  Eigen::VectorXd u;
  double a = 0.0;
  double E = 0.0;
};

// Columns G of the reduced map u(z, a) = G z + d + a 1, kept for the current
// cone vertices. Columns are cached per vertex: moving a cone recomputes one
// column, and a change of more than 25% in the cone count rebuilds the block.
class ReducedMap {
 public:
  ReducedMap() = default;
  explicit ReducedMap(const YamabeSystem& system) : system_(&system) {}
  ReducedMap(const YamabeSystem& system, const ConeState& cones) : system_(&system) { sync(cones); }

  const YamabeSystem& system() const { return *system_; }
  const Eigen::VectorXd& d() const { return system_->base(); }
  int column_solves() const { return column_solves_; }
  int rebuilds() const { return rebuilds_; }

  // Makes the cached columns match the cone vertices of `cones`.
  void sync(const ConeState& cones) {
    const auto vs = cones.vertices();
    // Size of the previously synced cone set (adopted extras not counted).
    const double old_count = columns_.empty() ? 0.0 : static_cast<double>(synced_count_);
    synced_count_ = static_cast<int>(vs.size());
    const double delta = std::abs(static_cast<double>(vs.size()) - old_count);
    if (old_count == 0 || delta > 0.25 * old_count) {
      columns_.clear();
      if (!vs.empty()) {
        const Eigen::MatrixXd block = system_->columns(vs);
        for (std::size_t i = 0; i < vs.size(); ++i) columns_[vs[i]] = block.col(static_cast<Eigen::Index>(i));
        column_solves_ += static_cast<int>(vs.size());
      }
      ++rebuilds_;
      return;
    }
    std::map<int, Eigen::VectorXd> next;
    std::vector<int> missing;
    for (int v : vs) {
      auto it = columns_.find(v);
      if (it != columns_.end())
        next[v] = std::move(it->second);
      else
        missing.push_back(v);
    }
    if (!missing.empty()) {
      const Eigen::MatrixXd block = system_->columns(missing);
      for (std::size_t i = 0; i < missing.size(); ++i) next[missing[i]] = block.col(static_cast<Eigen::Index>(i));
      column_solves_ += static_cast<int>(missing.size());
    }
    columns_ = std::move(next);
  }

  bool has_column(int v) const { return columns_.count(v) > 0; }

  // Stores a column computed elsewhere (e.g. for an accepted trial move) so
  // the next sync() does not solve for it again.
  void adopt(int v, Eigen::VectorXd col) { columns_[v] = std::move(col); }

  const Eigen::VectorXd& column(int v) const {
    auto it = columns_.find(v);
    if (it == columns_.end()) throw SolverError("no cached column for vertex " + std::to_string(v));
    return it->second;
  }

  // Dense G in the order of `cones`.
  Eigen::MatrixXd matrix(const ConeState& cones) const {
    Eigen::MatrixXd g(system_->size(), cones.size());
    for (int i = 0; i < cones.size(); ++i) g.col(i) = column(cones.cones[i].vertex);
    return g;
  }

  // r = G z + d (before the scale).
  Eigen::VectorXd residual_part(const ConeState& cones) const {
    Eigen::VectorXd r = d();
    for (const auto& c : cones.cones)
      if (c.z != 0) r += c.z * column(c.vertex);
    return r;
  }

  Evaluation evaluate(const ConeState& cones) const { return finish(residual_part(cones)); }

  // Applies the optimal scale (when the system has one) and measures E.
  Evaluation finish(Eigen::VectorXd r) const {
    Evaluation e;
    if (system_->has_scale()) {
      e.a = optimal_scale(r, system_->area_weights());
      r.array() += e.a;
    }
    e.E = distortion(r, system_->area_weights());
    e.u = std::move(r);
    return e;
  }

 private:
  const YamabeSystem* system_ = nullptr;
  std::map<int, Eigen::VectorXd> columns_;
  int column_solves_ = 0;
  int rebuilds_ = 0;
  int synced_count_ = 0;
};

// u for a cone configuration on a mesh with boundary and Dirichlet values b
// (zero when omitted). No global scale is applied.
inline Eigen::VectorXd dirichlet_solve(const Mesh& mesh, const ConeState& cones,
                                       std::optional<Eigen::VectorXd> b = {}) {
  if (mesh.is_closed()) throw SolverError("dirichlet_solve requires a mesh with boundary");
  const YamabeSystem sys(mesh, BoundaryMode::Dirichlet, -1, std::move(b));
  for (const auto& c : cones.cones)
    if (!sys.admissible(c.vertex)) throw SolverError("cone on a boundary vertex " + std::to_string(c.vertex));
  return sys.solve_direct(cones);
}

struct NeumannSolution {
  Eigen::VectorXd u;  // pinned: u[pin] = 0
  Eigen::VectorXd h;  // boundary slack rhs_B - (L u)_B; zero on interior vertices
};

// Full interior+boundary system with explicit boundary target curvature
// k_B^tar (indexed by vertex; interior entries ignored). Pins `pin`
// (default: the first boundary vertex).
inline NeumannSolution neumann_solve(const Mesh& mesh, const ConeState& cones, const Eigen::VectorXd& k_tar_boundary,
                                     std::optional<int> pin = {}) {
  if (mesh.is_closed()) throw SolverError("neumann_solve requires a mesh with boundary");
  const int n = mesh.n_vertices();
  if (k_tar_boundary.size() != n) throw SolverError("boundary target curvature has wrong length");
  const Eigen::VectorXd k = angle_defects(mesh);
  Eigen::VectorXd rhs = -k;
  for (const auto& c : cones.cones) {
    if (mesh.on_boundary[c.vertex]) throw SolverError("cone on a boundary vertex " + std::to_string(c.vertex));
    rhs[c.vertex] += kHalfPi * c.z;
  }
  for (int v = 0; v < n; ++v)
    if (mesh.on_boundary[v]) rhs[v] = k_tar_boundary[v] - k[v];
  const double tol = 1e-9 * std::max(1.0, rhs.cwiseAbs().sum());
  if (std::abs(rhs.sum()) > tol)
    throw InfeasibleError("incompatible Neumann right-hand side: total curvature change " + std::to_string(rhs.sum()) +
                          " is not zero");
  int p = pin.value_or(-1);
  if (p < 0)
    for (int v = 0; v < n && p < 0; ++v)
      if (mesh.on_boundary[v]) p = v;
  const SparseSym l = cotan_laplacian(mesh);
  const PinnedSystem sys(l, p);
  NeumannSolution s;
  s.u = sys.solve(rhs);
  const Eigen::VectorXd r = rhs - l.matrix() * s.u;
  s.h = Eigen::VectorXd::Zero(n);
  for (int v = 0; v < n; ++v)
    if (mesh.on_boundary[v]) s.h[v] = r[v];
  return s;
}

}  // namespace cones
