#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "cones/error.hpp"
#include "cones/mesh.hpp"
#include "cones/sparse.hpp"
#include "cones/state.hpp"
#include "cones/yamabe.hpp"

namespace cones {

inline constexpr double kConvergedDistortion = 1e-9;

// h with (L h)_i = -2 (A u)_i off the pin and h_pin = 0. Needs
// sum_i A_ii u_i = 0, which holds after the optimal scale.
inline Eigen::VectorXd solve_adjoint(const PinnedSystem& sys, const Eigen::VectorXd& u, const Eigen::VectorXd& area_weights) {
  if (u.size() != sys.size() || area_weights.size() != sys.size()) throw SolverError("dimension mismatch in adjoint solve");
  const double mean = area_weights.dot(u);
  if (std::abs(mean) > 1e-9 * std::max(1.0, u.cwiseAbs().maxCoeff()))
    throw SolverError("adjoint needs area-centered u (sum A u = " + std::to_string(mean) +
                      "); re-optimize the scale a first");
  return sys.solve(Eigen::VectorXd(-2.0 * area_weights.cwiseProduct(u)));
}

// Same equation for any boundary setting; Dirichlet systems solve on the
// interior with h = 0 on the boundary.
inline Eigen::VectorXd solve_adjoint(const YamabeSystem& sys, const Eigen::VectorXd& u) {
  if (sys.kind() != YamabeSystem::Kind::Dirichlet) return solve_adjoint(sys.pinned(), u, sys.area_weights());
  return sys.solve_rhs(Eigen::VectorXd(-2.0 * sys.area_weights().cwiseProduct(u)));
}

// Variant with h = 0 imposed at every cone vertex instead of only at the
// pin; kept for comparison with the corrected equation above.
inline Eigen::VectorXd solve_adjoint_cone_dirichlet(const YamabeSystem& sys, const ConeState& cones,
                                                    const Eigen::VectorXd& u) {
  const int n = sys.size();
  std::vector<char> fixed(n, 0);
  for (const auto& c : cones.cones) fixed[c.vertex] = 1;
  if (sys.pin() >= 0) fixed[sys.pin()] = 1;
  for (int v = 0; v < n; ++v)
    if (sys.kind() == YamabeSystem::Kind::Dirichlet && sys.on_boundary()[v]) fixed[v] = 1;
  std::vector<int> index(n, -1), free;
  for (int v = 0; v < n; ++v)
    if (!fixed[v]) {
      index[v] = static_cast<int>(free.size());
      free.push_back(v);
    }
  Eigen::VectorXd h = Eigen::VectorXd::Zero(n);
  if (free.empty()) return h;
  std::vector<Triplet> trips;
  const SparseMatrix& l = sys.laplacian().matrix();
  for (int k = 0; k < l.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(l, k); it; ++it)
      if (index[it.row()] >= 0 && index[it.col()] >= 0) trips.emplace_back(index[it.row()], index[it.col()], it.value());
  SparseMatrix lf(static_cast<Eigen::Index>(free.size()), static_cast<Eigen::Index>(free.size()));
  lf.setFromTriplets(trips.begin(), trips.end());
  Eigen::VectorXd rhs(static_cast<Eigen::Index>(free.size()));
  for (std::size_t i = 0; i < free.size(); ++i) rhs[static_cast<Eigen::Index>(i)] = -2.0 * sys.area_weights()[free[i]] * u[free[i]];
  const Eigen::VectorXd x = SymmetricFactor(lf).solve(rhs);
  for (std::size_t i = 0; i < free.size(); ++i) h[free[i]] = x[static_cast<Eigen::Index>(i)];
  return h;
}

// Rate of change of E when the cone at c moves towards its neighbor w:
//   (1/(2E)) (s - du/dn * dp/dn),
// with one-sided differences along the edge (length l) and p = -h the
// multiplier of the shape derivative (p solves Delta p = -2u with the
// Laplace-Beltrami Delta = -L). The area term s = u_c^2 is the same for
// every direction and integrates to zero around a translating cone, so it
// is only included on request.
inline double directional_derivative(const Eigen::VectorXd& u, const Eigen::VectorXd& h, double E, int c, int w,
                                     const Mesh& mesh, bool cone_value_term = false) {
  if (E < kConvergedDistortion) throw SolverError("converged: distortion below the derivative threshold");
  const double len = (mesh.position(w) - mesh.position(c)).norm();
  const double du = (u[w] - u[c]) / len;
  const double dp = -(h[w] - h[c]) / len;
  const double s = cone_value_term ? u[c] * u[c] : 0.0;
  return (s - du * dp) / (2.0 * E);
}

struct MoveProposal {
  int cone = -1;    // vertex id of the cone
  int target = -1;  // neighbor vertex it moves to
  double value = 0;
};

// Per nonzero-angle cone, the neighbor with the most negative derivative
// among vertices that are neither cones nor the pin. Two cones aiming at
// the same vertex: the more negative wins, ties to the lower cone id.
inline std::vector<MoveProposal> propose_moves(const State& state, const Eigen::VectorXd& h,
                                               bool cone_value_term = false) {
  std::vector<MoveProposal> props;
  if (state.E() < kConvergedDistortion) return props;
  const Mesh& mesh = *state.mesh;
  for (const auto& c : state.cones.cones) {
    if (c.z == 0) continue;  // moving a zero-angle cone changes nothing
    MoveProposal best{c.vertex, -1, 0.0};
    for (int w : mesh.ring[c.vertex]) {
      if (state.cones.has(w) || !state.system->admissible(w)) continue;
      const double v = directional_derivative(state.eval.u, h, state.E(), c.vertex, w, mesh, cone_value_term);
      if (v < best.value || (v == best.value && best.target >= 0 && v < 0 && w < best.target)) {
        best.target = w;
        best.value = v;
      }
    }
    if (best.target >= 0 && best.value < 0) props.push_back(best);
  }
  std::map<int, MoveProposal> by_target;
  for (const auto& p : props) {
    auto it = by_target.find(p.target);
    if (it == by_target.end() || p.value < it->second.value ||
        (p.value == it->second.value && p.cone < it->second.cone))
      by_target[p.target] = p;
  }
  std::vector<MoveProposal> kept;
  for (const auto& p : props) {
    const auto& winner = by_target.at(p.target);
    if (winner.cone == p.cone) kept.push_back(p);
  }
  return kept;
}

enum class AdjointKind { Corrected, ConeDirichlet };

struct MoveOptions {
  AdjointKind adjoint = AdjointKind::Corrected;
  bool cone_value_term = false;
  int max_rounds = 100000;
  // Observes every evaluated trial: the proposals tried together, E before
  // and after; `accepted` tells whether it was kept.
  std::function<void(const std::vector<MoveProposal>&, double, double, bool)> on_trial;
};

struct MoveInfo {
  int rounds = 0;          // adjoint solves
  int accepted_steps = 0;  // accepted trials (simultaneous or single)
  int moved_hops = 0;      // total cone hops in accepted trials
  int trials = 0;
  double E_before = 0, E_after = 0;
};

namespace detail {

struct TrialMove {
  ConeState cones;
  Evaluation eval;
  std::vector<std::pair<int, Eigen::VectorXd>> new_columns;
};

// `columns` may hold precomputed responses for the targets.
inline TrialMove trial_move(const State& state, const std::vector<MoveProposal>& moves,
                            const std::map<int, Eigen::VectorXd>* columns = nullptr) {
  TrialMove t;
  t.cones = state.cones;
  Eigen::VectorXd r = state.eval.u;
  r.array() -= state.eval.a;
  for (const auto& m : moves) {
    const int i = t.cones.index_of(m.cone);
    const int z = t.cones.cones[i].z;
    Eigen::VectorXd col;
    const auto it = columns ? columns->find(m.target) : std::map<int, Eigen::VectorXd>::const_iterator{};
    if (columns && it != columns->end())
      col = it->second;
    else
      col = state.system->column(m.target);
    r += z * (col - state.map.column(m.cone));
    t.cones.cones[i].vertex = m.target;
    t.new_columns.emplace_back(m.target, std::move(col));
  }
  t.eval = state.map.finish(std::move(r));
  return t;
}

inline void adopt(State& state, TrialMove&& t) {
  for (auto& [v, col] : t.new_columns) state.map.adopt(v, std::move(col));
  state.cones = std::move(t.cones);
  state.map.sync(state.cones);
  state.eval = std::move(t.eval);
}

}  // namespace detail

// Moves cones (angles fixed) along negative derivative directions. Each
// round solves the adjoint once, tries all proposals together, and if that
// does not lower E tries them one at a time in order of decreasing
// |derivative|. Only strict decreases are kept; the loop ends after a
// round without any accepted move.
inline MoveInfo move_cones(State& state, const MoveOptions& options = {}) {
  MoveInfo info;
  info.E_before = info.E_after = state.E();
  for (int round = 0; round < options.max_rounds; ++round) {
    if (state.E() < kConvergedDistortion) break;
    const Eigen::VectorXd h = options.adjoint == AdjointKind::Corrected
                                  ? solve_adjoint(*state.system, state.eval.u)
                                  : solve_adjoint_cone_dirichlet(*state.system, state.cones, state.eval.u);
    ++info.rounds;
    std::vector<MoveProposal> props = propose_moves(state, h, options.cone_value_term);
    if (props.empty()) break;

    // Target responses for this round, solved together.
    std::map<int, Eigen::VectorXd> columns;
    {
      std::vector<int> targets;
      for (const auto& p : props) targets.push_back(p.target);
      const Eigen::MatrixXd cols = state.system->columns(targets);
      for (std::size_t k = 0; k < targets.size(); ++k) columns.emplace(targets[k], cols.col(static_cast<Eigen::Index>(k)));
    }

    bool accepted = false;
    if (props.size() > 1) {
      detail::TrialMove t = detail::trial_move(state, props, &columns);
      ++info.trials;
      const bool ok = t.eval.E < state.E();
      if (options.on_trial) options.on_trial(props, state.E(), t.eval.E, ok);
      if (ok) {
        info.moved_hops += static_cast<int>(props.size());
        detail::adopt(state, std::move(t));
        accepted = true;
      }
    }
    if (!accepted) {
      std::stable_sort(props.begin(), props.end(), [](const MoveProposal& a, const MoveProposal& b) {
        if (std::abs(a.value) != std::abs(b.value)) return std::abs(a.value) > std::abs(b.value);
        return a.cone < b.cone;
      });
      for (const auto& p : props) {
        // Earlier acceptances in this pass may have occupied the target.
        if (!state.cones.has(p.cone) || state.cones.has(p.target)) continue;
        detail::TrialMove t = detail::trial_move(state, {p}, &columns);
        ++info.trials;
        const bool ok = t.eval.E < state.E();
        if (options.on_trial) options.on_trial({p}, state.E(), t.eval.E, ok);
        if (ok) {
          ++info.moved_hops;
          detail::adopt(state, std::move(t));
          accepted = true;
          ++info.accepted_steps;
        }
      }
    } else {
      ++info.accepted_steps;
    }
    if (!accepted) break;
  }
  info.E_after = state.E();
  return info;
}

}  // namespace cones
