#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <queue>
#include <sstream>
#include <string>
#include <vector>

#include "cones/error.hpp"

namespace cones {

// min  y^T H y + 2 g^T y + c0
// s.t. lo_i <= y_i <= hi_i, y integer,
//      sum_lo <= sum(y) <= sum_hi  (only when has_sum)
struct ReducedQP {
  Eigen::MatrixXd H;
  Eigen::VectorXd g;
  double c0 = 0.0;
  std::vector<int> lo, hi;
  bool has_sum = false;
  int sum_lo = 0, sum_hi = 0;

  int size() const { return static_cast<int>(g.size()); }

  // Evaluated in one fixed order so that equal points give equal values.
  double objective(const std::vector<int>& y) const {
    const int m = size();
    double quad = 0.0;
    for (int i = 0; i < m; ++i) {
      if (y[i] == 0) continue;
      double row = 0.0;
      for (int j = 0; j < m; ++j) row += H(i, j) * y[j];
      quad += y[i] * row;
    }
    double lin = 0.0;
    for (int i = 0; i < m; ++i) lin += g[i] * y[i];
    return quad + 2.0 * lin + c0;
  }

  double objective(const Eigen::VectorXd& y) const { return y.dot(H * y) + 2.0 * g.dot(y) + c0; }

  bool feasible(const std::vector<int>& y) const {
    if (static_cast<int>(y.size()) != size()) return false;
    long sum = 0;
    for (int i = 0; i < size(); ++i) {
      if (y[i] < lo[i] || y[i] > hi[i]) return false;
      sum += y[i];
    }
    return !has_sum || (sum >= sum_lo && sum <= sum_hi);
  }
};

// CPLEX-LP-like text of an instance, for cross-checking with external
// solvers. The quadratic block uses the LP-format convention [ ... ] / 2.
inline std::string to_lp(const ReducedQP& qp) {
  std::ostringstream out;
  out.precision(17);
  out << "\\ constant term " << qp.c0 << "\nMinimize\n obj:";
  for (int i = 0; i < qp.size(); ++i) out << (2 * qp.g[i] >= 0 ? " + " : " - ") << std::abs(2 * qp.g[i]) << " y" << i;
  out << " + [";
  for (int i = 0; i < qp.size(); ++i)
    for (int j = i; j < qp.size(); ++j) {
      const double c = (i == j ? 2.0 : 4.0) * qp.H(i, j);
      out << (c >= 0 ? " + " : " - ") << std::abs(c) << " y" << i << (i == j ? "^2" : " * y" + std::to_string(j));
    }
  out << " ] / 2\nSubject To\n";
  if (qp.has_sum) {
    out << " sum_lo:";
    for (int i = 0; i < qp.size(); ++i) out << " + y" << i;
    out << " >= " << qp.sum_lo << "\n sum_hi:";
    for (int i = 0; i < qp.size(); ++i) out << " + y" << i;
    out << " <= " << qp.sum_hi << "\n";
  }
  out << "Bounds\n";
  for (int i = 0; i < qp.size(); ++i) out << " " << qp.lo[i] << " <= y" << i << " <= " << qp.hi[i] << "\n";
  out << "General\n";
  for (int i = 0; i < qp.size(); ++i) out << " y" << i;
  out << "\nEnd\n";
  return out.str();
}

struct BnbOptions {
  long node_budget = 2'000'000;
  int relaxation_iterations = 2000;
  double relaxation_tolerance = 1e-8;
  // Called once per instance before solving (debug dumps).
  std::function<void(const ReducedQP&)> on_instance;
};

struct BnbResult {
  std::vector<int> y;
  double objective = std::numeric_limits<double>::infinity();
  long nodes = 0;
  bool budget_exhausted = false;
};

namespace detail {

// Box [lo, hi] intersected with the slab sum_lo <= sum(x) <= sum_hi.
struct Region {
  Eigen::VectorXd lo, hi;
  bool has_sum = false;
  double sum_lo = 0, sum_hi = 0;

  // Euclidean projection: clip(x - tau) with tau chosen by bisection when
  // the clipped point leaves the slab.
  Eigen::VectorXd project(const Eigen::VectorXd& x) const {
    Eigen::VectorXd p = x.cwiseMax(lo).cwiseMin(hi);
    if (!has_sum) return p;
    const double s = p.sum();
    double target;
    if (s > sum_hi) target = sum_hi;
    else if (s < sum_lo) target = sum_lo;
    else return p;
    double a = (x - hi).minCoeff(), b = (x - lo).maxCoeff();  // sum(clip(x - a)) = sum(hi), sum(clip(x - b)) = sum(lo)
    for (int it = 0; it < 200 && b - a > 1e-15 * std::max(1.0, std::abs(a) + std::abs(b)); ++it) {
      const double t = 0.5 * (a + b);
      const double st = (x.array() - t).max(lo.array()).min(hi.array()).sum();
      if (st > target) a = t;
      else b = t;
    }
    return (x.array() - 0.5 * (a + b)).max(lo.array()).min(hi.array()).matrix();
  }

  // argmin c^T x over the region (greedy continuous knapsack).
  Eigen::VectorXd linear_min(const Eigen::VectorXd& c) const {
    const int m = static_cast<int>(c.size());
    Eigen::VectorXd x(m);
    for (int i = 0; i < m; ++i) x[i] = c[i] > 0 ? lo[i] : hi[i];
    if (!has_sum) return x;
    double s = x.sum();
    std::vector<int> order(m);
    for (int i = 0; i < m; ++i) order[i] = i;
    if (s > sum_hi) {
      // Decrease the coordinates that cost least to lower (largest c first).
      std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return c[a] > c[b]; });
      for (int i : order) {
        if (s <= sum_hi) break;
        const double step = std::min(x[i] - lo[i], s - sum_hi);
        x[i] -= step;
        s -= step;
      }
    } else if (s < sum_lo) {
      std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return c[a] < c[b]; });
      for (int i : order) {
        if (s >= sum_lo) break;
        const double step = std::min(hi[i] - x[i], sum_lo - s);
        x[i] += step;
        s += step;
      }
    }
    return x;
  }
};

struct Relaxation {
  Eigen::VectorXd x;
  double lower_bound = 0;
};

// Projected accelerated gradient on the convex relaxation; the returned
// bound f(x) + min_region grad^T (x' - x) is valid whether or not the
// iteration converged.
inline Relaxation relax(const ReducedQP& qp, const Region& region, Eigen::VectorXd x0, double lipschitz,
                        int max_iter, double tol) {
  auto f = [&](const Eigen::VectorXd& y) { return qp.objective(y); };
  auto grad = [&](const Eigen::VectorXd& y) -> Eigen::VectorXd { return 2.0 * (qp.H * y + qp.g); };
  auto bound_at = [&](const Eigen::VectorXd& y, double& gap) {
    const Eigen::VectorXd gr = grad(y);
    const Eigen::VectorXd s = region.linear_min(gr);
    gap = -gr.dot(s - y);
    return f(y) - gap;
  };

  Relaxation r;
  Eigen::VectorXd x = region.project(x0);
  if (!(lipschitz > 1e-300)) {
    // Linear objective: the LP vertex is optimal.
    r.x = region.linear_min(2.0 * qp.g);
    double gap = 0;
    r.lower_bound = bound_at(r.x, gap);
    return r;
  }
  const double step = 1.0 / lipschitz;
  Eigen::VectorXd y = x, x_prev = x;
  double t = 1.0;
  double best_bound = -std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_x = x;
  for (int it = 0; it < max_iter; ++it) {
    x_prev = x;
    x = region.project(y - step * grad(y));
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    y = x + ((t - 1.0) / t_next) * (x - x_prev);
    t = t_next;
    if (it % 10 == 9 || it == max_iter - 1) {
      double gap = 0;
      const double lb = bound_at(x, gap);
      if (lb > best_bound) {
        best_bound = lb;
        best_x = x;
      }
      if (gap <= tol * std::max(1.0, std::abs(f(x)))) break;
      // Restart the momentum when it stops helping.
      if ((x - x_prev).dot(y - x) > 0) {
        y = x;
        t = 1.0;
      }
    }
  }
  double gap = 0;
  const double lb = bound_at(x, gap);
  if (lb >= best_bound) {
    best_bound = lb;
    best_x = x;
  }
  r.x = best_x;
  r.lower_bound = best_bound;
  return r;
}

// Primal active-set method for the continuous relaxation over box and sum
// window. Exact up to round-off when H is positive definite on every free
// set it visits; returns nullopt otherwise (or on cycling) so the caller can
// fall back to the gradient method.
inline std::optional<Relaxation> relax_active_set(const ReducedQP& qp, const Region& region,
                                                  const Eigen::VectorXd& x0) {
  const int m = qp.size();
  Eigen::VectorXd x = region.project(x0);
  // state: 0 free, -1 at lo, +1 at hi, 2 fixed (lo == hi)
  std::vector<int> state(m, 0);
  for (int i = 0; i < m; ++i) {
    if (region.lo[i] == region.hi[i]) {
      state[i] = 2;
      x[i] = region.lo[i];
    } else if (x[i] <= region.lo[i]) {
      state[i] = -1;
      x[i] = region.lo[i];
    } else if (x[i] >= region.hi[i]) {
      state[i] = 1;
      x[i] = region.hi[i];
    }
  }
  const double sum_tol = 1e-10 * std::max(1.0, static_cast<double>(m));
  // 0 inactive, -1 sum at sum_lo, +1 at sum_hi
  int sum_state = 0;
  auto n_free = [&] { return static_cast<int>(std::count(state.begin(), state.end(), 0)); };
  if (region.has_sum && n_free() > 0) {
    const double s = x.sum();
    if (s <= region.sum_lo + sum_tol) sum_state = -1;
    else if (s >= region.sum_hi - sum_tol) sum_state = 1;
  }

  const Eigen::MatrixXd G = 2.0 * qp.H;
  const Eigen::VectorXd c = 2.0 * qp.g;
  const int max_iter = 20 * m + 50;
  for (int it = 0; it < max_iter; ++it) {
    std::vector<int> F;
    for (int i = 0; i < m; ++i)
      if (state[i] == 0) F.push_back(i);
    if (F.empty()) sum_state = 0;
    const Eigen::VectorXd grad = G * x + c;
    Eigen::VectorXd p = Eigen::VectorXd::Zero(m);
    double nu = 0;  // gradient on F equals -nu * 1 after the step
    if (!F.empty()) {
      const int k = static_cast<int>(F.size());
      Eigen::MatrixXd gff(k, k);
      Eigen::VectorXd rf(k);
      for (int a = 0; a < k; ++a) {
        rf[a] = grad[F[a]];
        for (int b = 0; b < k; ++b) gff(a, b) = G(F[a], F[b]);
      }
      const Eigen::LLT<Eigen::MatrixXd> llt(gff);
      if (llt.info() != Eigen::Success) return std::nullopt;
      Eigen::VectorXd pf = -llt.solve(rf);
      if (sum_state != 0) {
        const Eigen::VectorXd w = llt.solve(Eigen::VectorXd::Ones(k));
        nu = pf.sum() / w.sum();
        pf -= nu * w;
      }
      for (int a = 0; a < k; ++a) p[F[a]] = pf[a];
    }
    const double pscale = std::max(1.0, x.cwiseAbs().maxCoeff());
    if (p.cwiseAbs().maxCoeff() <= 1e-13 * pscale) {
      // Stationary on the working set: check multiplier signs.
      const Eigen::VectorXd gnew = grad + G * p;
      const double lam_sum = sum_state == -1 ? -nu : sum_state == 1 ? nu : 0.0;
      const double s_dir = sum_state == -1 ? 1.0 : sum_state == 1 ? -1.0 : 0.0;
      const double lam_tol = 1e-11 * std::max(1.0, gnew.cwiseAbs().maxCoeff());
      int drop = -1;
      double worst = -lam_tol;
      for (int i = 0; i < m; ++i) {
        if (state[i] != -1 && state[i] != 1) continue;
        const double resid = gnew[i] - lam_sum * s_dir;
        const double lam = state[i] == -1 ? resid : -resid;
        if (lam < worst) {
          worst = lam;
          drop = i;
        }
      }
      bool drop_sum = false;
      if (sum_state != 0 && lam_sum < worst) {
        drop_sum = true;
        drop = -1;
      }
      if (drop_sum) {
        sum_state = 0;
        continue;
      }
      if (drop < 0) {
        Relaxation r;
        r.x = x;
        const Eigen::VectorXd gr = G * x + c;
        const Eigen::VectorXd s = region.linear_min(gr);
        r.lower_bound = qp.objective(x) + std::min(0.0, gr.dot(s - x));
        return r;
      }
      state[drop] = 0;
      continue;
    }
    // Longest feasible step along p.
    double alpha = 1.0;
    int block = -1;
    bool block_sum = false;
    for (int i = 0; i < m; ++i) {
      if (state[i] != 0) continue;
      if (p[i] < 0) {
        const double t = (region.lo[i] - x[i]) / p[i];
        if (t < alpha) { alpha = t; block = i; block_sum = false; }
      } else if (p[i] > 0) {
        const double t = (region.hi[i] - x[i]) / p[i];
        if (t < alpha) { alpha = t; block = i; block_sum = false; }
      }
    }
    if (region.has_sum && sum_state == 0) {
      const double ps = p.sum(), s = x.sum();
      if (ps < 0 && std::abs(ps) > 1e-15) {
        const double t = std::max(0.0, (region.sum_lo - s) / ps);
        if (t < alpha) { alpha = t; block = -1; block_sum = true; }
      } else if (ps > 0 && std::abs(ps) > 1e-15) {
        const double t = std::max(0.0, (region.sum_hi - s) / ps);
        if (t < alpha) { alpha = t; block = -1; block_sum = true; }
      }
    }
    alpha = std::max(0.0, alpha);
    x += alpha * p;
    if (block >= 0) {
      state[block] = p[block] < 0 ? -1 : 1;
      x[block] = p[block] < 0 ? region.lo[block] : region.hi[block];
    } else if (block_sum && n_free() > 0) {
      sum_state = p.sum() < 0 ? -1 : 1;
    }
  }
  return std::nullopt;
}

struct Node {
  std::vector<int> lo, hi;
  Eigen::VectorXd warm;
  double lower_bound;
  long id;
};

struct NodeOrder {
  bool operator()(const Node& a, const Node& b) const {
    if (a.lower_bound != b.lower_bound) return a.lower_bound > b.lower_bound;
    return a.id > b.id;
  }
};

// Rounds x into the node box and repairs the sum window one unit at a time,
// moving the coordinates whose rounding lost the most first.
inline std::optional<std::vector<int>> round_and_repair(const ReducedQP& qp, const Eigen::VectorXd& x,
                                                        const std::vector<int>& lo, const std::vector<int>& hi) {
  const int m = qp.size();
  std::vector<int> y(m);
  long s = 0;
  for (int i = 0; i < m; ++i) {
    y[i] = std::clamp(static_cast<int>(std::lround(x[i])), lo[i], hi[i]);
    s += y[i];
  }
  if (qp.has_sum) {
    std::vector<int> order(m);
    for (int i = 0; i < m; ++i) order[i] = i;
    if (s < qp.sum_lo) {
      std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return x[a] - y[a] > x[b] - y[b]; });
      for (bool progress = true; s < qp.sum_lo && progress;) {
        progress = false;
        for (int i : order)
          if (s < qp.sum_lo && y[i] < hi[i]) { ++y[i]; ++s; progress = true; }
      }
    } else if (s > qp.sum_hi) {
      std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return x[a] - y[a] < x[b] - y[b]; });
      for (bool progress = true; s > qp.sum_hi && progress;) {
        progress = false;
        for (int i : order)
          if (s > qp.sum_hi && y[i] > lo[i]) { --y[i]; --s; progress = true; }
      }
    }
    if (s < qp.sum_lo || s > qp.sum_hi) return std::nullopt;
  }
  return y;
}

}  // namespace detail

// Global minimum of a ReducedQP by best-first branch and bound. A feasible
// incumbent, when supplied, seeds the upper bound.
inline BnbResult branch_and_bound(const ReducedQP& qp, const std::optional<std::vector<int>>& incumbent = {},
                                  const BnbOptions& options = {}) {
  const int m = qp.size();
  if (static_cast<int>(qp.lo.size()) != m || static_cast<int>(qp.hi.size()) != m || qp.H.rows() != m || qp.H.cols() != m)
    throw SolverError("reduced QP has inconsistent dimensions");
  if (options.on_instance) options.on_instance(qp);

  auto node_feasible = [&](const std::vector<int>& lo, const std::vector<int>& hi) {
    long slo = 0, shi = 0;
    for (int i = 0; i < m; ++i) {
      if (lo[i] > hi[i]) return false;
      slo += lo[i];
      shi += hi[i];
    }
    return !qp.has_sum || (slo <= qp.sum_hi && shi >= qp.sum_lo);
  };
  if (!node_feasible(qp.lo, qp.hi)) throw InfeasibleError("integer program has an empty feasible set");

  BnbResult best;
  auto offer = [&](const std::vector<int>& y) {
    if (!qp.feasible(y)) return;
    const double f = qp.objective(y);
    if (f < best.objective) {
      best.objective = f;
      best.y = y;
    }
  };
  if (incumbent) offer(*incumbent);
  if (m == 0) {
    best.y.clear();
    best.objective = qp.objective(best.y);
    best.nodes = 1;
    return best;
  }

  double lipschitz = 0.0;
  {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (qp.H + qp.H.transpose()), Eigen::EigenvaluesOnly);
    lipschitz = 2.0 * std::max(0.0, es.eigenvalues().maxCoeff());
  }

  auto region_of = [&](const std::vector<int>& lo, const std::vector<int>& hi) {
    detail::Region r;
    r.lo.resize(m);
    r.hi.resize(m);
    for (int i = 0; i < m; ++i) {
      r.lo[i] = lo[i];
      r.hi[i] = hi[i];
    }
    r.has_sum = qp.has_sum;
    r.sum_lo = qp.sum_lo;
    r.sum_hi = qp.sum_hi;
    return r;
  };
  auto prunable = [&](double lb) {
    return lb > best.objective - 1e-12 * std::max(1.0, std::abs(best.objective));
  };

  std::priority_queue<detail::Node, std::vector<detail::Node>, detail::NodeOrder> open;
  long next_id = 0;
  open.push({qp.lo, qp.hi, Eigen::VectorXd::Zero(m), -std::numeric_limits<double>::infinity(), next_id++});

  while (!open.empty()) {
    detail::Node node = open.top();
    open.pop();
    if (std::isfinite(best.objective) && prunable(node.lower_bound)) continue;
    if (best.nodes >= options.node_budget) {
      best.budget_exhausted = true;
      break;
    }
    ++best.nodes;

    const detail::Region region = region_of(node.lo, node.hi);
    auto exact = detail::relax_active_set(qp, region, node.warm);
    const detail::Relaxation rel =
        exact ? std::move(*exact)
              : detail::relax(qp, region, node.warm, lipschitz, options.relaxation_iterations,
                              options.relaxation_tolerance);
    if (auto y = detail::round_and_repair(qp, rel.x, node.lo, node.hi)) offer(*y);
    if (std::isfinite(best.objective) && prunable(rel.lower_bound)) continue;

    // Most fractional variable, ties to the lower index.
    int branch = -1;
    double best_frac = 1e-9;
    for (int i = 0; i < m; ++i) {
      if (node.lo[i] == node.hi[i]) continue;
      const double frac = std::abs(rel.x[i] - std::round(rel.x[i]));
      if (frac > best_frac + 1e-12) {
        best_frac = frac;
        branch = i;
      }
    }
    int split;
    if (branch >= 0) {
      split = static_cast<int>(std::floor(rel.x[branch]));
    } else {
      // Integral relaxation: shrink the box on the first free variable.
      for (int i = 0; i < m && branch < 0; ++i)
        if (node.lo[i] < node.hi[i]) branch = i;
      if (branch < 0) continue;  // leaf, already offered
      split = static_cast<int>(std::lround(rel.x[branch]));
    }
    split = std::clamp(split, node.lo[branch], node.hi[branch] - 1);

    detail::Node down{node.lo, node.hi, rel.x, rel.lower_bound, 0};
    down.hi[branch] = split;
    detail::Node up{node.lo, node.hi, rel.x, rel.lower_bound, 0};
    up.lo[branch] = split + 1;
    for (detail::Node* child : {&down, &up}) {
      if (!node_feasible(child->lo, child->hi)) continue;
      child->id = next_id++;
      open.push(std::move(*child));
    }
  }
  if (best.y.empty() && m > 0) throw InfeasibleError("no feasible integer point found");
  return best;
}

// Exhaustive minimum over all feasible points; the test oracle.
inline BnbResult enumerate_qp(const ReducedQP& qp) {
  const int m = qp.size();
  BnbResult best;
  std::vector<int> y(qp.lo);
  while (true) {
    ++best.nodes;
    if (qp.feasible(y)) {
      const double f = qp.objective(y);
      if (f < best.objective) {
        best.objective = f;
        best.y = y;
      }
    }
    int i = 0;
    while (i < m && y[i] == qp.hi[i]) {
      y[i] = qp.lo[i];
      ++i;
    }
    if (i == m) break;
    ++y[i];
  }
  if (!std::isfinite(best.objective)) throw InfeasibleError("integer program has an empty feasible set");
  return best;
}

}  // namespace cones
