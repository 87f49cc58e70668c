// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "cones/cones.hpp"
#include "cones/shapes.hpp"

using namespace cones;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      if (!detail.empty()) detail += "; ";
      detail += what;
    }
  }
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::vector<int> clustered(const Mesh& m, int count, int spacing) {
  const auto d = bfs_distances(m, {0});
  std::vector<int> order(m.n_vertices());
  for (int i = 0; i < m.n_vertices(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return d[a] < d[b]; });
  std::vector<int> out;
  for (int k = 0; k < count; ++k) out.push_back(order[k * spacing]);
  return out;
}

int numeric_rank(const Eigen::MatrixXd& a) {
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
  const auto& s = svd.singularValues();
  int r = 0;
  for (int i = 0; i < s.size(); ++i) r += s[i] > 1e-9 * s[0];
  return r;
}

// ---------------------------------------------------------------------------

Outcome cube_certificate() {
  Outcome o;
  const Mesh m = shapes::cube(10);
  const Eigen::VectorXd k = angle_defects(m);
  const auto t0 = Clock::now();
  const SolveReport r = run_pipeline(m, Config{});
  const double t = seconds_since(t0);
  int corners = 0;
  for (const auto& c : r.cones) corners += std::abs(k[c.vertex] - std::numbers::pi / 2) < 1e-12 && c.z == 1;
  o.require(r.cones.size() == 8 && corners == 8, fmt("%zu cones, %d at corners with z=1", r.cones.size(), corners));
  o.require(r.distortion <= 1e-6, fmt("E=%.3g", r.distortion));
  o.require(t <= 5.0, fmt("%.2fs", t));
  o.detail = fmt("N=%d cones=%zu corners=%d E=%.2e time=%.3fs", m.n_vertices(), r.cones.size(), corners, r.distortion, t) +
             (o.detail.empty() ? "" : " | " + o.detail);
  return o;
}

Outcome gauss_bonnet() {
  Outcome o;
  const std::vector<std::pair<std::string, Mesh>> meshes{
      {"tetrahedron", shapes::tetrahedron()},
      {"cube", shapes::cube(10)},
      {"icosphere", shapes::icosphere(16)},
      {"blob", shapes::blob(10)},
      {"flat_disk", shapes::flat_disk(8)},
      {"hemisphere", shapes::hemisphere(12)},
      {"flat_torus", shapes::flat_torus(8, 8)},
      {"ring_torus", shapes::ring_torus(40, 20, 1.0, 0.4, 0.2)},
      {"double_torus", shapes::pillow(10, 10, {{2, 2}, {6, 6}})},
  };
  double worst = 0;
  for (const auto& [name, m] : meshes) {
    const Eigen::VectorXd k = angle_defects(m);
    const double expect = 2 * std::numbers::pi * topology(m).euler_characteristic;
    const double err = std::abs(k.sum() - expect) / std::max(std::abs(expect), 2 * std::numbers::pi);
    worst = std::max(worst, err);
    o.require(err <= 1e-9, name + fmt(" defect sum off by %.2g", err));
  }
  int events = 0;
  for (const auto& [name, m] : meshes) {
    if (!m.is_closed() || name == "tetrahedron") continue;
    Config c;
    c.max_iter = 10;
    const int target = 8 * (1 - topology(m).genus);
    const SolveReport r = run_pipeline(m, c);
    for (const auto& e : r.trace) {
      ++events;
      o.require(e.sum_z == target, name + fmt(" event %s has sum_z=%d", e.event.c_str(), e.sum_z));
    }
    o.require(r.audit.sum_z == target, name + " final sum");
  }
  o.detail = fmt("%zu meshes, worst relative defect error %.1e, %d closed-mesh events audited", meshes.size(), worst,
                 events) +
             (o.detail.empty() ? "" : " | " + o.detail);
  return o;
}

Outcome reduced_solve() {
  Outcome o;
  const Mesh m = shapes::icosphere(10);
  const int pin = 0;
  const YamabeSystem sys(m, BoundaryMode::Dirichlet, pin);
  const Eigen::MatrixXd l(sys.laplacian().matrix());
  std::mt19937 rng(31);
  std::uniform_int_distribution<int> vert(0, m.n_vertices() - 1), count(10, 40), zd(-1, 1);
  double worst_res = 0, worst_e = 0;
  ReducedMap map(sys);
  for (int trial = 0; trial < 20; ++trial) {
    ConeState s;
    s.pin = pin;
    const int n = count(rng);
    while (s.size() < n) {
      const int v = vert(rng);
      if (v != pin && !s.has(v)) s.cones.push_back({v, zd(rng)});
    }
    // Shift multipliers inside [-2, 2] until the sum is 8.
    while (s.sum_z() != 8) {
      auto& c = s.cones[rng() % s.size()];
      const int step = s.sum_z() < 8 ? 1 : -1;
      if (std::abs(c.z + step) <= 2) c.z += step;
    }
    map.sync(s);
    const Evaluation e = map.evaluate(s);
    // Every row, pin included: L u - (pi/2) T z + k_ori.
    Eigen::VectorXd tz = Eigen::VectorXd::Zero(m.n_vertices());
    for (const auto& c : s.cones) tz[c.vertex] = c.z;
    const double res = (l * e.u - kHalfPi * tz + sys.k_ori()).cwiseAbs().maxCoeff();
    Eigen::VectorXd direct = sys.solve_direct(s);
    direct.array() += optimal_scale(direct, sys.area_weights());
    const double de = std::abs(e.E - distortion(direct, sys.area_weights()));
    worst_res = std::max(worst_res, res);
    worst_e = std::max(worst_e, de);
    o.require(res <= 1e-8, fmt("trial %d residual %.2g", trial, res));
    o.require(de <= 1e-10, fmt("trial %d |dE| %.2g", trial, de));
  }
  o.detail = fmt("N=%d, 20 configs, max residual %.1e, max |E-E_direct| %.1e", m.n_vertices(), worst_res, worst_e) +
             (o.detail.empty() ? "" : " | " + o.detail);
  return o;
}

ReducedQP random_qp(int m, int lo, int hi, std::mt19937& rng, bool with_sum) {
  std::normal_distribution<double> g;
  std::uniform_int_distribution<int> rows(1, 2 * m);
  const int r = rows(rng);
  Eigen::MatrixXd b(r, m);
  for (auto& x : b.reshaped()) x = g(rng);
  Eigen::VectorXd d(r);
  for (auto& x : d) x = 2.0 * g(rng);
  ReducedQP qp;
  qp.H = b.transpose() * b;
  qp.g = b.transpose() * d;
  qp.c0 = d.squaredNorm();
  qp.lo.assign(m, lo);
  qp.hi.assign(m, hi);
  if (with_sum) {
    std::uniform_int_distribution<int> s(m * lo, m * hi);
    qp.has_sum = true;
    qp.sum_lo = qp.sum_hi = s(rng);
  }
  return qp;
}

Outcome miqp_optimality() {
  Outcome o;
  std::mt19937 rng(8);
  double slowest = 0;
  int solved = 0;
  auto check = [&](int trial, int m, int lo, int hi) {
    const ReducedQP qp = random_qp(m, lo, hi, rng, trial % 2 == 0);
    const auto t0 = Clock::now();
    const BnbResult res = branch_and_bound(qp);
    const double t = seconds_since(t0);
    slowest = std::max(slowest, t);
    const BnbResult ref = enumerate_qp(qp);
    ++solved;
    o.require(res.objective == ref.objective,
              fmt("[%d,%d] trial %d: %.17g vs %.17g", lo, hi, trial, res.objective, ref.objective));
    o.require(t <= 1.0, fmt("trial %d took %.2fs", trial, t));
  };
  for (int trial = 0; trial < 50; ++trial) check(trial, 1 + trial % 8, -1, 1);
  for (int trial = 0; trial < 10; ++trial) check(trial, 1 + trial % 5, -3, 3);
  o.detail = fmt("%d instances equal to enumeration, slowest %.4fs", solved, slowest) +
             (o.detail.empty() ? "" : " | " + o.detail);
  return o;
}

Outcome monotonicity() {
  Outcome o;
  const std::vector<std::pair<std::string, Mesh>> meshes{
      {"cube", shapes::cube(10)}, {"icosphere", shapes::icosphere(16)}, {"blob", shapes::blob(22)}};
  // Defaults first; the tight target with a small cap keeps the loop running
  // long enough to exercise relocation and removals.
  std::string summary;
  for (const auto& [name, m] : meshes) {
    for (const auto& [eps, cap] : {std::pair{0.2, 1000}, std::pair{0.05, 12}}) {
      Config c;
      c.epsilon_tar = eps;
      c.max_iter = cap;
      const SolveReport r = run_pipeline(m, c);
      double eta = r.config.eta0;
      int removals = 0, checked = 0;
      for (std::size_t i = 1; i < r.trace.size(); ++i) {
        const auto& prev = r.trace[i - 1];
        const auto& e = r.trace[i];
        if (e.event == "solve_angles" || e.event == "move_cones") {
          ++checked;
          o.require(e.E <= prev.E, name + fmt(" %s raised E %.12g -> %.12g", e.event.c_str(), prev.E, e.E));
        } else if (e.event == "remove_pairs") {
          ++removals;
          o.require(e.eta == eta, name + fmt(" eta %.12g expected %.12g", e.eta, eta));
          o.require((e.E - prev.E) / prev.E < e.eta, name + " removal increase above eta");
          eta *= 0.9;
        }
      }
      summary += fmt("%s(N=%d, eps=%.2f): %d events, %d removals, E=%.3f; ", name.c_str(), m.n_vertices(), eps, checked,
                     removals, r.distortion);
    }
  }
  o.detail = summary + (o.detail.empty() ? "" : "| " + o.detail);
  return o;
}

Outcome adjoint() {
  Outcome o;
  double worst = 0, worst_shift = 0;
  for (const Mesh& m : {shapes::tetrahedron(), shapes::icosphere(6), shapes::blob(6)}) {
    const int n = m.n_vertices();
    o.require(n <= 500, "mesh too large for dense oracle");
    const int pin = n - 1;
    const YamabeSystem sys(m, BoundaryMode::Dirichlet, pin);
    const Eigen::VectorXd& w = sys.area_weights();
    const Eigen::MatrixXd l(sys.laplacian().matrix());
    std::mt19937 rng(n);
    std::normal_distribution<double> g;
    for (int trial = 0; trial < 5; ++trial) {
      Eigen::VectorXd u(n);
      for (auto& x : u) x = g(rng);
      u.array() += optimal_scale(u, w);
      const Eigen::VectorXd h = solve_adjoint(sys, u);
      // Dense oracle: pinned system solved by LDLT.
      Eigen::MatrixXd lp = l;
      lp.row(pin).setZero();
      lp.col(pin).setZero();
      lp(pin, pin) = 1.0;
      Eigen::VectorXd rhs = -2.0 * w.cwiseProduct(u);
      rhs[pin] = 0;
      const Eigen::VectorXd x = lp.ldlt().solve(rhs);
      const double res = (l * h + 2.0 * w.cwiseProduct(u)).cwiseAbs().maxCoeff();
      const double diff = (x - h).cwiseAbs().maxCoeff();
      worst = std::max({worst, res, diff});
      o.require(res <= 1e-8, fmt("N=%d residual %.2g", n, res));
      o.require(diff <= 1e-8, fmt("N=%d differs from dense by %.2g", n, diff));
    }
  }
  // Ranking invariance under h + c on a clustered configuration.
  const Mesh m = shapes::icosphere(8);
  const YamabeSystem sys(m, BoundaryMode::Dirichlet, m.n_vertices() - 1);
  State st(m, sys, {}, 8);
  for (int v : clustered(m, 8, 3)) st.cones.cones.push_back({v, 1});
  st.refresh();
  const Eigen::VectorXd h = solve_adjoint(sys, st.eval.u);
  const auto base = propose_moves(st, h);
  o.require(!base.empty(), "no proposals");
  for (double c : {-7.0, 0.5, 40.0}) {
    const auto shifted = propose_moves(st, Eigen::VectorXd(h.array() + c));
    bool same = shifted.size() == base.size();
    for (std::size_t i = 0; same && i < base.size(); ++i) {
      same = base[i].cone == shifted[i].cone && base[i].target == shifted[i].target;
      worst_shift = std::max(worst_shift, std::abs(base[i].value - shifted[i].value) / std::abs(base[i].value));
    }
    o.require(same, fmt("proposals change under h+%.1f", c));
  }
  o.detail = fmt("max residual/oracle gap %.1e, %zu proposals invariant under 3 shifts (rel. value drift %.1e)", worst,
                 base.size(), worst_shift) +
             (o.detail.empty() ? "" : " | " + o.detail);
  return o;
}

Outcome predictiveness() {
  Outcome o;
  const Mesh m = shapes::icosphere(16);
  const YamabeSystem sys(m, BoundaryMode::Dirichlet, m.n_vertices() - 1);
  const auto start = clustered(m, 8, 4);
  auto seeded = [&] {
    State st(m, sys, {}, 8);
    for (int v : start) st.cones.cones.push_back({v, 1});
    st.refresh();
    return st;
  };
  // Every single-cone hop proposed in a round is re-solved on its own; the
  // round itself then proceeds through move_cones.
  State st = seeded();
  const double E0 = st.E();
  int hops = 0, decreasing = 0, rounds = 0;
  while (true) {
    const auto props = propose_moves(st, solve_adjoint(sys, st.eval.u));
    for (const auto& p : props) {
      const auto trial = detail::trial_move(st, {p});
      ++hops;
      decreasing += trial.eval.E < st.E();
    }
    MoveOptions mo;
    mo.max_rounds = 1;
    ++rounds;
    if (move_cones(st, mo).moved_hops == 0) break;
  }
  const double rate = hops ? static_cast<double>(decreasing) / hops : 0.0;
  o.require(hops > 0, "no hops proposed");
  o.require(rate >= 0.7, fmt("decrease rate %.3f", rate));

  auto stuck_after = [&](AdjointKind kind) {
    State s = seeded();
    MoveOptions mo;
    mo.adjoint = kind;
    move_cones(s, mo);
    int stuck = 0;
    for (int v : start) stuck += s.cones.has(v);
    return std::make_pair(stuck, s.E());
  };
  const auto corrected = stuck_after(AdjointKind::Corrected);
  const auto variant = stuck_after(AdjointKind::ConeDirichlet);
  o.require(variant.first >= 1, "variant moved every cone");
  o.require(corrected.first < variant.first, "corrected equation leaves as many cones stuck");
  o.detail = fmt("%d/%d hops decrease E (%.1f%%) over %d rounds, E %.4f -> %.4f; stuck cones: corrected %d (E=%.4f), "
                 "cone-Dirichlet variant %d (E=%.4f)",
                 decreasing, hops, 100 * rate, rounds, E0, st.E(), corrected.first, corrected.second, variant.first,
                 variant.second) +
             (o.detail.empty() ? "" : " | " + o.detail);
  return o;
}

Outcome boundary_modes() {
  Outcome o;
  const SolveReport disk = run_pipeline(shapes::flat_disk(8), Config{});
  o.require(disk.cones.empty(), fmt("disk has %zu cones", disk.cones.size()));
  o.require(disk.distortion == 0.0 || disk.distortion <= 1e-12, fmt("disk E=%.3g", disk.distortion));
  const Mesh cap = shapes::hemisphere(12);
  const SolveReport hemi = run_pipeline(cap, Config{});
  o.require(hemi.distortion <= 0.2, fmt("hemisphere E=%.3g", hemi.distortion));
  o.require(!hemi.audit.sum_target.has_value(), "hemisphere sum was constrained");
  o.detail = fmt("disk: %zu cones E=%.1e; hemisphere(N=%d): %zu cones, sum z=%d, E=%.4f", disk.cones.size(),
                 disk.distortion, cap.n_vertices(), hemi.cones.size(), hemi.audit.sum_z, hemi.distortion) +
             (o.detail.empty() ? "" : " | " + o.detail);
  return o;
}

Outcome high_genus() {
  Outcome o;
  {
    const Mesh m = shapes::flat_torus(8, 8);
    const HomologyBasis basis = homology_loops(m);
    o.require(basis.loops.size() == 2, fmt("%zu loops", basis.loops.size()));
    const CutMesh cut = cut_mesh(m, basis);
    o.require(cut.n_variables() == m.n_vertices() + 2, fmt("%d variables", cut.n_variables()));
    const HolonomySystem sys = assemble_system(cut, ConeState{}, angle_defects(m));
    const int np = sys.n_variables();
    const double null = (sys.Lg * Eigen::VectorXd::Ones(np)).cwiseAbs().maxCoeff();
    o.require(null <= 1e-12, fmt("|Lg 1|=%.2g", null));
    const int rank = numeric_rank(Eigen::MatrixXd(sys.Lg));
    o.require(rank == m.n_vertices() + 1, fmt("rank %d", rank));
    const HolonomySolution sol = solve_holonomy(sys);
    o.require(sol.r == std::vector<int>{0, 0}, "r != (0,0)");
    o.require(sol.E <= 1e-8 && sol.E_dif <= 1e-8, fmt("flat E=%.2g E_dif=%.2g", sol.E, sol.E_dif));
    o.detail = fmt("grid torus: 2 loops, N'=N+2, |Lg 1|=%.1e, rank=N+1, r=(0,0), E=%.1e; ", null, sol.E);
  }
  const Mesh m = shapes::ring_torus(40, 20, 1.0, 0.4, 0.2);
  const SolveReport rep = run_pipeline(m, Config{});
  o.require(rep.holonomy.has_value(), "pipeline skipped holonomy");
  const Eigen::VectorXd k = angle_defects(m);
  ConeState cones;
  cones.cones = rep.cones;
  const CutMesh cut = cut_mesh(m, homology_loops(m));
  const HolonomySystem sys = assemble_system(cut, cones, k);
  const HolonomySolution sol = solve_holonomy(sys);
  const double tol = 1e-8 * std::max(1.0, k.cwiseAbs().maxCoeff());
  o.require(sol.residual <= tol, fmt("holonomy residual %.2g", sol.residual));
  const BnbResult ref = enumerate_qp(sol.qp);
  o.require(ref.nodes == 25, fmt("%ld enumeration points", ref.nodes));
  o.require(sol.qp.objective(sol.r) == ref.objective, "search differs from enumeration");
  o.detail += fmt("curved torus(N=%d): %zu cones, residual %.1e, r=(%d,%d) equals 25-point enumeration, E=%.4f, "
                  "E_dif=%.1e",
                  m.n_vertices(), rep.cones.size(), sol.residual, sol.r[0], sol.r[1], sol.E, sol.E_dif);
  return o;
}

Outcome scaling() {
  Outcome o;
  std::vector<double> logn, logt;
  std::string summary;
  for (int n : {16, 32, 64}) {
    const Mesh m = shapes::icosphere(n);
    Config c;
    c.epsilon_tar = 0.2;
    const auto t0 = Clock::now();
    const SolveReport r = run_pipeline(m, c);
    const double t = seconds_since(t0);
    const double per = t / (r.iterations + 1);
    o.require(r.reached_target, fmt("N=%d stopped at E=%.3f", m.n_vertices(), r.distortion));
    logn.push_back(std::log(m.n_vertices()));
    logt.push_back(std::log(per));
    summary += fmt("N=%d: %.2fs, %d it, %.3fs/it; ", m.n_vertices(), t, r.iterations, per);
  }
  // Least-squares slope in log-log.
  const double mn = (logn[0] + logn[1] + logn[2]) / 3, mt = (logt[0] + logt[1] + logt[2]) / 3;
  double num = 0, den = 0;
  for (int i = 0; i < 3; ++i) {
    num += (logn[i] - mn) * (logt[i] - mt);
    den += (logn[i] - mn) * (logn[i] - mn);
  }
  const double slope = num / den;
  o.require(slope <= 1.6, fmt("slope %.2f", slope));
  o.detail = summary + fmt("slope %.2f", slope) + (o.detail.empty() ? "" : " | " + o.detail);
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"exact-flat cube", cube_certificate},
      {"Gauss-Bonnet audits", gauss_bonnet},
      {"reduced solve", reduced_solve},
      {"MIQP optimality", miqp_optimality},
      {"monotonicity", monotonicity},
      {"adjoint", adjoint},
      {"gradient predictiveness", predictiveness},
      {"boundary modes", boundary_modes},
      {"high genus", high_genus},
      {"scale behavior", scaling},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    const auto t0 = Clock::now();
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    failed += !o.pass;
    std::printf("%s criterion %zu (%s) [%.1fs]: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                seconds_since(t0), o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
