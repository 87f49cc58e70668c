#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <random>

#include "cones/geometry.hpp"
#include "cones/shapes.hpp"
#include "cones/yamabe.hpp"

using namespace cones;

namespace {

std::vector<int> high_defect_vertices(const Mesh& m) {
  const Eigen::VectorXd k = angle_defects(m);
  std::vector<int> out;
  for (int v = 0; v < m.n_vertices(); ++v)
    if (k[v] > 1.0) out.push_back(v);
  return out;
}

ConeState corner_cones(const Mesh& m, int pin) {
  ConeState s;
  s.pin = pin;
  for (int v : high_defect_vertices(m)) s.cones.push_back({v, 1});
  return s;
}

int far_vertex(const Mesh& m, const std::vector<int>& from) {
  const auto d = bfs_distances(m, from);
  return static_cast<int>(std::max_element(d.begin(), d.end()) - d.begin());
}

// Dense full Laplacian.
Eigen::MatrixXd dense_laplacian(const Mesh& m) { return Eigen::MatrixXd(cotan_laplacian(m).matrix()); }

// Minimizer of a unimodal f on [lo, hi].
template <class F>
double golden_section(F f, double lo, double hi) {
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - phi * (b - a), d = a + phi * (b - a);
  double fc = f(c), fd = f(d);
  for (int it = 0; it < 200 && b - a > 1e-13; ++it) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + phi * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

}  // namespace

TEST(ReducedMap, ZeroConesIsBase) {
  const Mesh m = shapes::icosphere(4);
  const YamabeSystem sys(m, BoundaryMode::Dirichlet, 0);
  const ConeState none{{}, 0};
  const ReducedMap map(sys, none);
  EXPECT_LT((map.residual_part(none) - sys.base()).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LT((sys.solve_direct(none) - sys.base()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ReducedMap, CubeCornersGiveZero) {
  const Mesh m = shapes::cube(8);
  const auto corners = high_defect_vertices(m);
  ASSERT_EQ(corners.size(), 8u);
  const int pin = far_vertex(m, corners);
  const YamabeSystem sys(m, BoundaryMode::Dirichlet, pin);
  const ConeState cones = corner_cones(m, pin);
  const ReducedMap map(sys, cones);
  EXPECT_LE(map.residual_part(cones).cwiseAbs().maxCoeff(), 1e-9);
  const Evaluation e = map.evaluate(cones);
  EXPECT_LE(e.E, 1e-6);
}

TEST(ReducedMap, MovingOneConeSolvesOneColumn) {
  const Mesh m = shapes::icosphere(6);
  const YamabeSystem sys(m, BoundaryMode::Dirichlet, 0);
  ConeState cones{{{10, 1}, {50, 1}, {90, 1}, {130, 1}, {170, 1}, {210, 1}, {250, 1}, {300, 1}}, 0};
  ReducedMap map(sys, cones);
  const Eigen::VectorXd before = map.column(50);
  const int solves = map.column_solves(), rebuilds = map.rebuilds();
  cones.cones[0].vertex = m.ring[10].front();
  map.sync(cones);
  EXPECT_EQ(map.column_solves(), solves + 1);
  EXPECT_EQ(map.rebuilds(), rebuilds);
  EXPECT_EQ(map.column(50), before);
}

TEST(ReducedMap, LargeCountChangeRebuilds) {
  const Mesh m = shapes::icosphere(6);
  const YamabeSystem sys(m, BoundaryMode::Dirichlet, 0);
  ConeState cones{{{10, 0}, {50, 0}, {90, 0}, {130, 0}}, 0};
  ReducedMap map(sys, cones);
  EXPECT_EQ(map.rebuilds(), 1);
  cones.cones.push_back({170, 0});  // +25%: incremental
  map.sync(cones);
  EXPECT_EQ(map.rebuilds(), 1);
  cones.cones.push_back({210, 0});
  cones.cones.push_back({250, 0});  // +40%: rebuild
  map.sync(cones);
  EXPECT_EQ(map.rebuilds(), 2);
  for (const auto& c : cones.cones)
    EXPECT_LT((map.column(c.vertex) - sys.column(c.vertex)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ReducedMap, MatchesDirectSolve) {
  const Mesh m = shapes::icosphere(8);
  const YamabeSystem sys(m, BoundaryMode::Dirichlet, 3);
  std::mt19937 rng(7);
  std::uniform_int_distribution<int> vert(0, m.n_vertices() - 1), zd(-2, 2);
  for (int trial = 0; trial < 5; ++trial) {
    ConeState cones;
    cones.pin = 3;
    while (cones.size() < 12) {
      const int v = vert(rng);
      if (v != 3 && !cones.has(v)) cones.cones.push_back({v, zd(rng)});
    }
    const ReducedMap map(sys, cones);
    Eigen::VectorXd direct = sys.solve_direct(cones);
    direct.array() += optimal_scale(direct, sys.area_weights());
    const Evaluation e = map.evaluate(cones);
    EXPECT_LT((e.u - direct).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_NEAR(e.E, distortion(direct, sys.area_weights()), 1e-10);
    EXPECT_LE(sys.residual(cones, e.u), 1e-8 * std::max(1.0, sys.k_ori().cwiseAbs().maxCoeff()));
  }
}

TEST(ReducedMap, ConeAtPinIsRejected) {
  const Mesh m = shapes::icosphere(3);
  const YamabeSystem sys(m, BoundaryMode::Dirichlet, 5);
  EXPECT_FALSE(sys.admissible(5));
  EXPECT_THROW(sys.column(5), SolverError);
  ReducedMap map(sys);
  EXPECT_THROW(map.sync(ConeState{{{5, 1}}, 5}), SolverError);
}

TEST(OptimalScale, ConstantResidual) {
  const Mesh m = shapes::tetrahedron();
  const Eigen::VectorXd w = area_weights(m);
  const Eigen::VectorXd r = Eigen::VectorXd::Ones(4);
  EXPECT_NEAR(optimal_scale(r, w), -1.0, 1e-15);
  EXPECT_NEAR(distortion(r.array() + optimal_scale(r, w), w), 0.0, 1e-15);
  EXPECT_EQ(optimal_scale(Eigen::VectorXd::Zero(4), w), 0.0);
}

TEST(OptimalScale, MatchesGoldenSection) {
  const Mesh m = shapes::tetrahedron();
  const Eigen::VectorXd w = area_weights(m);
  ASSERT_NEAR(w.sum(), 1.0, 1e-14);
  std::mt19937 rng(11);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 10; ++trial) {
    Eigen::VectorXd r(4);
    for (auto& x : r) x = g(rng);
    auto f = [&](double a) { return (r.array() + a).square().matrix().dot(w); };
    const double a_star = optimal_scale(r, w);
    EXPECT_NEAR(a_star, golden_section(f, -10.0, 10.0), 1e-7);
    // Centered after the shift.
    EXPECT_NEAR(w.dot((r.array() + a_star).matrix()), 0.0, 1e-14);
    EXPECT_LE(f(a_star), f(a_star + 1e-5));
    EXPECT_LE(f(a_star), f(a_star - 1e-5));
  }
}

TEST(Distortion, ZeroAndGauge) {
  const Eigen::VectorXd w = Eigen::VectorXd::Constant(5, 0.2);
  EXPECT_EQ(distortion(Eigen::VectorXd::Zero(5), w), 0.0);
  Eigen::VectorXd u = Eigen::VectorXd::Ones(5);
  u.array() += optimal_scale(u, w);
  EXPECT_NEAR(distortion(u, w), 0.0, 1e-15);
}

TEST(Distortion, GaugeInvariantInBase) {
  const Mesh m = shapes::icosphere(5);
  const YamabeSystem sys(m, BoundaryMode::Dirichlet, 0);
  const ConeState cones{{{20, 1}, {100, 2}, {200, -1}}, 0};
  const ReducedMap map(sys, cones);
  Eigen::VectorXd r = map.residual_part(cones);
  const double E1 = map.finish(r).E;
  r.array() += 3.7;
  EXPECT_NEAR(map.finish(r).E, E1, 1e-12);
}

TEST(Dirichlet, FlatDiskNoCones) {
  const Mesh m = shapes::flat_disk(6);
  const Eigen::VectorXd u = dirichlet_solve(m, {});
  EXPECT_LT(u.cwiseAbs().maxCoeff(), 1e-12);
  const YamabeSystem sys(m, BoundaryMode::Dirichlet, -1);
  EXPECT_FALSE(sys.has_scale());
  EXPECT_FALSE(sys.constrains_sum());
  EXPECT_LT(distortion(u, sys.area_weights()), 1e-12);
}

TEST(Dirichlet, InteriorConeMatchesDenseSolve) {
  const Mesh m = shapes::flat_disk(6);
  const int c = 0;  // center
  ASSERT_FALSE(m.on_boundary[c]);
  const ConeState cones{{{c, 1}}, -1};
  const Eigen::VectorXd u = dirichlet_solve(m, cones);
  const YamabeSystem sys(m, BoundaryMode::Dirichlet, -1);
  EXPECT_GT(distortion(u, sys.area_weights()), 0.0);
  EXPECT_LE(sys.residual(cones, u), 1e-9);

  // Dense interior oracle.
  const Eigen::MatrixXd l = dense_laplacian(m);
  const Eigen::VectorXd k = angle_defects(m);
  std::vector<int> in;
  for (int v = 0; v < m.n_vertices(); ++v)
    if (!m.on_boundary[v]) in.push_back(v);
  const int ni = static_cast<int>(in.size());
  Eigen::MatrixXd lii(ni, ni);
  Eigen::VectorXd rhs(ni);
  for (int i = 0; i < ni; ++i) {
    for (int j = 0; j < ni; ++j) lii(i, j) = l(in[i], in[j]);
    rhs[i] = (in[i] == c ? std::numbers::pi / 2 : 0.0) - k[in[i]];
  }
  const Eigen::VectorXd x = lii.ldlt().solve(rhs);
  for (int i = 0; i < ni; ++i) EXPECT_NEAR(u[in[i]], x[i], 1e-10);
  for (int v = 0; v < m.n_vertices(); ++v)
    if (m.on_boundary[v]) EXPECT_EQ(u[v], 0.0);
}

TEST(Dirichlet, ConstantBoundaryExtendsConstant) {
  const Mesh m = shapes::flat_disk(5);
  const double c = 0.75;
  const Eigen::VectorXd b = Eigen::VectorXd::Constant(m.n_vertices(), c);
  const Eigen::VectorXd u = dirichlet_solve(m, {}, b);
  EXPECT_LT((u.array() - c).abs().maxCoeff(), 1e-10);
  const YamabeSystem sys(m, BoundaryMode::Dirichlet, -1, b);
  EXPECT_LE(sys.residual({}, u), 1e-10);
}

TEST(Dirichlet, Errors) {
  EXPECT_THROW(dirichlet_solve(shapes::icosphere(2), {}), SolverError);
  const Mesh m = shapes::flat_disk(4);
  int b = 0;
  while (!m.on_boundary[b]) ++b;
  EXPECT_THROW(dirichlet_solve(m, ConeState{{{b, 1}}, -1}), SolverError);
}

TEST(Neumann, FlatDiskIsConstant) {
  const Mesh m = shapes::flat_disk(5);
  const Eigen::VectorXd k = angle_defects(m);
  const NeumannSolution s = neumann_solve(m, {}, k);
  EXPECT_LT(s.u.cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LT(s.h.cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Neumann, PinOnlyShiftsByConstant) {
  const Mesh m = shapes::hemisphere(6);
  const Eigen::VectorXd k = angle_defects(m);
  // Boundary absorbs the cone's +pi/2 uniformly.
  int nb = 0;
  for (int v = 0; v < m.n_vertices(); ++v) nb += m.on_boundary[v];
  Eigen::VectorXd kt = k;
  // Interior curvature change: the cone minus the flattened interior.
  double interior = 0;
  for (int v = 0; v < m.n_vertices(); ++v)
    if (!m.on_boundary[v]) interior += k[v];
  for (int v = 0; v < m.n_vertices(); ++v)
    if (m.on_boundary[v]) kt[v] = k[v] + (interior - std::numbers::pi / 2) / nb;
  const ConeState cones{{{0, 1}}, -1};
  int p2 = -1;
  for (int v = m.n_vertices() - 1; v >= 0 && p2 < 0; --v)
    if (m.on_boundary[v]) p2 = v;
  const NeumannSolution a = neumann_solve(m, cones, kt);
  const NeumannSolution b = neumann_solve(m, cones, kt, p2);
  const Eigen::VectorXd diff = a.u - b.u;
  EXPECT_LT((diff.array() - diff[0]).abs().maxCoeff(), 1e-9);
}

TEST(Neumann, RandomCompatibleRhsMatchesDense) {
  const Mesh m = shapes::hemisphere(5);
  const int n = m.n_vertices();
  const Eigen::VectorXd k = angle_defects(m);
  std::mt19937 rng(3);
  std::normal_distribution<double> g;
  ConeState cones;
  for (int v = 0; v < n && cones.size() < 4; v += 7)
    if (!m.on_boundary[v]) cones.cones.push_back({v, cones.size() % 2 ? -1 : 2});
  Eigen::VectorXd kt = Eigen::VectorXd::Zero(n);
  std::vector<int> bverts;
  for (int v = 0; v < n; ++v)
    if (m.on_boundary[v]) bverts.push_back(v);
  // Random boundary targets, shifted so the total change is zero.
  double total = 0;
  for (int v = 0; v < n; ++v)
    if (!m.on_boundary[v]) total -= k[v];
  for (const auto& c : cones.cones) total += std::numbers::pi / 2 * c.z;
  double bsum = 0;
  for (int v : bverts) {
    kt[v] = k[v] + 0.1 * g(rng);
    bsum += kt[v] - k[v];
  }
  for (int v : bverts) kt[v] -= (total + bsum) / static_cast<double>(bverts.size());
  const NeumannSolution s = neumann_solve(m, cones, kt);

  Eigen::VectorXd rhs = -k;
  for (const auto& c : cones.cones) rhs[c.vertex] += std::numbers::pi / 2 * c.z;
  for (int v : bverts) rhs[v] = kt[v] - k[v];
  const Eigen::MatrixXd l = dense_laplacian(m);
  EXPECT_LE((l * s.u - rhs).cwiseAbs().maxCoeff(), 1e-9);
  // Dense pinned oracle.
  Eigen::MatrixXd lp = l;
  const int p = bverts.front();
  lp.row(p).setZero();
  lp.col(p).setZero();
  lp(p, p) = 1;
  Eigen::VectorXd rp = rhs;
  rp[p] = 0;
  const Eigen::VectorXd x = lp.ldlt().solve(rp);
  EXPECT_LT((x - s.u).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Neumann, IncompatibleRhsThrows) {
  const Mesh m = shapes::flat_disk(4);
  Eigen::VectorXd kt = angle_defects(m);
  EXPECT_THROW(neumann_solve(m, ConeState{{{0, 1}}, -1}, kt), InfeasibleError);
  EXPECT_THROW(neumann_solve(shapes::icosphere(2), {}, Eigen::VectorXd::Zero(42)), SolverError);
}

TEST(Neumann, SystemKeepsEveryConfigurationCompatible) {
  const Mesh m = shapes::hemisphere(6);
  int pin = 0;
  while (!m.on_boundary[pin]) ++pin;
  const YamabeSystem sys(m, BoundaryMode::Neumann, pin);
  EXPECT_TRUE(sys.has_scale());
  EXPECT_FALSE(sys.constrains_sum());
  const ConeState cones{{{0, 1}, {5, -1}, {12, 2}}, pin};
  const ReducedMap map(sys, cones);
  const Evaluation e = map.evaluate(cones);
  EXPECT_LE(sys.residual(cones, e.u), 1e-9);
  // Rows of the full system sum to zero, so the pin row holds as well.
  const Eigen::VectorXd r = sys.laplacian().matrix() * e.u - sys.rhs(cones);
  EXPECT_LE(std::abs(r[pin]), 1e-9);
}

TEST(Admissible, ExcludesPinAndBoundary) {
  const Mesh m = shapes::hemisphere(4);
  int b = 0;
  while (!m.on_boundary[b]) ++b;
  const YamabeSystem dir(m, BoundaryMode::Dirichlet, -1);
  const YamabeSystem neu(m, BoundaryMode::Neumann, b);
  EXPECT_EQ(dir.pin(), -1);
  EXPECT_TRUE(dir.admissible(0));
  EXPECT_FALSE(dir.admissible(b));
  EXPECT_FALSE(neu.admissible(b));
  EXPECT_FALSE(dir.admissible(-1));
  EXPECT_FALSE(dir.admissible(m.n_vertices()));
}

TEST(ZeroDistortion, IffTargetMatchesDefects) {
  // Octahedron-like: icosphere(1) has 12 vertices with equal defects pi/3,
  // which are not multiples of pi/2, so E > 0 for every configuration.
  const Mesh m = shapes::icosphere(1);
  const YamabeSystem sys(m, BoundaryMode::Dirichlet, 0);
  ConeState cones{{}, 0};
  for (int v = 1; v < 9; ++v) cones.cones.push_back({v, 1});
  const ReducedMap map(sys, cones);
  EXPECT_GT(map.evaluate(cones).E, 1e-3);
  // Cube: exact.
  const Mesh cube = shapes::cube(4);
  const auto corners = high_defect_vertices(cube);
  const int pin = far_vertex(cube, corners);
  const YamabeSystem cs(cube, BoundaryMode::Dirichlet, pin);
  const ConeState cc = corner_cones(cube, pin);
  const ReducedMap cm(cs, cc);
  EXPECT_LE(cm.evaluate(cc).E, 1e-9);
}
