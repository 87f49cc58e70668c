#pragma once

#include <Eigen/Core>
#include <Eigen/QR>
#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "cones/error.hpp"
#include "cones/geometry.hpp"
#include "cones/homology.hpp"
#include "cones/mesh.hpp"
#include "cones/miqp.hpp"
#include "cones/sparse.hpp"
#include "cones/yamabe.hpp"

namespace cones {

// The mesh cut open along a homology basis. Every face corner belongs to one
// cut vertex. A loop vertex splits into a left and a right copy that share
// the variable of the original vertex; the right copy also carries an
// offset slot du. A crossing splits into four corners with three variables:
// the two corners on the left of the second loop share the original
// variable (the one right of the first loop with an offset), the other two
// get one new variable each. Variables: N + 2g.
struct CutMesh {
  const Mesh* mesh = nullptr;
  HomologyBasis basis;
  int n_original = 0;
  int genus = 0;
  int n_cut = 0;    // cut vertices
  int n_slots = 0;  // offset slots
  // corner_of[v][t]: cut vertex of the corner of face ring_faces[v][t] at v.
  std::vector<std::vector<int>> corner_of;
  std::vector<int> origin;    // per cut vertex
  std::vector<int> variable;  // per cut vertex, in [0, n_variables())
  std::vector<int> slot;      // per cut vertex, offset slot or -1
  std::vector<std::vector<int>> left_side;  // per loop: cut vertices on its left
  struct SeamPair {
    int loop = -1;
    int vertex = -1;      // original vertex
    int left = -1, right = -1;  // cut vertices
  };
  std::vector<SeamPair> pairs;
  Eigen::VectorXd weights;  // normalized area per cut vertex

  int n_variables() const { return n_original + 2 * genus; }
};

inline CutMesh cut_mesh(const Mesh& mesh, const HomologyBasis& basis) {
  const int n = mesh.n_vertices();
  const int g = static_cast<int>(basis.crossings.size());
  if (g < 1 || static_cast<int>(basis.loops.size()) != 2 * g) throw MeshError("cut needs a basis of 2g >= 2 loops");

  // Loop membership and edge-disjointness.
  std::vector<std::vector<std::pair<int, int>>> on_loops(n);  // (loop, position)
  std::map<std::pair<int, int>, int> edge_use;
  for (int i = 0; i < 2 * g; ++i) {
    const Loop& loop = basis.loops[i];
    if (loop.size() < 3) throw MeshError("loop " + std::to_string(i) + " is too short");
    for (int j = 0; j < loop.size(); ++j) {
      const int v = loop.vertices[j], w = loop.next(j);
      on_loops[v].emplace_back(i, j);
      if (++edge_use[{std::min(v, w), std::max(v, w)}] > 1)
        throw MeshError("loops share edge (" + std::to_string(v) + "," + std::to_string(w) + "); choose another basis");
    }
  }
  for (int v = 0; v < n; ++v) {
    if (on_loops[v].size() <= 1) continue;
    bool ok = false;
    for (int k = 0; k < g; ++k)
      if (basis.crossings[k] == v && on_loops[v].size() == 2 && on_loops[v][0].first == 2 * k &&
          on_loops[v][1].first == 2 * k + 1)
        ok = true;
    if (!ok) throw MeshError("loops meet at vertex " + std::to_string(v) + " outside their designated crossing");
  }

  CutMesh cut;
  cut.mesh = &mesh;
  cut.basis = basis;
  cut.n_original = n;
  cut.genus = g;
  cut.corner_of.resize(n);
  cut.left_side.resize(2 * g);

  auto new_cut_vertex = [&](int v, int var, bool with_slot) {
    cut.origin.push_back(v);
    cut.variable.push_back(var);
    cut.slot.push_back(with_slot ? cut.n_slots++ : -1);
    return cut.n_cut++;
  };

  for (int v = 0; v < n; ++v) {
    const int deg = static_cast<int>(mesh.ring_faces[v].size());
    if (on_loops[v].empty()) {
      const int c = new_cut_vertex(v, v, false);
      cut.corner_of[v].assign(deg, c);
      continue;
    }
    // Left-fan membership of each face position, per loop through v.
    std::vector<std::vector<char>> left(on_loops[v].size(), std::vector<char>(deg, 0));
    for (std::size_t q = 0; q < on_loops[v].size(); ++q) {
      const auto [i, j] = on_loops[v][q];
      const Loop& loop = basis.loops[i];
      for (int t : left_fan(mesh, v, loop.prev(j), loop.next(j))) left[q][t] = 1;
    }
    cut.corner_of[v].assign(deg, -1);
    if (on_loops[v].size() == 1) {
      const int i = on_loops[v][0].first;
      const int cl = new_cut_vertex(v, v, false);
      const int cr = new_cut_vertex(v, v, true);
      for (int t = 0; t < deg; ++t) cut.corner_of[v][t] = left[0][t] ? cl : cr;
      cut.left_side[i].push_back(cl);
      cut.pairs.push_back({i, v, cl, cr});
      continue;
    }
    // Crossing of loops a = 2k and b = 2k + 1.
    const int a = on_loops[v][0].first, b = on_loops[v][1].first, k = a / 2;
    int quadrant[2][2];  // [left of a][left of b]
    quadrant[1][1] = new_cut_vertex(v, v, false);
    quadrant[0][1] = new_cut_vertex(v, v, true);
    quadrant[1][0] = new_cut_vertex(v, n + 2 * k, false);
    quadrant[0][0] = new_cut_vertex(v, n + 2 * k + 1, false);
    std::vector<char> used(4, 0);
    for (int t = 0; t < deg; ++t) {
      const int qa = left[0][t], qb = left[1][t];
      cut.corner_of[v][t] = quadrant[qa][qb];
      used[2 * qa + qb] = 1;
    }
    if (std::count(used.begin(), used.end(), 1) != 4)
      throw MeshError("loops touch without crossing at vertex " + std::to_string(v));
    cut.left_side[a].push_back(quadrant[1][1]);
    cut.left_side[a].push_back(quadrant[1][0]);
    cut.left_side[b].push_back(quadrant[1][1]);
    cut.left_side[b].push_back(quadrant[0][1]);
    cut.pairs.push_back({a, v, quadrant[1][1], quadrant[0][1]});
    cut.pairs.push_back({a, v, quadrant[1][0], quadrant[0][0]});
    cut.pairs.push_back({b, v, quadrant[1][1], quadrant[1][0]});
    cut.pairs.push_back({b, v, quadrant[0][1], quadrant[0][0]});
  }

  cut.weights = Eigen::VectorXd::Zero(cut.n_cut);
  double total = 0;
  for (int f = 0; f < mesh.n_faces(); ++f) total += face_area(mesh, f);
  for (int v = 0; v < n; ++v)
    for (int t = 0; t < static_cast<int>(mesh.ring_faces[v].size()); ++t)
      cut.weights[cut.corner_of[v][t]] += face_area(mesh, mesh.ring_faces[v][t]) / (3.0 * total);
  return cut;
}

// Cotangent Laplacian of the cut mesh (positive semidefinite, n_cut square).
inline SparseMatrix cut_laplacian(const CutMesh& cut) {
  const Mesh& mesh = *cut.mesh;
  std::vector<int> pos(mesh.n_faces() * 3, -1);
  for (int v = 0; v < mesh.n_vertices(); ++v)
    for (int t = 0; t < static_cast<int>(mesh.ring_faces[v].size()); ++t) {
      const int f = mesh.ring_faces[v][t];
      for (int k = 0; k < 3; ++k)
        if (mesh.faces[f][k] == v) pos[3 * f + k] = cut.corner_of[v][t];
    }
  std::vector<Triplet> trips;
  for (int f = 0; f < mesh.n_faces(); ++f)
    for (int k = 0; k < 3; ++k) {
      const double w = 0.5 * corner_cotangent(mesh, f, k);
      const int i = pos[3 * f + (k + 1) % 3], j = pos[3 * f + (k + 2) % 3];
      trips.emplace_back(i, j, -w);
      trips.emplace_back(j, i, -w);
      trips.emplace_back(i, i, w);
      trips.emplace_back(j, j, w);
    }
  SparseMatrix l(cut.n_cut, cut.n_cut);
  l.setFromTriplets(trips.begin(), trips.end());
  return l;
}

// L_g u = (pi/2)(z; r) - (k_ori; k_g) + K du over the N + 2g variables.
struct HolonomySystem {
  const CutMesh* cut = nullptr;
  SparseMatrix Lg;  // N' x N'
  SparseMatrix K;   // N' x n_slots
  SparseMatrix S;   // n_cut x N', variable of each cut vertex
  SparseMatrix D;   // n_cut x n_slots, offset of each cut vertex
  Eigen::VectorXd k_ori;
  Eigen::VectorXd k_g;  // per loop, total left curvature
  std::vector<int> z;   // per original vertex
  int pin = 0;
  std::shared_ptr<Eigen::SparseLU<SparseMatrix>> lu;  // L_g with the pin row replaced by e_pin

  int n_variables() const { return static_cast<int>(Lg.rows()); }

  // Right-hand side for given loop integers and offsets.
  Eigen::VectorXd rhs(const std::vector<int>& r, const Eigen::VectorXd& du) const {
    const int n = cut->n_original;
    Eigen::VectorXd b(n_variables());
    for (int v = 0; v < n; ++v) b[v] = kHalfPi * z[v] - k_ori[v];
    for (int i = 0; i < 2 * cut->genus; ++i) b[n + i] = kHalfPi * r[i] - k_g[i];
    if (du.size()) b += K * du;
    return b;
  }

  // Solution with u_pin = 0 of a compatible system (the pin row is implied).
  Eigen::MatrixXd solve(Eigen::MatrixXd b) const {
    b.row(pin).setZero();
    Eigen::MatrixXd x = lu->solve(b);
    if (lu->info() != Eigen::Success) throw SolverError("holonomy solve failed");
    return x;
  }
};

// Builds L_g and K for fixed cone multipliers and checks that the null
// space of L_g is exactly the constants.
inline HolonomySystem assemble_system(const CutMesh& cut, const ConeState& cones, const Eigen::VectorXd& k_ori) {
  const int n = cut.n_original, g = cut.genus, np = cut.n_variables();
  HolonomySystem sys;
  sys.cut = &cut;
  sys.k_ori = k_ori;
  sys.z.assign(n, 0);
  for (const auto& c : cones.cones) sys.z[c.vertex] = c.z;
  sys.k_g.resize(2 * g);
  for (int i = 0; i < 2 * g; ++i) sys.k_g[i] = cut.basis.loops[i].total_left_curvature();

  std::vector<Triplet> rt, st, dt;
  for (int c = 0; c < cut.n_cut; ++c) {
    rt.emplace_back(cut.origin[c], c, 1.0);
    st.emplace_back(c, cut.variable[c], 1.0);
    if (cut.slot[c] >= 0) dt.emplace_back(c, cut.slot[c], 1.0);
  }
  for (int i = 0; i < 2 * g; ++i)
    for (int c : cut.left_side[i]) rt.emplace_back(n + i, c, 1.0);
  SparseMatrix rows(np, cut.n_cut);
  rows.setFromTriplets(rt.begin(), rt.end());
  sys.S.resize(cut.n_cut, np);
  sys.S.setFromTriplets(st.begin(), st.end());
  sys.D.resize(cut.n_cut, cut.n_slots);
  sys.D.setFromTriplets(dt.begin(), dt.end());
  const SparseMatrix lcut = cut_laplacian(cut);
  const SparseMatrix rl = rows * lcut;
  sys.Lg = rl * sys.S;
  sys.K = -(rl * sys.D);
  sys.Lg.prune(0.0);

  const double scale = std::max(1.0, sys.Lg.coeffs().cwiseAbs().maxCoeff());
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(np);
  if ((sys.Lg * ones).cwiseAbs().maxCoeff() > 1e-9 * scale) throw SolverError("L_g 1 != 0: assembly bug");

  // Pin: first vertex not on any loop; replaced row is redundant because
  // the Yamabe rows sum to zero.
  std::vector<char> on_loop(n, 0);
  for (const auto& loop : cut.basis.loops)
    for (int v : loop.vertices) on_loop[v] = 1;
  sys.pin = static_cast<int>(std::find(on_loop.begin(), on_loop.end(), 0) - on_loop.begin());
  if (sys.pin == n) sys.pin = -1;
  if (sys.pin < 0) throw SolverError("no vertex off the loops to pin");
  std::vector<Triplet> pt;
  for (int k = 0; k < sys.Lg.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(sys.Lg, k); it; ++it)
      if (it.row() != sys.pin) pt.emplace_back(it.row(), it.col(), it.value());
  pt.emplace_back(sys.pin, sys.pin, 1.0);
  SparseMatrix pinned(np, np);
  pinned.setFromTriplets(pt.begin(), pt.end());
  pinned.makeCompressed();
  sys.lu = std::make_shared<Eigen::SparseLU<SparseMatrix>>();
  sys.lu->analyzePattern(pinned);
  sys.lu->factorize(pinned);
  if (sys.lu->info() != Eigen::Success) throw SolverError("L_g has rank below N + 2g - 1: assembly bug");

  // Rank test: a compatible right-hand side is reproduced up to a constant.
  Eigen::VectorXd x(np);
  for (int i = 0; i < np; ++i) x[i] = std::sin(1.0 + 0.37 * i) + 0.1 * std::cos(2.3 * i);
  const Eigen::VectorXd y = sys.solve(Eigen::MatrixXd(sys.Lg * x));
  const Eigen::VectorXd diff = (y - x).array() - (y - x)[sys.pin];
  if (diff.cwiseAbs().maxCoeff() > 1e-6 * std::max(1.0, x.cwiseAbs().maxCoeff()))
    throw SolverError("L_g rank test failed (residual " + std::to_string(diff.cwiseAbs().maxCoeff()) + "): assembly bug");
  return sys;
}

struct HolonomyOptions {
  double lambda_d = 1e6;
  int width = 2;  // r_i in round(k_g,i * 2/pi) +- width
  BnbOptions bnb;
};

struct HolonomySolution {
  std::vector<int> r;
  Eigen::VectorXd du;         // per slot
  double a = 0;
  Eigen::VectorXd u;          // per variable, scale included
  Eigen::VectorXd cut_values; // per cut vertex: u + du
  double E = 0;               // sqrt(sum w u^2) over cut vertices
  double E_dif = 0;           // seam jump over all left/right pairs
  double objective = 0;       // E^2 + lambda_d E_dif^2
  double residual = 0;        // max constraint residual
  std::vector<int> r_lo, r_hi;
  bool at_box_edge = false;
  ReducedQP qp;               // objective over r with (du, a) minimized out
  long nodes = 0;
};

// Minimizes distortion plus the weighted seam jump over integer r and
// continuous (du, a). For fixed r the continuous part is a linear
// least-squares problem; eliminating it leaves an integer QP over r.
inline HolonomySolution solve_holonomy(const HolonomySystem& sys, const HolonomyOptions& options = {}) {
  if (!(options.lambda_d > 0)) throw SolverError("lambda_d must be positive");
  if (options.width < 0) throw InfeasibleError("empty holonomy box");
  const CutMesh& cut = *sys.cut;
  const int g2 = 2 * cut.genus, ns = cut.n_slots, np = sys.n_variables(), n = cut.n_original;

  // Responses: x0 for (z, 0), columns for unit r_i and unit offsets.
  Eigen::MatrixXd rhs(np, 1 + g2 + ns);
  rhs.col(0) = sys.rhs(std::vector<int>(g2, 0), Eigen::VectorXd());
  rhs.block(0, 1, np, g2).setZero();
  for (int i = 0; i < g2; ++i) rhs(n + i, 1 + i) = kHalfPi;
  if (ns) rhs.rightCols(ns) = Eigen::MatrixXd(sys.K);
  const Eigen::MatrixXd x = sys.solve(rhs);
  // Cut values for each response; offsets add D.
  Eigen::MatrixXd v = sys.S * x;
  if (ns) v.rightCols(ns) += Eigen::MatrixXd(sys.D);

  const int np_rows = cut.n_cut + static_cast<int>(cut.pairs.size());
  const double sl = std::sqrt(options.lambda_d);
  auto stack = [&](const Eigen::VectorXd& c) {
    Eigen::VectorXd out(np_rows);
    for (int i = 0; i < cut.n_cut; ++i) out[i] = std::sqrt(cut.weights[i]) * c[i];
    for (std::size_t p = 0; p < cut.pairs.size(); ++p)
      out[cut.n_cut + static_cast<int>(p)] = sl * (c[cut.pairs[p].left] - c[cut.pairs[p].right]);
    return out;
  };
  Eigen::MatrixXd J(np_rows, ns + 1);
  for (int k = 0; k < ns; ++k) J.col(k) = stack(v.col(1 + g2 + k));
  J.col(ns) = stack(Eigen::VectorXd::Ones(cut.n_cut));
  Eigen::MatrixXd B(np_rows, g2 + 1);
  B.col(0) = stack(v.col(0));
  for (int i = 0; i < g2; ++i) B.col(1 + i) = stack(v.col(1 + i));

  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(J);
  const Eigen::MatrixXd coef = qr.solve(B);
  const Eigen::MatrixXd P = B - J * coef;  // components orthogonal to range(J)

  HolonomySolution sol;
  sol.qp.H = P.rightCols(g2).transpose() * P.rightCols(g2);
  sol.qp.H = 0.5 * (sol.qp.H + sol.qp.H.transpose()).eval();
  sol.qp.g = P.rightCols(g2).transpose() * P.col(0);
  sol.qp.c0 = P.col(0).squaredNorm();
  std::vector<int> center(g2);
  for (int i = 0; i < g2; ++i) {
    center[i] = static_cast<int>(std::lround(sys.k_g[i] * 2.0 / std::numbers::pi));
    sol.qp.lo.push_back(center[i] - options.width);
    sol.qp.hi.push_back(center[i] + options.width);
  }
  sol.r_lo = sol.qp.lo;
  sol.r_hi = sol.qp.hi;
  const BnbResult res = branch_and_bound(sol.qp, center, options.bnb);
  sol.r = res.y;
  sol.nodes = res.nodes;
  for (int i = 0; i < g2; ++i)
    if (sol.r[i] == sol.qp.lo[i] || sol.r[i] == sol.qp.hi[i]) sol.at_box_edge = options.width > 0;

  // Continuous minimizer for the chosen r.
  Eigen::VectorXd rv(g2 + 1);
  rv[0] = 1.0;
  for (int i = 0; i < g2; ++i) rv[1 + i] = sol.r[i];
  const Eigen::VectorXd xc = -(coef * rv);
  sol.du = xc.head(ns);
  sol.a = xc[ns];

  Eigen::VectorXd w(1 + g2 + ns);
  w << rv, sol.du;
  sol.u = x * w;
  sol.u.array() += sol.a;
  sol.cut_values = sys.S * sol.u;
  if (ns) sol.cut_values += sys.D * sol.du;
  double e2 = 0, d2 = 0;
  for (int c = 0; c < cut.n_cut; ++c) e2 += cut.weights[c] * sol.cut_values[c] * sol.cut_values[c];
  for (const auto& p : cut.pairs) {
    const double d = sol.cut_values[p.left] - sol.cut_values[p.right];
    d2 += d * d;
  }
  sol.E = std::sqrt(e2);
  sol.E_dif = std::sqrt(d2);
  sol.objective = e2 + options.lambda_d * d2;
  sol.residual = (sys.Lg * sol.u - sys.rhs(sol.r, sol.du)).cwiseAbs().maxCoeff();
  return sol;
}

}  // namespace cones
