#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <random>

#include "cones/miqp.hpp"

using namespace cones;

namespace {

// Gram-matrix instance like the ones the angle step produces.
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
    qp.sum_lo = s(rng);
    qp.sum_hi = std::min(m * hi, qp.sum_lo + 1);
  }
  return qp;
}

}  // namespace

TEST(Objective, IntegerAndRealAgree) {
  std::mt19937 rng(1);
  const ReducedQP qp = random_qp(5, -1, 1, rng, false);
  const std::vector<int> y{1, 0, -1, 1, 1};
  const Eigen::VectorXd yd = Eigen::Map<const Eigen::VectorXi>(y.data(), 5).cast<double>();
  EXPECT_NEAR(qp.objective(y), qp.objective(yd), 1e-10 * std::max(1.0, std::abs(qp.objective(yd))));
}

TEST(BranchAndBound, MatchesEnumerationSmallBox) {
  std::mt19937 rng(2024);
  for (int trial = 0; trial < 60; ++trial) {
    const int m = 1 + trial % 7;
    const ReducedQP qp = random_qp(m, -1, 1, rng, trial % 3 == 0);
    const BnbResult ref = enumerate_qp(qp);
    const BnbResult res = branch_and_bound(qp);
    EXPECT_TRUE(qp.feasible(res.y));
    EXPECT_EQ(res.objective, ref.objective) << "trial " << trial;
    EXPECT_FALSE(res.budget_exhausted);
  }
}

TEST(BranchAndBound, MatchesEnumerationWideBox) {
  std::mt19937 rng(99);
  for (int trial = 0; trial < 15; ++trial) {
    const int m = 1 + trial % 5;
    const ReducedQP qp = random_qp(m, -3, 3, rng, trial % 2 == 0);
    EXPECT_EQ(branch_and_bound(qp).objective, enumerate_qp(qp).objective) << "trial " << trial;
  }
}

TEST(BranchAndBound, SeparableIdentityGivesZero) {
  ReducedQP qp;
  qp.H = Eigen::MatrixXd::Identity(4, 4);
  qp.g = Eigen::VectorXd::Zero(4);
  qp.lo.assign(4, -1);
  qp.hi.assign(4, 1);
  const BnbResult r = branch_and_bound(qp);
  EXPECT_EQ(r.y, std::vector<int>(4, 0));
  EXPECT_EQ(r.objective, 0.0);
}

TEST(BranchAndBound, WarmStartNeverWorse) {
  std::mt19937 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const ReducedQP qp = random_qp(6, -1, 1, rng, true);
    const BnbResult cold = branch_and_bound(qp);
    const BnbResult warm = branch_and_bound(qp, cold.y);
    EXPECT_EQ(warm.objective, cold.objective);
    EXPECT_LE(warm.nodes, cold.nodes);
  }
}

TEST(BranchAndBound, IncumbentIsUpperBound) {
  std::mt19937 rng(8);
  const ReducedQP qp = random_qp(7, -1, 1, rng, false);
  const std::vector<int> inc(7, 1);
  EXPECT_LE(branch_and_bound(qp, inc).objective, qp.objective(inc));
}

TEST(BranchAndBound, EmptyFeasibleSet) {
  ReducedQP qp;
  qp.H = Eigen::MatrixXd::Identity(3, 3);
  qp.g = Eigen::VectorXd::Zero(3);
  qp.lo.assign(3, 0);
  qp.hi.assign(3, 0);
  qp.has_sum = true;
  qp.sum_lo = qp.sum_hi = 8;
  EXPECT_THROW(branch_and_bound(qp), InfeasibleError);
  EXPECT_THROW(enumerate_qp(qp), InfeasibleError);
  qp.has_sum = false;
  qp.lo = {1, 0, 0};
  qp.hi = {0, 0, 0};
  EXPECT_THROW(branch_and_bound(qp), InfeasibleError);
}

TEST(BranchAndBound, ZeroVariables) {
  ReducedQP qp;
  qp.H.resize(0, 0);
  qp.g.resize(0);
  qp.c0 = 2.5;
  const BnbResult r = branch_and_bound(qp);
  EXPECT_TRUE(r.y.empty());
  EXPECT_EQ(r.objective, 2.5);
}

TEST(BranchAndBound, RejectsInconsistentDimensions) {
  ReducedQP qp;
  qp.H = Eigen::MatrixXd::Identity(2, 2);
  qp.g = Eigen::VectorXd::Zero(3);
  qp.lo.assign(3, -1);
  qp.hi.assign(3, 1);
  EXPECT_THROW(branch_and_bound(qp), SolverError);
}

TEST(BranchAndBound, Deterministic) {
  std::mt19937 rng(31);
  const ReducedQP qp = random_qp(8, -1, 1, rng, true);
  const BnbResult a = branch_and_bound(qp), b = branch_and_bound(qp);
  EXPECT_EQ(a.y, b.y);
  EXPECT_EQ(a.nodes, b.nodes);
}

TEST(BranchAndBound, NodeBudgetFlagged) {
  std::mt19937 rng(4);
  const ReducedQP qp = random_qp(12, -3, 3, rng, false);
  BnbOptions o;
  o.node_budget = 3;
  const BnbResult r = branch_and_bound(qp, std::vector<int>(12, 0), o);
  EXPECT_TRUE(r.budget_exhausted);
  EXPECT_TRUE(qp.feasible(r.y));
  EXPECT_LE(r.objective, qp.objective(std::vector<int>(12, 0)));
}

TEST(BranchAndBound, InstanceHookAndLpDump) {
  std::mt19937 rng(6);
  const ReducedQP qp = random_qp(3, -1, 1, rng, true);
  int calls = 0;
  BnbOptions o;
  o.on_instance = [&](const ReducedQP& q) {
    ++calls;
    const std::string lp = to_lp(q);
    EXPECT_NE(lp.find("Minimize"), std::string::npos);
    EXPECT_NE(lp.find("General"), std::string::npos);
    EXPECT_NE(lp.find("sum_lo"), std::string::npos);
  };
  branch_and_bound(qp, {}, o);
  EXPECT_EQ(calls, 1);
}

TEST(Relaxation, ActiveSetMatchesGradientMethod) {
  std::mt19937 rng(17);
  for (int trial = 0; trial < 40; ++trial) {
    const int m = 2 + trial % 12;
    const ReducedQP qp = random_qp(m, -1 - trial % 2, 1 + trial % 3, rng, trial % 2 == 0);
    detail::Region region;
    region.lo = Eigen::Map<const Eigen::VectorXi>(qp.lo.data(), m).cast<double>();
    region.hi = Eigen::Map<const Eigen::VectorXi>(qp.hi.data(), m).cast<double>();
    region.has_sum = qp.has_sum;
    region.sum_lo = qp.sum_lo;
    region.sum_hi = qp.sum_hi;
    const auto exact = detail::relax_active_set(qp, region, Eigen::VectorXd::Zero(m));
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(qp.H);
    if (es.eigenvalues().minCoeff() < 1e-8) continue;  // active set may decline singular free blocks
    ASSERT_TRUE(exact.has_value()) << "trial " << trial;
    // Feasible point, and its value sits on the certified bound.
    EXPECT_LE((exact->x - region.project(exact->x)).cwiseAbs().maxCoeff(), 1e-9);
    const double f = qp.objective(exact->x);
    EXPECT_NEAR(exact->lower_bound, f, 1e-9 * std::max(1.0, std::abs(f)));
    const auto slow = detail::relax(qp, region, Eigen::VectorXd::Zero(m), 2.0 * es.eigenvalues().maxCoeff(), 200000,
                                    1e-13);
    EXPECT_LE(exact->lower_bound, qp.objective(slow.x) + 1e-9 * std::max(1.0, std::abs(f)));
    EXPECT_GE(exact->lower_bound, slow.lower_bound - 1e-9 * std::max(1.0, std::abs(f)));
  }
}
