#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>
#include <Eigen/SparseLU>
#ifdef CONES_HAVE_CHOLMOD
#include <Eigen/CholmodSupport>
#endif

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "cones/error.hpp"

namespace cones {

using SparseMatrix = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

// Symmetric sparse matrix with a fixed pattern.
class SparseSym {
 public:
  SparseSym() = default;

  // Sums duplicate triplets and rejects asymmetric input.
  static SparseSym assemble(const std::vector<Triplet>& triplets, int n) {
    for (const auto& t : triplets) {
      if (t.row() < 0 || t.row() >= n || t.col() < 0 || t.col() >= n)
        throw SolverError("triplet index out of range");
    }
    SparseSym s;
    s.m_.resize(n, n);
    s.m_.setFromTriplets(triplets.begin(), triplets.end());
    s.m_.makeCompressed();
    const SparseMatrix diff = SparseMatrix(s.m_.transpose()) - s.m_;
    const double scale = std::max(1.0, max_abs(s.m_));
    if (max_abs(diff) > 1e-12 * scale) throw SolverError("symmetry violation in assembled matrix");
    return s;
  }

  int size() const { return static_cast<int>(m_.rows()); }
  const SparseMatrix& matrix() const { return m_; }
  double coeff(int i, int j) const { return m_.coeff(i, j); }
  // Infinity norm (max absolute row sum).
  double norm_inf() const {
    Eigen::VectorXd rows = Eigen::VectorXd::Zero(size());
    for (int k = 0; k < m_.outerSize(); ++k)
      for (SparseMatrix::InnerIterator it(m_, k); it; ++it) rows[it.row()] += std::abs(it.value());
    return rows.size() ? rows.maxCoeff() : 0.0;
  }

 private:
  static double max_abs(const SparseMatrix& m) {
    double r = 0;
    for (int k = 0; k < m.outerSize(); ++k)
      for (SparseMatrix::InnerIterator it(m, k); it; ++it) r = std::max(r, std::abs(it.value()));
    return r;
  }

  SparseMatrix m_;
};

namespace detail {
#ifdef CONES_HAVE_CHOLMOD
// Supernodal Cholesky with access to the reciprocal condition estimate.
class CholmodLLT : public Eigen::CholmodSupernodalLLT<SparseMatrix> {
 public:
  double rcond() { return cholmod_rcond(m_cholmodFactor, &cholmod()); }
};
#endif
}  // namespace detail

// Factorization of a symmetric nonsingular sparse matrix: Cholesky when the
// matrix is positive definite (CHOLMOD if available, else Eigen's LDLT),
// LU otherwise.
class SymmetricFactor {
 public:
  SymmetricFactor() = default;

  explicit SymmetricFactor(const SparseMatrix& a) : n_(static_cast<int>(a.rows())) {
    bool ok = false;
#ifdef CONES_HAVE_CHOLMOD
    chol_ = std::make_shared<detail::CholmodLLT>();
    chol_->compute(a);
    ok = chol_->info() == Eigen::Success;
    // rcond is (min diag L / max diag L)^2.
    if (ok && !(chol_->rcond() > 1e-13)) throw SolverError("matrix is numerically singular (is the mesh connected?)");
    if (!ok) chol_.reset();
#else
    ldlt_ = std::make_shared<Eigen::SimplicialLDLT<SparseMatrix>>();
    ldlt_->compute(a);
    ok = ldlt_->info() == Eigen::Success;
    if (ok) {
      const Eigen::VectorXd d = ldlt_->vectorD();
      const double dmax = d.cwiseAbs().maxCoeff();
      ok = d.minCoeff() > 1e-13 * dmax;
      if (!ok && d.cwiseAbs().minCoeff() <= 1e-13 * dmax)
        throw SolverError("matrix is numerically singular (is the mesh connected?)");
    }
    if (!ok) ldlt_.reset();
#endif
    if (!ok) {
      lu_ = std::make_shared<Eigen::SparseLU<SparseMatrix>>();
      lu_->analyzePattern(a);
      lu_->factorize(a);
      if (lu_->info() != Eigen::Success) throw SolverError("sparse factorization failed: matrix is singular");
    }
  }

  int size() const { return n_; }

  // All columns are solved in one pass over the factor.
  Eigen::MatrixXd solve(const Eigen::MatrixXd& rhs) const {
    if (rhs.rows() != n_) throw SolverError("dimension mismatch in solve");
    if (n_ == 0) return rhs;
#ifdef CONES_HAVE_CHOLMOD
    if (chol_) return chol_->solve(rhs);
#else
    if (ldlt_) return ldlt_->solve(rhs);
#endif
    return lu_->solve(rhs);
  }

 private:
  int n_ = 0;
#ifdef CONES_HAVE_CHOLMOD
  std::shared_ptr<detail::CholmodLLT> chol_;
#else
  std::shared_ptr<Eigen::SimplicialLDLT<SparseMatrix>> ldlt_;
#endif
  std::shared_ptr<Eigen::SparseLU<SparseMatrix>> lu_;
};

// Laplacian with the constant null space removed by pinning vertex p: row and
// column p are cleared and the diagonal set to one. solve() applies the
// selector M (zeroing rhs[p]) before the factorized solve, so the result has
// x[p] = 0 and satisfies (L x)_i = rhs_i for i != p.
class PinnedSystem {
 public:
  PinnedSystem() = default;

  PinnedSystem(const SparseSym& laplacian, int pin) : pin_(pin) {
    const SparseMatrix& l = laplacian.matrix();
    const int n = laplacian.size();
    if (pin < 0 || pin >= n) throw SolverError("pinned vertex out of range");
    const Eigen::VectorXd row_sums = l * Eigen::VectorXd::Ones(n);
    if (row_sums.cwiseAbs().maxCoeff() > 1e-9 * std::max(1.0, laplacian.norm_inf()))
      throw SolverError("matrix rows do not sum to zero; cannot pin");
    std::vector<Triplet> trips;
    trips.reserve(static_cast<std::size_t>(l.nonZeros()));
    for (int k = 0; k < l.outerSize(); ++k)
      for (SparseMatrix::InnerIterator it(l, k); it; ++it)
        if (it.row() != pin && it.col() != pin) trips.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
    trips.emplace_back(pin, pin, 1.0);
    pinned_.resize(n, n);
    pinned_.setFromTriplets(trips.begin(), trips.end());
    factor_ = SymmetricFactor(pinned_);
  }

  int pin() const { return pin_; }
  int size() const { return factor_.size(); }
  const SparseMatrix& pinned_matrix() const { return pinned_; }

  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const {
    if (rhs.size() != size()) throw SolverError("dimension mismatch in pinned solve");
    Eigen::VectorXd b = rhs;
    b[pin_] = 0.0;
    Eigen::VectorXd x = factor_.solve(b);
    x[pin_] = 0.0;
    return x;
  }

  // Batched solve of all columns.
  Eigen::MatrixXd solve(const Eigen::MatrixXd& rhs) const {
    if (rhs.rows() != size()) throw SolverError("dimension mismatch in pinned solve");
    Eigen::MatrixXd b = rhs;
    b.row(pin_).setZero();
    Eigen::MatrixXd x = factor_.solve(b);
    x.row(pin_).setZero();
    return x;
  }

 private:
  int pin_ = -1;
  SparseMatrix pinned_;
  SymmetricFactor factor_;
};

inline PinnedSystem pin(const SparseSym& laplacian, int p) { return PinnedSystem(laplacian, p); }

}  // namespace cones
