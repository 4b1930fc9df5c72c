#ifndef MTGP_LINALG_HPP_
#define MTGP_LINALG_HPP_

// Dense and Kronecker-structured linear algebra used throughout the library.
//
// Flattening convention: every matrix-to-vector reshape is row-major, so for
// an N x M table C the flattened vector is
//
//   [C(0,0), ..., C(0,M-1), C(1,0), ..., C(N-1,M-1)]
//
// which is vec(C^T) in column-stacking notation. With this layout
//
//   (A kron B) vec_t(C) = vec_t(A C B^T)
//
// and all Kronecker-structured products below rely on that identity.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <sstream>
#include <type_traits>
#include <utility>
#include <vector>

#include "mtgp/error.hpp"

namespace mtgp {

using Index = Eigen::Index;

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// y = A x for a symmetric operator that is never materialized.
template <typename Scalar>
using LinearOperator = std::function<VectorX<Scalar>(const VectorX<Scalar> &)>;

namespace detail {

inline std::string shape_str(Index r, Index c) {
  std::ostringstream os;
  os << r << "x" << c;
  return os.str();
}

} // namespace detail

/// Kronecker product: block (i,j) of the result is a(i,j) * b.
template <typename DerivedA, typename DerivedB>
MatrixX<typename DerivedA::Scalar> kron(const Eigen::MatrixBase<DerivedA> &a,
                                        const Eigen::MatrixBase<DerivedB> &b) {
  using Scalar = typename DerivedA::Scalar;
  MatrixX<Scalar> out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

/// Row-major flattening, vec(C^T).
template <typename Derived>
VectorX<typename Derived::Scalar> vec_t(const Eigen::MatrixBase<Derived> &c) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>
      row_major = c;
  return Eigen::Map<const VectorX<Scalar>>(row_major.data(), row_major.size());
}

/// Inverse of vec_t.
template <typename Derived>
MatrixX<typename Derived::Scalar> unvec_t(const Eigen::MatrixBase<Derived> &v,
                                          Index rows, Index cols) {
  using Scalar = typename Derived::Scalar;
  if (v.size() != rows * cols) {
    throw DimensionError("unvec_t: length " + std::to_string(v.size()) +
                         " does not match " + detail::shape_str(rows, cols));
  }
  const VectorX<Scalar> dense = v;
  return Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic,
                                        Eigen::RowMajor>>(dense.data(), rows,
                                                          cols);
}

/// (a kron b) v without forming the Kronecker product.
template <typename DerivedA, typename DerivedB, typename DerivedV>
VectorX<typename DerivedA::Scalar>
kron_matvec(const Eigen::MatrixBase<DerivedA> &a,
            const Eigen::MatrixBase<DerivedB> &b,
            const Eigen::MatrixBase<DerivedV> &v) {
  if (v.size() != a.cols() * b.cols()) {
    throw DimensionError("kron_matvec: vector length " +
                         std::to_string(v.size()) + " vs operator " +
                         detail::shape_str(a.rows() * b.rows(),
                                           a.cols() * b.cols()));
  }
  const auto c = unvec_t(v, a.cols(), b.cols());
  return vec_t(a * c * b.transpose());
}

/// Observed positions of a flattened N x M table, stored as strictly
/// increasing indices into the row-major vector. Stands in for the column
/// selection matrix P without ever building it.
class SelectionMap {
public:
  SelectionMap(Index total, std::vector<Index> kept)
      : total_(total), kept_(std::move(kept)) {
    for (std::size_t i = 0; i < kept_.size(); ++i) {
      if (kept_[i] < 0 || kept_[i] >= total_ ||
          (i > 0 && kept_[i] <= kept_[i - 1])) {
        throw DimensionError(
            "SelectionMap: kept indices must be strictly increasing and < " +
            std::to_string(total_));
      }
    }
  }

  /// All positions kept (P = I).
  static SelectionMap all(Index total) {
    std::vector<Index> kept(static_cast<std::size_t>(total));
    for (Index i = 0; i < total; ++i) kept[static_cast<std::size_t>(i)] = i;
    return SelectionMap(total, std::move(kept));
  }

  /// Keeps the finite entries of a table, in row-major order.
  template <typename Derived>
  static SelectionMap from_finite(const Eigen::MatrixBase<Derived> &table) {
    std::vector<Index> kept;
    for (Index i = 0; i < table.rows(); ++i) {
      for (Index j = 0; j < table.cols(); ++j) {
        if (std::isfinite(table(i, j))) kept.push_back(i * table.cols() + j);
      }
    }
    return SelectionMap(table.size(), std::move(kept));
  }

  Index total() const { return total_; }
  Index size() const { return static_cast<Index>(kept_.size()); }
  const std::vector<Index> &kept() const { return kept_; }

  /// P v: zero-padded vector of length total().
  template <typename Derived>
  VectorX<typename Derived::Scalar>
  scatter(const Eigen::MatrixBase<Derived> &v) const {
    check_kept_length(v.size());
    VectorX<typename Derived::Scalar> out =
        VectorX<typename Derived::Scalar>::Zero(total_);
    for (Index i = 0; i < size(); ++i) out(kept_[i]) = v(i);
    return out;
  }

  /// P^T w: the kept entries of w.
  template <typename Derived>
  VectorX<typename Derived::Scalar>
  gather(const Eigen::MatrixBase<Derived> &w) const {
    if (w.size() != total_) {
      throw DimensionError("SelectionMap::gather: expected length " +
                           std::to_string(total_));
    }
    VectorX<typename Derived::Scalar> out(size());
    for (Index i = 0; i < size(); ++i) out(i) = w(kept_[i]);
    return out;
  }

private:
  void check_kept_length(Index n) const {
    if (n != size()) {
      throw DimensionError("SelectionMap: vector length " + std::to_string(n) +
                           " vs " + std::to_string(size()) + " kept entries");
    }
  }

  Index total_;
  std::vector<Index> kept_;
};

/// P^T (a kron b) P v via zero padding, kron_matvec and gather.
template <typename DerivedA, typename DerivedB, typename DerivedV>
VectorX<typename DerivedA::Scalar>
masked_kron_matvec(const Eigen::MatrixBase<DerivedA> &a,
                   const Eigen::MatrixBase<DerivedB> &b,
                   const SelectionMap &sel,
                   const Eigen::MatrixBase<DerivedV> &v) {
  if (a.rows() != a.cols() || b.rows() != b.cols() ||
      sel.total() != a.rows() * b.rows()) {
    throw DimensionError("masked_kron_matvec: selection over " +
                         std::to_string(sel.total()) +
                         " entries does not match square operands " +
                         detail::shape_str(a.rows(), a.cols()) + ", " +
                         detail::shape_str(b.rows(), b.cols()));
  }
  return sel.gather(kron_matvec(a, b, sel.scatter(v)));
}

struct CgConfig {
  Index max_iterations = 1000;
  double residual_tolerance = 1e-10;
};

/// Unpreconditioned conjugate gradients for a symmetric positive definite
/// operator. Stops once ||apply(x) - rhs|| <= tol * ||rhs||.
template <typename Scalar>
VectorX<Scalar> cg_solve(const LinearOperator<Scalar> &apply,
                         const std::type_identity_t<VectorX<Scalar>> &rhs,
                         const CgConfig &cfg) {
  if (cfg.max_iterations < 1 || !(cfg.residual_tolerance > 0)) {
    throw UsageError("cg_solve: max_iterations >= 1 and tolerance > 0 required");
  }
  VectorX<Scalar> x = VectorX<Scalar>::Zero(rhs.size());
  const Scalar rhs_norm = rhs.norm();
  if (rhs_norm == Scalar(0)) return x;

  VectorX<Scalar> r = rhs;
  VectorX<Scalar> p = r;
  Scalar rr = r.squaredNorm();
  Scalar best = Scalar(1);
  for (Index it = 0; it < cfg.max_iterations; ++it) {
    const VectorX<Scalar> ap = apply(p);
    if (ap.size() != rhs.size()) {
      throw DimensionError("cg_solve: operator changed vector length");
    }
    const Scalar pap = p.dot(ap);
    if (!(pap > Scalar(0))) {
      throw NumericalError("cg_solve: operator is not positive definite");
    }
    const Scalar alpha = rr / pap;
    x += alpha * p;
    r -= alpha * ap;
    const Scalar rr_next = r.squaredNorm();
    const Scalar rel = std::sqrt(rr_next) / rhs_norm;
    best = std::min(best, rel);
    if (rel <= cfg.residual_tolerance) return x;
    p = r + (rr_next / rr) * p;
    rr = rr_next;
  }
  throw IterationLimitError("cg_solve: no convergence within " +
                                std::to_string(cfg.max_iterations) +
                                " iterations",
                            static_cast<double>(best));
}

/// log|a| from a Cholesky factorization.
template <typename Derived>
typename Derived::Scalar logdet_dense(const Eigen::MatrixBase<Derived> &a) {
  using Scalar = typename Derived::Scalar;
  if (a.rows() != a.cols()) {
    throw DimensionError("logdet_dense: matrix is not square");
  }
  const Eigen::LLT<MatrixX<Scalar>> llt(a);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("logdet_dense: matrix is not positive definite");
  }
  return Scalar(2) * llt.matrixLLT().diagonal().array().log().sum();
}

/// Stochastic Lanczos quadrature estimate of log|A| with Rademacher probes.
/// Each probe runs up to `steps` Lanczos iterations with full
/// reorthogonalization; a vanishing off-diagonal ends the probe early and the
/// estimate uses the steps completed so far.
template <typename Scalar>
Scalar logdet_lanczos(const LinearOperator<Scalar> &apply, Index dim,
                      Index probes, Index steps, std::uint64_t seed) {
  if (dim < 1 || probes < 1 || steps < 1) {
    throw UsageError("logdet_lanczos: dim, probes and steps must be >= 1");
  }
  const Index max_steps = std::min(steps, dim);
  std::mt19937_64 rng(seed);
  Scalar total = 0;
  for (Index probe = 0; probe < probes; ++probe) {
    VectorX<Scalar> z(dim);
    for (Index i = 0; i < dim; ++i) z(i) = (rng() & 1u) ? Scalar(1) : Scalar(-1);
    const Scalar z_norm2 = z.squaredNorm();

    MatrixX<Scalar> basis(dim, max_steps);
    VectorX<Scalar> alpha(max_steps);
    VectorX<Scalar> beta(max_steps);
    basis.col(0) = z / std::sqrt(z_norm2);
    Index used = 0;
    for (Index j = 0; j < max_steps; ++j) {
      VectorX<Scalar> w = apply(basis.col(j));
      alpha(j) = basis.col(j).dot(w);
      used = j + 1;
      // Two passes of Gram-Schmidt against every previous vector.
      for (int pass = 0; pass < 2; ++pass) {
        w -= basis.leftCols(used) * (basis.leftCols(used).transpose() * w);
      }
      if (j + 1 == max_steps) break;
      beta(j) = w.norm();
      if (beta(j) <= Scalar(1e-12) * std::max(Scalar(1), std::abs(alpha(j)))) {
        break;
      }
      basis.col(j + 1) = w / beta(j);
    }

    Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> eig;
    const VectorX<Scalar> diag = alpha.head(used);
    const VectorX<Scalar> sub =
        used > 1 ? VectorX<Scalar>(beta.head(used - 1)) : VectorX<Scalar>();
    eig.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
    if (eig.info() != Eigen::Success) {
      throw NumericalError("logdet_lanczos: tridiagonal eigensolve failed");
    }
    const auto &theta = eig.eigenvalues();
    if (theta.minCoeff() <= Scalar(0)) {
      throw NumericalError("logdet_lanczos: operator is not positive definite");
    }
    const VectorX<Scalar> tau = eig.eigenvectors().row(0).transpose();
    total += z_norm2 * (tau.array().square() * theta.array().log()).sum();
  }
  return total / static_cast<Scalar>(probes);
}

/// Both sides of vec(C^T)^T (A kron B) vec(C^T) = tr(A C B^T C^T), each
/// computed on its own: the left through an explicit Kronecker product, the
/// right through ordinary products.
template <typename DerivedA, typename DerivedB, typename DerivedC>
std::pair<typename DerivedA::Scalar, typename DerivedA::Scalar>
quad_form_identity_check(const Eigen::MatrixBase<DerivedA> &a,
                         const Eigen::MatrixBase<DerivedB> &b,
                         const Eigen::MatrixBase<DerivedC> &c) {
  if (a.rows() != a.cols() || b.rows() != b.cols() || c.rows() != a.rows() ||
      c.cols() != b.rows()) {
    throw DimensionError("quad_form_identity_check: need A NxN, B MxM, C NxM");
  }
  const auto v = vec_t(c);
  const auto lhs = v.dot(kron(a, b) * v);
  const auto rhs = (a * c * b.transpose() * c.transpose()).trace();
  return {lhs, rhs};
}

/// (tr(CD), tr(DC)) for C N x M and D M x N.
template <typename DerivedC, typename DerivedD>
std::pair<typename DerivedC::Scalar, typename DerivedC::Scalar>
trace_cyclic_check(const Eigen::MatrixBase<DerivedC> &c,
                   const Eigen::MatrixBase<DerivedD> &d) {
  if (c.rows() != d.cols() || c.cols() != d.rows()) {
    throw DimensionError("trace_cyclic_check: need C NxM and D MxN");
  }
  return {(c * d).trace(), (d * c).trace()};
}

/// 0.5 (a + a^T).
template <typename Derived>
MatrixX<typename Derived::Scalar> symmetrize(const Eigen::MatrixBase<Derived> &a) {
  return (a + a.transpose()) / typename Derived::Scalar(2);
}

} // namespace mtgp

#endif // MTGP_LINALG_HPP_
