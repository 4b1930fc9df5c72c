#ifndef MTGP_TESTS_TEST_SUPPORT_HPP_
#define MTGP_TESTS_TEST_SUPPORT_HPP_

// Random instance generators and independent dense oracles shared by the
// unit and acceptance tests.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

#include "mtgp/dataset.hpp"
#include "mtgp/kernels.hpp"
#include "mtgp/linalg.hpp"
#include "mtgp/params.hpp"

namespace mtgp::testing {

class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double normal() { return std::normal_distribution<double>(0.0, 1.0)(engine_); }
  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  Index integer(Index lo, Index hi) {
    return std::uniform_int_distribution<Index>(lo, hi)(engine_);
  }
  bool coin(double p) { return std::bernoulli_distribution(p)(engine_); }

  Eigen::MatrixXd gaussian(Index rows, Index cols) {
    Eigen::MatrixXd m(rows, cols);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = normal();
    return m;
  }
  Eigen::MatrixXd uniform_matrix(Index rows, Index cols, double lo, double hi) {
    Eigen::MatrixXd m(rows, cols);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = uniform(lo, hi);
    return m;
  }
  /// A^T A / n + shift I, well conditioned.
  Eigen::MatrixXd spd(Index n, double shift = 1.0) {
    const Eigen::MatrixXd a = gaussian(n, n);
    return a.transpose() * a / static_cast<double>(n) +
           shift * Eigen::MatrixXd::Identity(n, n);
  }
  /// Random matrix shifted away from singularity.
  Eigen::MatrixXd invertible(Index n) {
    return gaussian(n, n) + 3.0 * Eigen::MatrixXd::Identity(n, n);
  }

  std::mt19937_64 &engine() { return engine_; }

private:
  std::mt19937_64 engine_;
};

/// Random inputs spread over [0, 3]^D so the kernel matrix is well
/// conditioned at moderate lengthscales.
inline Eigen::MatrixXd random_inputs(Rng &rng, Index n, Index d) {
  return rng.uniform_matrix(n, d, 0.0, 3.0);
}

/// Random full dataset with smooth-ish outputs.
inline Dataset random_full_dataset(Rng &rng, Index n, Index m, Index d = 1) {
  return Dataset(random_inputs(rng, n, d), rng.gaussian(n, m));
}

/// Random dataset with roughly `missing` of its entries masked; every task
/// keeps at least one observation.
inline Dataset random_masked_dataset(Rng &rng, Index n, Index m, double missing,
                                     Index d = 1) {
  Eigen::MatrixXd y = rng.gaussian(n, m);
  for (Index j = 0; j < m; ++j) {
    const Index keep = rng.integer(0, n - 1);
    for (Index i = 0; i < n; ++i) {
      if (i != keep && rng.coin(missing)) {
        y(i, j) = std::numeric_limits<double>::quiet_NaN();
      }
    }
  }
  return Dataset(random_inputs(rng, n, d), std::move(y));
}

/// Parameters drawn around moderate values.
inline MtgpParams random_params(Rng &rng, Index d, Index m) {
  KernelParams kernel{Eigen::VectorXd(d), rng.uniform(-0.5, 0.5)};
  for (Index i = 0; i < d; ++i) kernel.log_lengthscales(i) = rng.uniform(-0.3, 0.5);
  Eigen::MatrixXd raw = Eigen::MatrixXd::Zero(m, m);
  for (Index i = 0; i < m; ++i) {
    for (Index j = 0; j < i; ++j) raw(i, j) = rng.uniform(-0.8, 0.8);
    raw(i, i) = rng.uniform(-0.4, 0.4);
  }
  NoiseParams noise{Eigen::VectorXd(m)};
  for (Index i = 0; i < m; ++i) noise.log_noise_variances(i) = rng.uniform(-3.0, -0.5);
  return MtgpParams{std::move(kernel), TaskCov(std::move(raw)), std::move(noise),
                    kDefaultJitter};
}

/// Explicit column-selection matrix P (total x kept).
inline Eigen::MatrixXd explicit_selection(const SelectionMap &sel) {
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(sel.total(), sel.size());
  for (Index c = 0; c < sel.size(); ++c) p(sel.kept()[c], c) = 1.0;
  return p;
}

/// Kronecker product straight from its definition.
inline Eigen::MatrixXd kron_by_loops(const Eigen::MatrixXd &a, const Eigen::MatrixXd &b) {
  Eigen::MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j)
      for (Index k = 0; k < b.rows(); ++k)
        for (Index l = 0; l < b.cols(); ++l)
          out(i * b.rows() + k, j * b.cols() + l) = a(i, j) * b(k, l);
  return out;
}

/// log N(y | mean, cov) through an eigendecomposition, independent of the
/// Cholesky-based library code.
inline double gaussian_logpdf(const Eigen::VectorXd &y, const Eigen::VectorXd &mean,
                              const Eigen::MatrixXd &cov) {
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  const Eigen::VectorXd r = eig.eigenvectors().transpose() * (y - mean);
  const Eigen::VectorXd lam = eig.eigenvalues();
  const double n = static_cast<double>(y.size());
  return -0.5 * (lam.array().log().sum() + (r.array().square() / lam.array()).sum() +
                 n * std::log(2.0 * std::numbers::pi));
}

/// Full covariance K_x kron K_f + I kron Sigma built with the loop Kronecker.
inline Eigen::MatrixXd oracle_full_covariance(const MtgpParams &p, const Dataset &ds) {
  const Eigen::MatrixXd kx = kernel_matrix(p.kernel, ds.inputs(), p.jitter);
  const Eigen::MatrixXd kf = task_cov_matrix(p.task);
  const Eigen::MatrixXd noise = p.noise.variances().asDiagonal();
  return kron_by_loops(kx, kf) +
         kron_by_loops(Eigen::MatrixXd::Identity(ds.num_points(), ds.num_points()), noise);
}

/// Marginal log-likelihood of the observed entries through the padded
/// covariance and an explicit P.
inline double oracle_mll(const MtgpParams &p, const Dataset &ds) {
  const SelectionMap sel = ds.selection();
  const Eigen::MatrixXd pm = explicit_selection(sel);
  const Eigen::MatrixXd c = pm.transpose() * oracle_full_covariance(p, ds) * pm;
  Eigen::VectorXd y_full = vec_t(ds.outputs());
  for (Index i = 0; i < y_full.size(); ++i) {
    if (!std::isfinite(y_full(i))) y_full(i) = 0.0;
  }
  const Eigen::VectorXd y = pm.transpose() * y_full;
  return gaussian_logpdf(y, Eigen::VectorXd::Zero(y.size()), c);
}

/// A dataset drawn from a known two-task model: inputs uniform on [0, 3],
/// unit lengthscale and signal variance, unit task variances with the given
/// correlation, equal noise variances.
struct SyntheticMtgp {
  MtgpParams truth;
  Dataset data;
};

inline SyntheticMtgp generate_mtgp(Rng &rng, Index n, double correlation,
                                   double noise_variance) {
  Eigen::MatrixXd kf(2, 2);
  kf << 1.0, correlation, correlation, 1.0;
  MtgpParams truth{KernelParams::unit(1), TaskCov::from_covariance(kf),
                   NoiseParams{Eigen::VectorXd::Constant(2, std::log(noise_variance))},
                   kDefaultJitter};
  const Eigen::MatrixXd x = random_inputs(rng, n, 1);
  Eigen::MatrixXd c = kron_by_loops(kernel_matrix(truth.kernel, x, truth.jitter), kf);
  c.diagonal().array() += noise_variance;
  const Eigen::LLT<Eigen::MatrixXd> llt(c);
  const Eigen::VectorXd y = llt.matrixL() * rng.gaussian(2 * n, 1);
  return {truth, Dataset(x, unvec_t(y, n, 2))};
}

/// Correlation coefficient implied by a task covariance.
inline double task_correlation(const TaskCov &t) {
  const Eigen::MatrixXd kf = task_cov_matrix(t);
  return kf(0, 1) / std::sqrt(kf(0, 0) * kf(1, 1));
}

/// Central difference of a scalar function of one variable.
inline double central_difference(const std::function<double(double)> &f, double x,
                                 double h = 1e-5) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

/// Entrywise central difference of a matrix-valued function.
inline Eigen::MatrixXd central_difference(
    const std::function<Eigen::MatrixXd(double)> &f, double x, double h = 1e-5) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max(std::abs(b), std::numeric_limits<double>::min());
}

inline double rel_err(const Eigen::MatrixXd &a, const Eigen::MatrixXd &b) {
  const double denom = std::max(b.norm(), std::numeric_limits<double>::min());
  return (a - b).norm() / denom;
}

/// Gradient agreement with a relative tolerance and an absolute floor.
inline bool close(double a, double b, double rel, double abs_floor) {
  return std::abs(a - b) <= std::max(rel * std::max(std::abs(a), std::abs(b)), abs_floor);
}

} // namespace mtgp::testing

#endif // MTGP_TESTS_TEST_SUPPORT_HPP_
