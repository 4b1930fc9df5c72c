#ifndef MTGP_KERNELS_HPP_
#define MTGP_KERNELS_HPP_

#include <Eigen/Dense>

#include "mtgp/dataset.hpp"
#include "mtgp/linalg.hpp"

namespace mtgp {

inline constexpr double kDefaultJitter = 1e-8;

/// ARD squared-exponential kernel parameters in log space:
///   k(x, x') = s^2 exp(-0.5 sum_d (x_d - x'_d)^2 / l_d^2)
struct KernelParams {
  Eigen::VectorXd log_lengthscales;
  double log_signal_variance = 0.0;

  /// Unit lengthscales and unit signal variance.
  static KernelParams unit(Index input_dim);

  Index input_dim() const { return log_lengthscales.size(); }
  Index num_params() const { return input_dim() + 1; }
  double signal_variance() const;
};

/// Names one kernel hyperparameter: a log-lengthscale or the log signal
/// variance. The flat index is the position in KernelParams flattening.
class KernelParamId {
public:
  static KernelParamId lengthscale(Index dim) { return KernelParamId(dim); }
  static KernelParamId signal_variance(Index input_dim) {
    return KernelParamId(input_dim);
  }
  static KernelParamId from_flat(Index flat) { return KernelParamId(flat); }

  Index flat() const { return flat_; }

private:
  explicit KernelParamId(Index flat) : flat_(flat) {}
  Index flat_;
};

/// Index kernel over tasks, K_f = L L^T. The factor is stored in raw form:
/// strictly lower entries as-is, diagonal entries as logs.
class TaskCov {
public:
  explicit TaskCov(Eigen::MatrixXd raw);

  static TaskCov identity(Index num_tasks);
  /// From a lower-triangular factor with positive diagonal.
  static TaskCov from_factor(const Eigen::MatrixXd &factor);
  /// From a symmetric positive definite K_f via Cholesky.
  static TaskCov from_covariance(const Eigen::MatrixXd &cov);

  Index num_tasks() const { return raw_.rows(); }
  Index num_params() const { return num_tasks() * (num_tasks() + 1) / 2; }
  const Eigen::MatrixXd &raw() const { return raw_; }
  /// L with the diagonal exponentiated.
  Eigen::MatrixXd factor() const;

  /// Lower triangle of raw(), row by row: (0,0), (1,0), (1,1), (2,0), ...
  Eigen::VectorXd flatten() const;
  static TaskCov unflatten(const Eigen::VectorXd &flat, Index num_tasks);

private:
  Eigen::MatrixXd raw_;
};

/// Per-task observation noise variances, stored as logs.
struct NoiseParams {
  Eigen::VectorXd log_noise_variances;

  Index num_tasks() const { return log_noise_variances.size(); }
  Eigen::VectorXd variances() const;
};

double kernel_eval(const KernelParams &p, const Eigen::Ref<const Eigen::VectorXd> &x1,
                   const Eigen::Ref<const Eigen::VectorXd> &x2);

/// K_x over the rows of xs, plus jitter on the diagonal.
Eigen::MatrixXd kernel_matrix(const KernelParams &p, const Eigen::MatrixXd &xs,
                              double jitter = kDefaultJitter);

/// Rectangular kernel matrix between the rows of xs1 and xs2.
Eigen::MatrixXd cross_kernel_matrix(const KernelParams &p,
                                    const Eigen::MatrixXd &xs1,
                                    const Eigen::MatrixXd &xs2);

/// Task-major block kernel over the observed entries: block (i,j) holds
/// k(x, x') for x observed in task i and x' observed in task j. Jitter is
/// applied wherever the two observations share an input point, so the
/// result is K_x (with jitter) restricted to the observations.
Eigen::MatrixXd block_kernel_matrix(const KernelParams &p, const Dataset &ds,
                                    double jitter = kDefaultJitter);

Eigen::MatrixXd task_cov_matrix(const TaskCov &t);

/// dK_x / d(log parameter), no jitter contribution.
Eigen::MatrixXd kernel_matrix_derivative(const KernelParams &p,
                                         const Eigen::MatrixXd &xs,
                                         KernelParamId which);

/// dK_f / d raw(i, j) for j <= i. For diagonal entries this includes the
/// chain factor L(i,i) of the log parameterization.
Eigen::MatrixXd task_cov_derivative(const TaskCov &t, Index i, Index j);

/// dSigma / d(log sigma_m^2) = sigma_m^2 E_mm, as an M x M matrix.
Eigen::MatrixXd noise_derivative(const NoiseParams &n, Index m);

} // namespace mtgp

#endif // MTGP_KERNELS_HPP_
