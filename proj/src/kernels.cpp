#include "mtgp/kernels.hpp"

#include <cmath>
#include <string>

#include "mtgp/error.hpp"

namespace mtgp {

KernelParams KernelParams::unit(Index input_dim) {
  return KernelParams{Eigen::VectorXd::Zero(input_dim), 0.0};
}

double KernelParams::signal_variance() const {
  return std::exp(log_signal_variance);
}

TaskCov::TaskCov(Eigen::MatrixXd raw) : raw_(std::move(raw)) {
  if (raw_.rows() != raw_.cols() || raw_.rows() < 1) {
    throw DimensionError("TaskCov: raw factor must be square and non-empty");
  }
  if (!raw_.allFinite()) throw UsageError("TaskCov: entries must be finite");
  raw_.triangularView<Eigen::StrictlyUpper>().setZero();
}

TaskCov TaskCov::identity(Index num_tasks) {
  return TaskCov(Eigen::MatrixXd::Zero(num_tasks, num_tasks));
}

TaskCov TaskCov::from_factor(const Eigen::MatrixXd &factor) {
  Eigen::MatrixXd raw = factor.triangularView<Eigen::Lower>();
  for (Index i = 0; i < raw.rows(); ++i) {
    if (!(raw(i, i) > 0)) {
      throw UsageError("TaskCov: factor diagonal must be positive");
    }
    raw(i, i) = std::log(raw(i, i));
  }
  return TaskCov(std::move(raw));
}

TaskCov TaskCov::from_covariance(const Eigen::MatrixXd &cov) {
  const Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("TaskCov: covariance is not positive definite");
  }
  return from_factor(llt.matrixL());
}

Eigen::MatrixXd TaskCov::factor() const {
  Eigen::MatrixXd l = raw_;
  l.diagonal() = raw_.diagonal().array().exp().matrix();
  return l;
}

Eigen::VectorXd TaskCov::flatten() const {
  Eigen::VectorXd flat(num_params());
  Index k = 0;
  for (Index i = 0; i < num_tasks(); ++i) {
    for (Index j = 0; j <= i; ++j) flat(k++) = raw_(i, j);
  }
  return flat;
}

TaskCov TaskCov::unflatten(const Eigen::VectorXd &flat, Index num_tasks) {
  if (flat.size() != num_tasks * (num_tasks + 1) / 2) {
    throw DimensionError("TaskCov::unflatten: wrong parameter count");
  }
  Eigen::MatrixXd raw = Eigen::MatrixXd::Zero(num_tasks, num_tasks);
  Index k = 0;
  for (Index i = 0; i < num_tasks; ++i) {
    for (Index j = 0; j <= i; ++j) raw(i, j) = flat(k++);
  }
  return TaskCov(std::move(raw));
}

Eigen::VectorXd NoiseParams::variances() const {
  return log_noise_variances.array().exp().matrix();
}

namespace {

Eigen::ArrayXd inverse_sq_lengthscales(const KernelParams &p) {
  return (-2.0 * p.log_lengthscales.array()).exp();
}

} // namespace

double kernel_eval(const KernelParams &p,
                   const Eigen::Ref<const Eigen::VectorXd> &x1,
                   const Eigen::Ref<const Eigen::VectorXd> &x2) {
  if (x1.size() != p.input_dim() || x2.size() != p.input_dim()) {
    throw DimensionError("kernel_eval: points must have dimension " +
                         std::to_string(p.input_dim()));
  }
  const double r2 =
      ((x1 - x2).array().square() * inverse_sq_lengthscales(p)).sum();
  return p.signal_variance() * std::exp(-0.5 * r2);
}

Eigen::MatrixXd cross_kernel_matrix(const KernelParams &p,
                                    const Eigen::MatrixXd &xs1,
                                    const Eigen::MatrixXd &xs2) {
  if (xs1.cols() != p.input_dim() || xs2.cols() != p.input_dim()) {
    throw DimensionError("cross_kernel_matrix: input dimension mismatch");
  }
  const Eigen::ArrayXd inv_l2 = inverse_sq_lengthscales(p);
  const double s2 = p.signal_variance();
  Eigen::MatrixXd k(xs1.rows(), xs2.rows());
  for (Index i = 0; i < xs1.rows(); ++i) {
    for (Index j = 0; j < xs2.rows(); ++j) {
      const double r2 =
          ((xs1.row(i) - xs2.row(j)).array().square().transpose() * inv_l2)
              .sum();
      k(i, j) = s2 * std::exp(-0.5 * r2);
    }
  }
  return k;
}

Eigen::MatrixXd kernel_matrix(const KernelParams &p, const Eigen::MatrixXd &xs,
                              double jitter) {
  if (jitter < 0) throw UsageError("kernel_matrix: jitter must be >= 0");
  Eigen::MatrixXd k = cross_kernel_matrix(p, xs, xs);
  k.diagonal().array() += jitter;
  return k;
}

Eigen::MatrixXd block_kernel_matrix(const KernelParams &p, const Dataset &ds,
                                    double jitter) {
  const Eigen::MatrixXd kx = kernel_matrix(p, ds.inputs(), jitter);
  const auto &obs = ds.observations();
  const Index s = ds.num_observed();
  Eigen::MatrixXd out(s, s);
  for (Index a = 0; a < s; ++a) {
    for (Index b = 0; b < s; ++b) out(a, b) = kx(obs[a].point, obs[b].point);
  }
  return out;
}

Eigen::MatrixXd task_cov_matrix(const TaskCov &t) {
  const Eigen::MatrixXd l = t.factor();
  return l * l.transpose();
}

Eigen::MatrixXd kernel_matrix_derivative(const KernelParams &p,
                                         const Eigen::MatrixXd &xs,
                                         KernelParamId which) {
  const Index d_count = p.input_dim();
  if (which.flat() < 0 || which.flat() > d_count) {
    throw DimensionError("kernel_matrix_derivative: unknown parameter id " +
                         std::to_string(which.flat()));
  }
  const Eigen::MatrixXd k = cross_kernel_matrix(p, xs, xs);
  if (which.flat() == d_count) return k;

  // d/d(log l_d) of exp(-0.5 (x_d - x'_d)^2 / l_d^2) gives (x_d - x'_d)^2 / l_d^2.
  const Index d = which.flat();
  const double inv_l2 = std::exp(-2.0 * p.log_lengthscales(d));
  Eigen::MatrixXd dk(k.rows(), k.cols());
  for (Index i = 0; i < xs.rows(); ++i) {
    for (Index j = 0; j < xs.rows(); ++j) {
      const double diff = xs(i, d) - xs(j, d);
      dk(i, j) = k(i, j) * diff * diff * inv_l2;
    }
  }
  return dk;
}

Eigen::MatrixXd task_cov_derivative(const TaskCov &t, Index i, Index j) {
  const Index m = t.num_tasks();
  if (i < 0 || i >= m || j < 0 || j > i) {
    throw DimensionError("task_cov_derivative: (" + std::to_string(i) + "," +
                         std::to_string(j) + ") is not a lower-triangular entry");
  }
  const Eigen::MatrixXd l = t.factor();
  // E_ij L^T has row i equal to column j of L; L E_ji is its transpose.
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(m, m);
  d.row(i) += l.col(j).transpose();
  d.col(i) += l.col(j);
  if (i == j) d *= l(i, i);
  return d;
}

Eigen::MatrixXd noise_derivative(const NoiseParams &n, Index m) {
  if (m < 0 || m >= n.num_tasks()) {
    throw DimensionError("noise_derivative: task index " + std::to_string(m) +
                         " out of range");
  }
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n.num_tasks(), n.num_tasks());
  d(m, m) = std::exp(n.log_noise_variances(m));
  return d;
}

} // namespace mtgp
