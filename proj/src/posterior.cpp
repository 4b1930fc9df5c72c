#include "mtgp/posterior.hpp"

#include <string>

#include "mtgp/error.hpp"
#include "mtgp/kernels.hpp"
#include "mtgp/likelihood.hpp"
#include "mtgp/sampling.hpp"

namespace mtgp {

namespace {

constexpr double kVarianceClamp = 1e-10;

} // namespace

Prediction predict(const MtgpParams &p, const Dataset &ds,
                   const PredictionRequest &req) {
  p.check_compatible(ds);
  const Index q = req.new_inputs.rows();
  if (q < 1) throw UsageError("predict: need at least one query point");
  if (req.new_inputs.cols() != ds.input_dim()) {
    throw DimensionError("predict: query points must have dimension " +
                         std::to_string(ds.input_dim()));
  }
  if (static_cast<Index>(req.tasks.size()) != q) {
    throw DimensionError("predict: one task index per query point required");
  }
  for (const Index m : req.tasks) {
    if (m < 0 || m >= ds.num_tasks()) {
      throw UsageError("predict: unknown task index " + std::to_string(m));
    }
  }

  const Eigen::MatrixXd kf = task_cov_matrix(p.task);
  const auto &obs = ds.observations();
  const Index s = ds.num_observed();

  const Eigen::LLT<Eigen::MatrixXd> llt(masked_covariance(p, ds));
  if (llt.info() != Eigen::Success) {
    throw NumericalError("predict: training covariance is not positive definite");
  }

  // Cross-covariance between observations (task-major) and queries.
  const Eigen::MatrixXd kx_cross =
      cross_kernel_matrix(p.kernel, ds.inputs(), req.new_inputs);
  Eigen::MatrixXd k_star(s, q);
  for (Index j = 0; j < q; ++j) {
    for (Index a = 0; a < s; ++a) {
      k_star(a, j) = kx_cross(obs[a].point, j) * kf(obs[a].task, req.tasks[j]);
    }
  }

  Prediction pred;
  pred.means = k_star.transpose() * llt.solve(ds.observed_outputs());

  const Eigen::MatrixXd whitened = llt.matrixL().solve(k_star);
  const Eigen::VectorXd noise = p.noise.variances();
  if (req.want_cov) {
    const Eigen::MatrixXd kx_qq =
        cross_kernel_matrix(p.kernel, req.new_inputs, req.new_inputs);
    Eigen::MatrixXd prior(q, q);
    for (Index i = 0; i < q; ++i) {
      for (Index j = 0; j < q; ++j) {
        prior(i, j) = kx_qq(i, j) * kf(req.tasks[i], req.tasks[j]);
      }
    }
    Eigen::MatrixXd cov =
        symmetrize(Eigen::MatrixXd(prior - whitened.transpose() * whitened));
    if (req.include_noise) {
      for (Index i = 0; i < q; ++i) cov(i, i) += noise(req.tasks[i]);
    }
    pred.variances = cov.diagonal();
    pred.cov = std::move(cov);
  } else {
    pred.variances.resize(q);
    for (Index j = 0; j < q; ++j) {
      const double prior =
          p.kernel.signal_variance() * kf(req.tasks[j], req.tasks[j]);
      pred.variances(j) = prior - whitened.col(j).squaredNorm();
      if (req.include_noise) pred.variances(j) += noise(req.tasks[j]);
    }
  }

  for (Index j = 0; j < q; ++j) {
    double &v = pred.variances(j);
    if (v < -kVarianceClamp) {
      throw NumericalError("predict: negative predictive variance " +
                           std::to_string(v));
    }
    if (v < 0) {
      v = 0;
      if (pred.cov) (*pred.cov)(j, j) = 0;
    }
  }
  return pred;
}

Eigen::MatrixXd sample_predictions(const Prediction &pred, Index k,
                                   std::uint64_t seed) {
  if (!pred.cov) {
    throw UsageError("sample_predictions: prediction has no covariance");
  }
  return sample_gaussian(pred.means, *pred.cov, k, seed);
}

} // namespace mtgp
