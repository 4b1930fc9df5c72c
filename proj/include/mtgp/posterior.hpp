#ifndef MTGP_POSTERIOR_HPP_
#define MTGP_POSTERIOR_HPP_

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <vector>

#include "mtgp/dataset.hpp"
#include "mtgp/params.hpp"

namespace mtgp {

/// Query points (one per row) and the task each one is asked about.
struct PredictionRequest {
  Eigen::MatrixXd new_inputs;
  std::vector<Index> tasks;
  bool want_cov = false;
  /// Add sigma_m^2 to the predictive variance (observation space) instead of
  /// predicting the noise-free latent value.
  bool include_noise = false;
};

struct Prediction {
  Eigen::VectorXd means;
  Eigen::VectorXd variances;
  std::optional<Eigen::MatrixXd> cov;
};

/// Posterior of the multi-task process at the requested (input, task) pairs:
///   mean = k_*^T C^{-1} y,  cov = K_** - k_*^T C^{-1} k_*
/// where C is the block covariance of the observed entries and every
/// cross-covariance is k(x, x') (K_f)_{m, m'}.
Prediction predict(const MtgpParams &p, const Dataset &ds,
                   const PredictionRequest &req);

/// k joint draws from a prediction that carries a covariance, one per column.
Eigen::MatrixXd sample_predictions(const Prediction &pred, Index k,
                                   std::uint64_t seed);

} // namespace mtgp

#endif // MTGP_POSTERIOR_HPP_
