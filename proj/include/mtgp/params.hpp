#ifndef MTGP_PARAMS_HPP_
#define MTGP_PARAMS_HPP_

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "mtgp/dataset.hpp"
#include "mtgp/kernels.hpp"

namespace mtgp {

/// Full hyperparameter set of the multi-task model.
///
/// Flattening order (used by gradients and optimizers):
///   [log l_0 .. log l_{D-1}, log s^2,
///    TaskCov::flatten() (lower triangle row by row, log on the diagonal),
///    log sigma_0^2 .. log sigma_{M-1}^2]
///
/// `jitter` is a fixed numerical setting, not a hyperparameter, and is not
/// part of the flat vector.
struct MtgpParams {
  KernelParams kernel;
  TaskCov task;
  NoiseParams noise;
  double jitter = kDefaultJitter;

  /// Lengthscales 1, signal variance 1, L = I, sigma_m^2 = 0.01 var(y_m).
  static MtgpParams defaults(const Dataset &ds);

  Index input_dim() const { return kernel.input_dim(); }
  Index num_tasks() const { return task.num_tasks(); }
  Index num_params() const;

  Eigen::VectorXd flatten() const;
  /// Same shapes and jitter, new flat values.
  MtgpParams with_flat(const Eigen::VectorXd &flat) const;
  /// Human-readable name for each flat position.
  std::vector<std::string> param_names() const;

  /// Throws if the shapes disagree with ds.
  void check_compatible(const Dataset &ds) const;
};

} // namespace mtgp

#endif // MTGP_PARAMS_HPP_
