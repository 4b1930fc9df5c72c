#include "mtgp/params.hpp"

#include <cmath>

#include "mtgp/error.hpp"

namespace mtgp {

MtgpParams MtgpParams::defaults(const Dataset &ds) {
  Eigen::VectorXd log_noise(ds.num_tasks());
  for (Index m = 0; m < ds.num_tasks(); ++m) {
    const Eigen::VectorXd y = ds.task_outputs(m);
    const double var =
        y.size() > 1 ? (y.array() - y.mean()).square().sum() / double(y.size())
                     : 0.0;
    log_noise(m) = std::log(var > 0 ? 0.01 * var : 0.01);
  }
  return MtgpParams{KernelParams::unit(ds.input_dim()),
                    TaskCov::identity(ds.num_tasks()),
                    NoiseParams{log_noise}, kDefaultJitter};
}

Index MtgpParams::num_params() const {
  return kernel.num_params() + task.num_params() + noise.num_tasks();
}

Eigen::VectorXd MtgpParams::flatten() const {
  Eigen::VectorXd flat(num_params());
  flat << kernel.log_lengthscales, kernel.log_signal_variance, task.flatten(),
      noise.log_noise_variances;
  return flat;
}

MtgpParams MtgpParams::with_flat(const Eigen::VectorXd &flat) const {
  if (flat.size() != num_params()) {
    throw DimensionError("MtgpParams::with_flat: expected " +
                         std::to_string(num_params()) + " values, got " +
                         std::to_string(flat.size()));
  }
  const Index d = input_dim();
  const Index m = num_tasks();
  const Index nt = task.num_params();
  return MtgpParams{
      KernelParams{flat.head(d), flat(d)},
      TaskCov::unflatten(flat.segment(d + 1, nt), m),
      NoiseParams{flat.tail(m)},
      jitter,
  };
}

std::vector<std::string> MtgpParams::param_names() const {
  std::vector<std::string> names;
  for (Index d = 0; d < input_dim(); ++d) {
    names.push_back("log_lengthscale[" + std::to_string(d) + "]");
  }
  names.emplace_back("log_signal_variance");
  for (Index i = 0; i < num_tasks(); ++i) {
    for (Index j = 0; j <= i; ++j) {
      const std::string ij = std::to_string(i) + "," + std::to_string(j);
      names.push_back(i == j ? "log_L[" + ij + "]" : "L[" + ij + "]");
    }
  }
  for (Index m = 0; m < num_tasks(); ++m) {
    names.push_back("log_noise_variance[" + std::to_string(m) + "]");
  }
  return names;
}

void MtgpParams::check_compatible(const Dataset &ds) const {
  if (input_dim() != ds.input_dim() || num_tasks() != ds.num_tasks() ||
      noise.num_tasks() != ds.num_tasks()) {
    throw DimensionError("parameters are for D=" + std::to_string(input_dim()) +
                         ", M=" + std::to_string(num_tasks()) +
                         " but dataset has D=" + std::to_string(ds.input_dim()) +
                         ", M=" + std::to_string(ds.num_tasks()));
  }
}

} // namespace mtgp
