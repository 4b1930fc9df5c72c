#include "mtgp/dataset.hpp"

#include <cmath>
#include <string>

#include "mtgp/error.hpp"

namespace mtgp {

Dataset::Dataset(Eigen::MatrixXd inputs, Eigen::MatrixXd outputs)
    : inputs_(std::move(inputs)), outputs_(std::move(outputs)) {
  if (inputs_.rows() < 1 || inputs_.cols() < 1 || outputs_.cols() < 1) {
    throw DimensionError("Dataset: need N >= 1, D >= 1 and M >= 1");
  }
  if (inputs_.rows() != outputs_.rows()) {
    throw DimensionError("Dataset: " + std::to_string(inputs_.rows()) +
                         " inputs but " + std::to_string(outputs_.rows()) +
                         " output rows");
  }
  if (!inputs_.allFinite()) {
    throw UsageError("Dataset: inputs must be finite");
  }
  for (Index i = 0; i < outputs_.size(); ++i) {
    if (std::isinf(outputs_.data()[i])) {
      throw UsageError("Dataset: outputs must be finite or missing");
    }
  }

  const Index n_tasks = outputs_.cols();
  per_task_counts_.assign(static_cast<std::size_t>(n_tasks), 0);
  task_offsets_.assign(static_cast<std::size_t>(n_tasks), 0);
  Index offset = 0;
  for (Index m = 0; m < n_tasks; ++m) {
    task_offsets_[m] = offset;
    for (Index n = 0; n < outputs_.rows(); ++n) {
      if (std::isfinite(outputs_(n, m))) {
        observations_.push_back({n, m});
        ++per_task_counts_[m];
      }
    }
    if (per_task_counts_[m] == 0) {
      throw UsageError("task " + std::to_string(m + 1) + " has no observations");
    }
    offset += per_task_counts_[m];
  }
}

bool Dataset::observed(Index point, Index task) const {
  return std::isfinite(outputs_(point, task));
}

Eigen::VectorXd Dataset::observed_outputs() const {
  Eigen::VectorXd y(num_observed());
  for (Index a = 0; a < num_observed(); ++a) {
    const auto &o = observations_[a];
    y(a) = outputs_(o.point, o.task);
  }
  return y;
}

Eigen::VectorXd Dataset::flattened_outputs() const {
  if (!is_full()) {
    throw UsageError("Dataset: flattened outputs need full observations");
  }
  return vec_t(outputs_);
}

Eigen::MatrixXd Dataset::task_inputs(Index task) const {
  Eigen::MatrixXd out(per_task_counts_.at(task), input_dim());
  Index row = 0;
  for (Index n = 0; n < num_points(); ++n) {
    if (observed(n, task)) out.row(row++) = inputs_.row(n);
  }
  return out;
}

Eigen::VectorXd Dataset::task_outputs(Index task) const {
  Eigen::VectorXd out(per_task_counts_.at(task));
  Index row = 0;
  for (Index n = 0; n < num_points(); ++n) {
    if (observed(n, task)) out(row++) = outputs_(n, task);
  }
  return out;
}

} // namespace mtgp
