#ifndef MTGP_DATASET_HPP_
#define MTGP_DATASET_HPP_

#include <Eigen/Dense>

#include <vector>

#include "mtgp/linalg.hpp"

namespace mtgp {

/// One observed output, identified by its input point and task.
struct Observation {
  Index point;
  Index task;
};

/// N input points in D dimensions and an N x M output table. Missing outputs
/// are stored as NaN.
///
/// Two orderings of the observed entries are used:
///  - row-major ("point-major"), index n*M + m, which is the order of the
///    flattened table and of selection();
///  - task-major, all observations of task 0 first, then task 1, and so on,
///    each in increasing point order. observations(), observed_outputs() and
///    the block covariance all use this order. Task m occupies the half-open
///    range [task_offsets()[m], task_offsets()[m] + per_task_counts()[m]).
class Dataset {
public:
  Dataset(Eigen::MatrixXd inputs, Eigen::MatrixXd outputs);

  Index num_points() const { return inputs_.rows(); }
  Index input_dim() const { return inputs_.cols(); }
  Index num_tasks() const { return outputs_.cols(); }
  Index num_observed() const { return static_cast<Index>(observations_.size()); }

  const Eigen::MatrixXd &inputs() const { return inputs_; }
  const Eigen::MatrixXd &outputs() const { return outputs_; }

  bool observed(Index point, Index task) const;
  bool is_full() const { return num_observed() == outputs_.size(); }

  const std::vector<Index> &per_task_counts() const { return per_task_counts_; }
  const std::vector<Index> &task_offsets() const { return task_offsets_; }

  /// Task-major list of observed entries.
  const std::vector<Observation> &observations() const { return observations_; }
  /// Observed outputs in task-major order.
  Eigen::VectorXd observed_outputs() const;
  /// Row-major selection of observed entries of the flattened table.
  SelectionMap selection() const { return SelectionMap::from_finite(outputs_); }
  /// vec_t(Y). Only defined for full datasets.
  Eigen::VectorXd flattened_outputs() const;

  /// Inputs of the observations of task m.
  Eigen::MatrixXd task_inputs(Index task) const;
  /// Observed outputs of task m.
  Eigen::VectorXd task_outputs(Index task) const;

private:
  Eigen::MatrixXd inputs_;
  Eigen::MatrixXd outputs_;
  std::vector<Index> per_task_counts_;
  std::vector<Index> task_offsets_;
  std::vector<Observation> observations_;
};

} // namespace mtgp

#endif // MTGP_DATASET_HPP_
