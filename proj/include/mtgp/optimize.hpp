#ifndef MTGP_OPTIMIZE_HPP_
#define MTGP_OPTIMIZE_HPP_

#include <Eigen/Dense>

#include <functional>
#include <vector>

#include "mtgp/linalg.hpp"

namespace mtgp::optim {

/// Returns f(x) and writes the gradient into `grad`. May throw
/// mtgp::NumericalError for points outside the objective's domain; the line
/// search treats those as +infinity.
using Objective =
    std::function<double(const Eigen::VectorXd &x, Eigen::VectorXd &grad)>;

struct LbfgsConfig {
  Index max_iterations = 200;
  double gradient_tolerance = 1e-5; // on the infinity norm
  Index memory = 10;
  Index max_line_search = 40;
};

struct LbfgsResult {
  Eigen::VectorXd x;
  double value = 0.0;
  Eigen::VectorXd gradient;
  std::vector<double> trace; // objective after each accepted step
  bool converged = false;
};

/// Limited-memory BFGS minimization with a strong-Wolfe line search. Every
/// accepted step strictly decreases the objective.
LbfgsResult minimize_lbfgs(const Objective &f, Eigen::VectorXd x0,
                           const LbfgsConfig &cfg);

/// Central-difference gradient with step h in every coordinate.
Eigen::VectorXd
central_difference_gradient(const std::function<double(const Eigen::VectorXd &)> &f,
                            const Eigen::VectorXd &x, double h = 1e-5);

} // namespace mtgp::optim

#endif // MTGP_OPTIMIZE_HPP_
