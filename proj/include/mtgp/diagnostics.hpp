#ifndef MTGP_DIAGNOSTICS_HPP_
#define MTGP_DIAGNOSTICS_HPP_

#include <Eigen/Dense>

#include <functional>
#include <string>
#include <vector>

#include "mtgp/dataset.hpp"
#include "mtgp/likelihood.hpp"
#include "mtgp/params.hpp"

namespace mtgp {

struct GradcheckEntry {
  std::string name;
  double analytic = 0.0;
  double numeric = 0.0;
  /// |analytic - numeric| / max(1, |analytic|, |numeric|)
  double error = 0.0;
};

struct GradcheckReport {
  double value = 0.0;
  std::vector<GradcheckEntry> entries;
  double max_error = 0.0;
  bool passed = false;
};

/// Analytic gradient under test. Defaults to mll_grad.
using GradientFn =
    std::function<GradReport(const MtgpParams &, const Dataset &)>;

/// Compares the analytic gradient of the marginal log-likelihood with central
/// differences of mll() at every flat parameter.
GradcheckReport gradcheck(const MtgpParams &p, const Dataset &ds,
                          double threshold = 1e-4, GradientFn gradient = {},
                          double h = 1e-5);

} // namespace mtgp

#endif // MTGP_DIAGNOSTICS_HPP_
