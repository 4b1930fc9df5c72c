#include "mtgp/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mtgp/error.hpp"
#include "mtgp/optimize.hpp"

namespace mtgp {

GradcheckReport gradcheck(const MtgpParams &p, const Dataset &ds,
                          double threshold, GradientFn gradient, double h) {
  p.check_compatible(ds);
  if (!gradient) {
    gradient = [](const MtgpParams &q, const Dataset &d) { return mll_grad(q, d); };
  }
  const GradReport analytic = gradient(p, ds);
  const Eigen::VectorXd x0 = p.flatten();
  const Eigen::VectorXd numeric = optim::central_difference_gradient(
      [&](const Eigen::VectorXd &x) { return mll(p.with_flat(x), ds); }, x0, h);
  if (analytic.gradient.size() != numeric.size()) {
    throw DimensionError("gradcheck: analytic gradient has the wrong length");
  }

  GradcheckReport report;
  report.value = analytic.value;
  const auto names = p.param_names();
  for (Index i = 0; i < numeric.size(); ++i) {
    const double a = analytic.gradient(i);
    const double n = numeric(i);
    const double err = std::abs(a - n) / std::max({1.0, std::abs(a), std::abs(n)});
    report.entries.push_back({names[static_cast<std::size_t>(i)], a, n, err});
    report.max_error = std::max(report.max_error, std::isnan(err) ? std::numeric_limits<double>::infinity() : err);
  }
  report.passed = report.max_error <= threshold;
  return report;
}

} // namespace mtgp
