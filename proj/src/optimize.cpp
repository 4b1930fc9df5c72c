#include "mtgp/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

#include "mtgp/error.hpp"

namespace mtgp::optim {

namespace {

constexpr double kArmijo = 1e-4;
constexpr double kCurvature = 0.9;
constexpr double kInf = std::numeric_limits<double>::infinity();

struct Trial {
  double step = 0.0;
  double value = kInf;
  double slope = 0.0; // directional derivative, valid when value is finite
  Eigen::VectorXd grad;
};

class LineSearch {
public:
  LineSearch(const Objective &f, const Eigen::VectorXd &x,
             const Eigen::VectorXd &dir, double f0, double slope0, Index budget)
      : f_(f), x_(x), dir_(dir), f0_(f0), slope0_(slope0), budget_(budget) {}

  /// Strong-Wolfe step, or a step satisfying only sufficient decrease when
  /// the budget runs out. Returns false if no decreasing step was found.
  bool run(double initial_step, Trial &out) {
    Trial prev{0.0, f0_, slope0_, {}};
    double step = initial_step;
    for (Index i = 0; budget_ > 0; ++i) {
      Trial cur = eval(step);
      if (!armijo(cur) || (i > 0 && cur.value >= prev.value)) {
        return zoom(prev, cur, out);
      }
      if (std::abs(cur.slope) <= -kCurvature * slope0_) {
        out = cur;
        return true;
      }
      if (cur.slope >= 0) return zoom(cur, prev, out);
      prev = cur;
      step *= 2.0;
    }
    return accept_if_decreasing(prev, out);
  }

private:
  Trial eval(double step) {
    --budget_;
    Trial t;
    t.step = step;
    t.grad.resize(x_.size());
    try {
      t.value = f_(x_ + step * dir_, t.grad);
    } catch (const NumericalError &) {
      t.value = kInf;
    }
    if (!std::isfinite(t.value) || !t.grad.allFinite()) {
      t.value = kInf;
      return t;
    }
    t.slope = t.grad.dot(dir_);
    return t;
  }

  bool armijo(const Trial &t) const {
    return std::isfinite(t.value) && t.value <= f0_ + kArmijo * t.step * slope0_;
  }

  bool accept_if_decreasing(const Trial &t, Trial &out) const {
    if (t.step > 0 && std::isfinite(t.value) && t.value < f0_) {
      out = t;
      return true;
    }
    return false;
  }

  // lo satisfies sufficient decrease and has the lowest value seen so far;
  // hi brackets a Wolfe point together with lo.
  bool zoom(Trial lo, Trial hi, Trial &out) {
    while (budget_ > 0) {
      const double a = lo.step;
      const double b = hi.step;
      double step = 0.5 * (a + b);
      if (std::isfinite(hi.value) && std::isfinite(lo.value)) {
        // Minimizer of the quadratic through (a, lo.value, lo.slope) and
        // (b, hi.value), kept inside the middle 80% of the interval.
        const double d = b - a;
        const double denom = 2.0 * (hi.value - lo.value - lo.slope * d);
        if (denom > 0) {
          const double q = a - lo.slope * d * d / denom;
          const double lo_bound = std::min(a, b) + 0.1 * std::abs(d);
          const double hi_bound = std::max(a, b) - 0.1 * std::abs(d);
          step = std::clamp(q, lo_bound, hi_bound);
        }
      }
      if (std::abs(b - a) <= 1e-16 * std::max(1.0, std::abs(a))) break;
      Trial cur = eval(step);
      if (!armijo(cur) || cur.value >= lo.value) {
        hi = cur;
      } else {
        if (std::abs(cur.slope) <= -kCurvature * slope0_) {
          out = cur;
          return true;
        }
        if (cur.slope * (hi.step - lo.step) >= 0) hi = lo;
        lo = cur;
      }
    }
    return accept_if_decreasing(lo, out);
  }

  const Objective &f_;
  const Eigen::VectorXd &x_;
  const Eigen::VectorXd &dir_;
  double f0_;
  double slope0_;
  Index budget_;
};

} // namespace

LbfgsResult minimize_lbfgs(const Objective &f, Eigen::VectorXd x0,
                           const LbfgsConfig &cfg) {
  if (cfg.max_iterations < 0 || cfg.memory < 1 ||
      !(cfg.gradient_tolerance > 0) || cfg.max_line_search < 1) {
    throw UsageError("minimize_lbfgs: invalid configuration");
  }
  LbfgsResult res;
  res.x = std::move(x0);
  res.gradient.resize(res.x.size());
  res.value = f(res.x, res.gradient);
  if (!std::isfinite(res.value) || !res.gradient.allFinite()) {
    throw NumericalError("minimize_lbfgs: objective is not finite at start");
  }

  std::deque<Eigen::VectorXd> s_hist;
  std::deque<Eigen::VectorXd> y_hist;
  std::deque<double> rho_hist;

  for (Index it = 0; it < cfg.max_iterations; ++it) {
    if (res.gradient.lpNorm<Eigen::Infinity>() <= cfg.gradient_tolerance) {
      res.converged = true;
      return res;
    }

    // Two-loop recursion.
    Eigen::VectorXd dir = -res.gradient;
    const auto h = static_cast<Index>(s_hist.size());
    std::vector<double> alpha(static_cast<std::size_t>(h));
    for (Index i = h - 1; i >= 0; --i) {
      alpha[i] = rho_hist[i] * s_hist[i].dot(dir);
      dir -= alpha[i] * y_hist[i];
    }
    if (h > 0) dir *= s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
    for (Index i = 0; i < h; ++i) {
      const double beta = rho_hist[i] * y_hist[i].dot(dir);
      dir += (alpha[i] - beta) * s_hist[i];
    }

    double slope = res.gradient.dot(dir);
    if (!(slope < 0)) {
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      dir = -res.gradient;
      slope = -res.gradient.squaredNorm();
    }
    const double initial_step =
        s_hist.empty() ? std::min(1.0, 1.0 / dir.lpNorm<Eigen::Infinity>()) : 1.0;

    Trial accepted;
    LineSearch search(f, res.x, dir, res.value, slope, cfg.max_line_search);
    if (!search.run(initial_step, accepted)) {
      if (s_hist.empty()) break; // steepest descent made no progress
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      continue;
    }

    const Eigen::VectorXd s = accepted.step * dir;
    const Eigen::VectorXd y = accepted.grad - res.gradient;
    res.x += s;
    res.value = accepted.value;
    res.gradient = accepted.grad;
    res.trace.push_back(res.value);

    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      s_hist.push_back(s);
      y_hist.push_back(y);
      rho_hist.push_back(1.0 / sy);
      if (static_cast<Index>(s_hist.size()) > cfg.memory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }
  }
  res.converged =
      res.gradient.lpNorm<Eigen::Infinity>() <= cfg.gradient_tolerance;
  return res;
}

Eigen::VectorXd
central_difference_gradient(const std::function<double(const Eigen::VectorXd &)> &f,
                            const Eigen::VectorXd &x, double h) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd probe = x;
  for (Index i = 0; i < x.size(); ++i) {
    probe(i) = x(i) + h;
    const double up = f(probe);
    probe(i) = x(i) - h;
    const double down = f(probe);
    probe(i) = x(i);
    g(i) = (up - down) / (2.0 * h);
  }
  return g;
}

} // namespace mtgp::optim
