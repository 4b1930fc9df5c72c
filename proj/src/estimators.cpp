#include "mtgp/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <string>

#include "mtgp/error.hpp"
#include "mtgp/kernels.hpp"
#include "mtgp/optimize.hpp"
#include "mtgp/sampling.hpp"

namespace mtgp {

namespace {

constexpr double kEmRelativeTolerance = 1e-6;
constexpr Index kEmStableIterations = 3;
constexpr double kThetaFdStep = 1e-5;

void require_full(const Dataset &ds, const char *who) {
  if (!ds.is_full()) {
    throw UsageError(std::string(who) + " requires full observations");
  }
}

void require_latents(const Dataset &ds,
                     const std::vector<Eigen::MatrixXd> &latents,
                     const char *who) {
  if (latents.empty()) {
    throw UsageError(std::string(who) + ": need at least one latent sample");
  }
  for (const auto &f : latents) {
    if (f.rows() != ds.num_points() || f.cols() != ds.num_tasks()) {
      throw DimensionError(std::string(who) + ": latent table has wrong shape");
    }
  }
}

Eigen::LLT<Eigen::MatrixXd> factor_kx(const KernelParams &p, const Dataset &ds,
                                      double jitter) {
  Eigen::LLT<Eigen::MatrixXd> llt(kernel_matrix(p, ds.inputs(), jitter));
  if (llt.info() != Eigen::Success) {
    throw NumericalError("K_x is not positive definite");
  }
  return llt;
}

double llt_logdet(const Eigen::LLT<Eigen::MatrixXd> &llt) {
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

double spd_logdet(const Eigen::MatrixXd &a, const char *who) {
  const Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() != Eigen::Success) {
    throw NumericalError(std::string(who) + ": matrix is not positive definite");
  }
  return llt_logdet(llt);
}

/// E[F^T K_x^{-1} F] under the latent posterior.
Eigen::MatrixXd expected_whitened_gram(const Dataset &ds,
                                       const LatentPosterior &post,
                                       const Eigen::LLT<Eigen::MatrixXd> &kx) {
  const Index n = ds.num_points();
  const Index m = ds.num_tasks();
  const Eigen::MatrixXd mean = unvec_t(post.mean, n, m);
  const Eigen::MatrixXd kx_inv = kx.solve(Eigen::MatrixXd::Identity(n, n));
  Eigen::MatrixXd out = mean.transpose() * kx.solve(mean);
  for (Index a = 0; a < m; ++a) {
    for (Index b = 0; b < m; ++b) {
      double acc = 0.0;
      for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < n; ++j) {
          acc += kx_inv(i, j) * post.cov(i * m + a, j * m + b);
        }
      }
      out(a, b) += acc;
    }
  }
  return symmetrize(out);
}

TaskCov task_cov_from_gram(Eigen::MatrixXd gram) {
  gram.diagonal().array() += kTaskCovRidge;
  return TaskCov::from_covariance(symmetrize(gram));
}

Eigen::VectorXd perturbed_start(const Eigen::VectorXd &x0, Index restart,
                                const InnerOptConfig &cfg) {
  if (restart == 0) return x0;
  std::mt19937_64 rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(restart)));
  std::normal_distribution<double> normal(0.0, cfg.restart_scale);
  Eigen::VectorXd x = x0;
  for (Index i = 0; i < x.size(); ++i) x(i) += normal(rng);
  return x;
}

void check_inner_config(const InnerOptConfig &cfg) {
  if (cfg.max_iterations < 0 || cfg.step_memory < 1 || cfg.num_restarts < 1 ||
      !(cfg.gradient_tolerance > 0) || !(cfg.restart_scale >= 0)) {
    throw UsageError("InnerOptConfig: counts must be positive and tolerance > 0");
  }
}

optim::LbfgsConfig lbfgs_config(const InnerOptConfig &cfg) {
  optim::LbfgsConfig out;
  out.max_iterations = cfg.max_iterations;
  out.gradient_tolerance = cfg.gradient_tolerance;
  out.memory = cfg.step_memory;
  return out;
}

/// Minimizes the theta objective over the log-lengthscales with numeric
/// gradients. The signal variance cancels in the profiled objective (K_f
/// absorbs the scale), so it is held at its starting value.
KernelParams optimize_theta(const KernelParams &start,
                            const std::function<double(const KernelParams &)> &objective,
                            const InnerOptConfig &cfg) {
  const auto to_params = [&start](const Eigen::VectorXd &x) {
    return KernelParams{x, start.log_signal_variance};
  };
  const auto value = [&](const Eigen::VectorXd &x) {
    const double v = objective(to_params(x));
    if (!std::isfinite(v)) throw NumericalError("theta objective not finite");
    return v;
  };
  const optim::Objective f = [&](const Eigen::VectorXd &x, Eigen::VectorXd &g) {
    g = optim::central_difference_gradient(value, x, kThetaFdStep);
    return value(x);
  };

  const Eigen::VectorXd x0 = start.log_lengthscales;
  double best_value = std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_x;
  std::ostringstream failures;
  for (Index r = 0; r < cfg.num_restarts; ++r) {
    try {
      const auto res =
          optim::minimize_lbfgs(f, perturbed_start(x0, r, cfg), lbfgs_config(cfg));
      if (res.value < best_value) {
        best_value = res.value;
        best_x = res.x;
      }
    } catch (const NumericalError &e) {
      failures << " [restart " << r << ": " << e.what() << "]";
    }
  }
  if (best_x.size() == 0) {
    throw FitError("theta optimization failed for every restart:" +
                   failures.str());
  }
  return to_params(best_x);
}

} // namespace

LatentPosterior latent_posterior(const MtgpParams &p, const Dataset &ds) {
  require_full(ds, "latent_posterior");
  const Eigen::MatrixXd c = dense_covariance(p, ds);
  const Eigen::LLT<Eigen::MatrixXd> llt(c);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("latent_posterior: covariance is not positive definite");
  }
  const Eigen::MatrixXd kxf =
      kron(kernel_matrix(p.kernel, ds.inputs(), p.jitter), task_cov_matrix(p.task));
  const Eigen::VectorXd y = ds.flattened_outputs();
  LatentPosterior post;
  post.mean = kxf * llt.solve(y);
  post.cov = symmetrize(kxf - kxf * llt.solve(kxf));
  return post;
}

std::vector<Eigen::MatrixXd> sample_latents(const LatentPosterior &post,
                                            Index num_tasks, Index k,
                                            std::uint64_t seed) {
  if (num_tasks < 1 || post.mean.size() % num_tasks != 0) {
    throw DimensionError("sample_latents: mean length is not a multiple of M");
  }
  const Eigen::MatrixXd draws = sample_gaussian(post.mean, post.cov, k, seed);
  std::vector<Eigen::MatrixXd> out;
  out.reserve(static_cast<std::size_t>(k));
  for (Index j = 0; j < k; ++j) {
    out.push_back(unvec_t(draws.col(j), post.mean.size() / num_tasks, num_tasks));
  }
  return out;
}

NoiseParams m_step_sigma(const Dataset &ds,
                         const std::vector<Eigen::MatrixXd> &latents) {
  require_full(ds, "m_step_sigma");
  require_latents(ds, latents, "m_step_sigma");
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(ds.num_tasks());
  for (const auto &f : latents) {
    sum += (ds.outputs() - f).array().square().colwise().sum().matrix().transpose();
  }
  const double denom =
      static_cast<double>(ds.num_points()) * static_cast<double>(latents.size());
  const Eigen::VectorXd var = (sum / denom).cwiseMax(kNoiseFloor);
  return NoiseParams{var.array().log().matrix()};
}

NoiseParams m_step_sigma(const Dataset &ds, const LatentPosterior &post) {
  require_full(ds, "m_step_sigma");
  const Index n = ds.num_points();
  const Index m = ds.num_tasks();
  const Eigen::MatrixXd mean = unvec_t(post.mean, n, m);
  const Eigen::MatrixXd var = unvec_t(post.cov.diagonal(), n, m);
  const Eigen::VectorXd expected =
      ((ds.outputs() - mean).array().square() + var.array())
          .colwise()
          .mean()
          .matrix()
          .transpose();
  return NoiseParams{expected.cwiseMax(kNoiseFloor).array().log().matrix()};
}

TaskCov m_step_task_cov(const Dataset &ds,
                        const std::vector<Eigen::MatrixXd> &latents,
                        const Eigen::LLT<Eigen::MatrixXd> &kx) {
  require_full(ds, "m_step_task_cov");
  require_latents(ds, latents, "m_step_task_cov");
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(ds.num_tasks(), ds.num_tasks());
  for (const auto &f : latents) {
    const Eigen::MatrixXd w = kx.matrixL().solve(f);
    gram += w.transpose() * w;
  }
  gram /= static_cast<double>(ds.num_points()) * static_cast<double>(latents.size());
  return task_cov_from_gram(std::move(gram));
}

TaskCov m_step_task_cov(const Dataset &ds, const LatentPosterior &post,
                        const Eigen::LLT<Eigen::MatrixXd> &kx) {
  require_full(ds, "m_step_task_cov");
  return task_cov_from_gram(expected_whitened_gram(ds, post, kx) /
                            static_cast<double>(ds.num_points()));
}

double m_step_theta_objective(const KernelParams &p, const Dataset &ds,
                              const std::vector<Eigen::MatrixXd> &latents,
                              double jitter) {
  require_full(ds, "m_step_theta_objective");
  require_latents(ds, latents, "m_step_theta_objective");
  const auto kx = factor_kx(p, ds, jitter);
  Eigen::VectorXd logdets(static_cast<Index>(latents.size()));
  for (std::size_t k = 0; k < latents.size(); ++k) {
    const Eigen::MatrixXd w = kx.matrixL().solve(latents[k]);
    logdets(static_cast<Index>(k)) =
        spd_logdet(w.transpose() * w, "m_step_theta_objective");
  }
  // log of the mean determinant, computed in log space.
  const double top = logdets.maxCoeff();
  const double log_mean_det =
      top + std::log((logdets.array() - top).exp().mean());
  return static_cast<double>(ds.num_tasks()) * llt_logdet(kx) +
         static_cast<double>(ds.num_points()) * log_mean_det;
}

double m_step_theta_objective(const KernelParams &p, const Dataset &ds,
                              const LatentPosterior &post, double jitter) {
  require_full(ds, "m_step_theta_objective");
  const auto kx = factor_kx(p, ds, jitter);
  const double log_det_gram = spd_logdet(expected_whitened_gram(ds, post, kx),
                                         "m_step_theta_objective");
  return static_cast<double>(ds.num_tasks()) * llt_logdet(kx) +
         static_cast<double>(ds.num_points()) * log_det_gram;
}

FitResult em_fit(const Dataset &ds, const MtgpParams &init, const EmConfig &cfg) {
  require_full(ds, "EM");
  init.check_compatible(ds);
  check_inner_config(cfg.theta_opt);
  if (cfg.num_latent_samples < 1 || cfg.max_em_iterations < 0) {
    throw UsageError("EmConfig: num_latent_samples must be >= 1");
  }

  FitResult result{init, 0.0, {}, false, 0};
  if (cfg.max_em_iterations == 0) {
    result.final_objective = mll_dense(init, ds);
    return result;
  }

  const bool sample = cfg.e_step_mode == EStepMode::kSample;
  const Index k = cfg.num_latent_samples;
  MtgpParams current = init;
  Index stable = 0;
  for (Index it = 0; it < cfg.max_em_iterations; ++it) {
    const auto stream = static_cast<std::uint64_t>(2 * it);

    // Sample latents and refit theta against the profiled objective.
    const LatentPosterior post = latent_posterior(current, ds);
    KernelParams theta;
    if (sample) {
      const auto latents =
          sample_latents(post, ds.num_tasks(), k, derive_seed(cfg.seed, stream));
      theta = optimize_theta(
          current.kernel,
          [&](const KernelParams &kp) {
            return m_step_theta_objective(kp, ds, latents, current.jitter);
          },
          cfg.theta_opt);
    } else {
      theta = optimize_theta(
          current.kernel,
          [&](const KernelParams &kp) {
            return m_step_theta_objective(kp, ds, post, current.jitter);
          },
          cfg.theta_opt);
    }

    // Resample under the new theta, then the closed-form noise and task
    // covariance updates.
    MtgpParams with_theta{theta, current.task, current.noise, current.jitter};
    const LatentPosterior post_new = latent_posterior(with_theta, ds);
    const auto kx = factor_kx(theta, ds, current.jitter);
    if (sample) {
      const auto latents = sample_latents(post_new, ds.num_tasks(), k,
                                          derive_seed(cfg.seed, stream + 1));
      current = MtgpParams{theta, m_step_task_cov(ds, latents, kx),
                           m_step_sigma(ds, latents), current.jitter};
    } else {
      current = MtgpParams{theta, m_step_task_cov(ds, post_new, kx),
                           m_step_sigma(ds, post_new), current.jitter};
    }

    const double value = mll_dense(current, ds);
    if (!result.trace.empty()) {
      const double prev = result.trace.back();
      const double rel = std::abs(value - prev) / std::max(1.0, std::abs(prev));
      stable = rel < kEmRelativeTolerance ? stable + 1 : 0;
    }
    result.trace.push_back(value);
    if (stable >= kEmStableIterations) {
      result.converged = true;
      break;
    }
  }
  result.params = current;
  result.final_objective = result.trace.back();
  result.iterations_used = static_cast<Index>(result.trace.size());
  return result;
}

FitResult gradient_fit(const Dataset &ds, const MtgpParams &init,
                       const InnerOptConfig &cfg, GradRoute route) {
  init.check_compatible(ds);
  check_inner_config(cfg);

  const optim::Objective negative_mll = [&](const Eigen::VectorXd &x,
                                            Eigen::VectorXd &g) {
    const GradReport rep = mll_grad(init.with_flat(x), ds, route);
    g = -rep.gradient;
    return -rep.value;
  };

  const Eigen::VectorXd x0 = init.flatten();
  std::optional<optim::LbfgsResult> best;
  std::ostringstream failures;
  for (Index r = 0; r < cfg.num_restarts; ++r) {
    try {
      auto res = optim::minimize_lbfgs(negative_mll, perturbed_start(x0, r, cfg),
                                       lbfgs_config(cfg));
      if (!best || res.value < best->value) best = std::move(res);
    } catch (const NumericalError &e) {
      failures << " [restart " << r << ": " << e.what() << "]";
    }
  }
  if (!best) {
    throw FitError("gradient_fit: every restart failed:" + failures.str());
  }

  FitResult result{init.with_flat(best->x), -best->value, {}, best->converged, 0};
  result.trace.reserve(best->trace.size());
  for (const double v : best->trace) result.trace.push_back(-v);
  result.iterations_used = static_cast<Index>(result.trace.size());
  return result;
}

} // namespace mtgp
