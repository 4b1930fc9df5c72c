#ifndef MTGP_ESTIMATORS_HPP_
#define MTGP_ESTIMATORS_HPP_

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

#include "mtgp/dataset.hpp"
#include "mtgp/likelihood.hpp"
#include "mtgp/params.hpp"

namespace mtgp {

inline constexpr double kNoiseFloor = 1e-10;
inline constexpr double kTaskCovRidge = 1e-8;

/// Settings for the quasi-Newton inner optimizer. Restart 0 starts at the
/// given point; restart r > 0 adds N(0, restart_scale^2) noise to every flat
/// parameter using an RNG stream derived from (seed, r).
struct InnerOptConfig {
  Index max_iterations = 200;
  double gradient_tolerance = 1e-5;
  Index step_memory = 10;
  Index num_restarts = 1;
  std::uint64_t seed = 0;
  double restart_scale = 0.5;
};

enum class EStepMode { kSample, kExactMoments };

struct EmConfig {
  Index num_latent_samples = 50;
  Index max_em_iterations = 10;
  InnerOptConfig theta_opt{};
  std::uint64_t seed = 0;
  EStepMode e_step_mode = EStepMode::kSample;
};

/// Outcome of a fit. trace holds the marginal log-likelihood after each
/// iteration; final_objective is its last entry, or the objective at the
/// initial point when no iteration ran.
struct FitResult {
  MtgpParams params;
  double final_objective = 0.0;
  std::vector<double> trace;
  bool converged = false;
  Index iterations_used = 0;
};

/// p(f | y) over the row-major latent vector vec_t(F).
struct LatentPosterior {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

LatentPosterior latent_posterior(const MtgpParams &p, const Dataset &ds);

/// k draws from the posterior, each reshaped to an N x M latent table.
std::vector<Eigen::MatrixXd> sample_latents(const LatentPosterior &post,
                                            Index num_tasks, Index k,
                                            std::uint64_t seed);

/// sigma_m^2 = mean over samples and points of (y - f)^2, floored.
NoiseParams m_step_sigma(const Dataset &ds,
                         const std::vector<Eigen::MatrixXd> &latents);
/// Same update with the expectation taken in closed form.
NoiseParams m_step_sigma(const Dataset &ds, const LatentPosterior &post);

/// Cholesky factor of mean_k F_k^T K_x^{-1} F_k / N + ridge I.
TaskCov m_step_task_cov(const Dataset &ds,
                        const std::vector<Eigen::MatrixXd> &latents,
                        const Eigen::LLT<Eigen::MatrixXd> &kx);
/// Same update with E[F^T K_x^{-1} F] taken in closed form.
TaskCov m_step_task_cov(const Dataset &ds, const LatentPosterior &post,
                        const Eigen::LLT<Eigen::MatrixXd> &kx);

/// Profiled objective for the kernel hyperparameters (to be minimized):
///   M log|K_x| + N log( mean_k |F_k^T K_x^{-1} F_k| )
double m_step_theta_objective(const KernelParams &p, const Dataset &ds,
                              const std::vector<Eigen::MatrixXd> &latents,
                              double jitter = kDefaultJitter);
/// Exact-moments variant: M log|K_x| + N log|E[F^T K_x^{-1} F]|. This moves
/// the expectation inside the log-determinant and is an approximation.
double m_step_theta_objective(const KernelParams &p, const Dataset &ds,
                              const LatentPosterior &post,
                              double jitter = kDefaultJitter);

/// Monte-Carlo EM over (theta, K_f, Sigma). Full datasets only.
FitResult em_fit(const Dataset &ds, const MtgpParams &init, const EmConfig &cfg);

/// Quasi-Newton maximization of the marginal log-likelihood with restarts.
/// `route` selects the covariance layout used for the gradient.
FitResult gradient_fit(const Dataset &ds, const MtgpParams &init,
                       const InnerOptConfig &cfg,
                       GradRoute route = GradRoute::kAuto);

} // namespace mtgp

#endif // MTGP_ESTIMATORS_HPP_
