#ifndef MTGP_LIKELIHOOD_HPP_
#define MTGP_LIKELIHOOD_HPP_

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

#include "mtgp/dataset.hpp"
#include "mtgp/linalg.hpp"
#include "mtgp/params.hpp"

namespace mtgp {

// All objectives are true log-densities: the -(n/2) log(2 pi) normalizers
// are included.

/// Diagonalizations behind the O(N^3 + M^3) marginal likelihood:
///   K_x = U_x diag(lambda_x) U_x^T
///   Sigma^{-1/2} K_f Sigma^{-1/2} = V_f diag(lambda_f) V_f^T
/// noise_sqrt holds sigma_m.
struct KronEigenFactors {
  Eigen::MatrixXd u_x;
  Eigen::VectorXd lambda_x;
  Eigen::MatrixXd v_f;
  Eigen::VectorXd lambda_f;
  Eigen::VectorXd noise_sqrt;
};

/// Objective value and its gradient in MtgpParams flattening order.
struct GradReport {
  double value = 0.0;
  Eigen::VectorXd gradient;
};

enum class MaskedSolve { kExact, kIterative };
enum class LogdetMethod { kDense, kLanczos };

/// How mll_masked evaluates the solve and log-determinant terms.
/// kExact factors the block covariance once. kIterative solves with CG over
/// masked Kronecker matvecs and takes the log-determinant from `logdet`.
struct MaskedOptions {
  MaskedSolve solve = MaskedSolve::kExact;
  LogdetMethod logdet = LogdetMethod::kDense;
  CgConfig cg{};
  Index lanczos_probes = 30;
  Index lanczos_steps = 30;
  std::uint64_t seed = 0;
};

/// Which covariance layout mll_grad differentiates. kAuto takes the
/// Kronecker (row-major) layout for full datasets and the task-major block
/// layout otherwise. kMasked forces the block layout even for full data.
enum class GradRoute { kAuto, kKronecker, kMasked };

/// K_x kron K_f + I_N kron Sigma, in row-major order. Full datasets only.
Eigen::MatrixXd dense_covariance(const MtgpParams &p, const Dataset &ds);

/// Block (Khatri-Rao) covariance of the observed entries in task-major order:
/// block (i,j) is K_x^{(i,j)} (K_f)_{ij}, plus sigma_i^2 I on diagonal blocks.
Eigen::MatrixXd masked_covariance(const MtgpParams &p, const Dataset &ds);

/// Marginal log-likelihood via a dense Cholesky of the NM x NM covariance.
double mll_dense(const MtgpParams &p, const Dataset &ds);

KronEigenFactors kron_eigen_factorize(const MtgpParams &p, const Dataset &ds);

/// Marginal log-likelihood from the eigendecomposition cache. Never builds an
/// NM x NM matrix.
double mll_kron_fast(const MtgpParams &p, const Dataset &ds,
                     const KronEigenFactors &cache);

/// Marginal log-likelihood of the observed entries.
double mll_masked(const MtgpParams &p, const Dataset &ds,
                  const MaskedOptions &opts = {});

/// Kronecker fast path for full data, exact masked path otherwise.
double mll(const MtgpParams &p, const Dataset &ds);

/// Marginal log-likelihood and its analytic gradient:
///   dL/dz = 0.5 alpha^T G alpha - 0.5 tr(Q G),  Q = C^{-1}, alpha = Q y,
/// with G = dC/dz built per parameter from the kernel, task and noise
/// derivatives.
GradReport mll_grad(const MtgpParams &p, const Dataset &ds,
                    GradRoute route = GradRoute::kAuto);

/// log N(y | f, S) + log N(f | 0, K_x kron K_f) for a full latent table f
/// (N x M), in the structured form that avoids NM x NM algebra.
double complete_data_log_likelihood(const MtgpParams &p, const Dataset &ds,
                                    const Eigen::MatrixXd &f);

/// Row-major list of all N*M entries, the observation order of the Kronecker
/// layout.
std::vector<Observation> row_major_observations(Index num_points,
                                                Index num_tasks);

/// Entry (a,b) = kx(point_a, point_b) * kf(task_a, task_b), plus
/// noise(task_a) when a == b and noise is non-empty.
Eigen::MatrixXd assemble_covariance(const Eigen::MatrixXd &kx,
                                    const Eigen::MatrixXd &kf,
                                    const Eigen::VectorXd &noise,
                                    const std::vector<Observation> &obs);

} // namespace mtgp

#endif // MTGP_LIKELIHOOD_HPP_
