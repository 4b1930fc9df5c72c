#ifndef MTGP_SAMPLING_HPP_
#define MTGP_SAMPLING_HPP_

#include <Eigen/Dense>

#include <cstdint>

#include "mtgp/linalg.hpp"

namespace mtgp {

/// R with R R^T = cov for a symmetric positive semidefinite cov. Eigenvalues
/// in [-1e-8 max(1, |lambda|_max), 0) are clamped to zero; anything more
/// negative is a NumericalError.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd &cov);

/// k joint-Gaussian draws, one per column. Deterministic given seed.
Eigen::MatrixXd sample_gaussian(const Eigen::VectorXd &mean,
                                const Eigen::MatrixXd &cov, Index k,
                                std::uint64_t seed);

/// Independent RNG stream for (seed, stream) pairs.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

} // namespace mtgp

#endif // MTGP_SAMPLING_HPP_
