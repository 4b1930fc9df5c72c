#include "mtgp/sampling.hpp"

#include <algorithm>
#include <random>

#include "mtgp/error.hpp"

namespace mtgp {

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd &cov) {
  if (cov.rows() != cov.cols()) {
    throw DimensionError("psd_sqrt: covariance must be square");
  }
  if (cov.size() == 0) return cov;
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(symmetrize(cov));
  if (eig.info() != Eigen::Success) {
    throw NumericalError("psd_sqrt: eigendecomposition failed");
  }
  Eigen::VectorXd lambda = eig.eigenvalues();
  const double scale = std::max(1.0, lambda.cwiseAbs().maxCoeff());
  if (lambda.minCoeff() < -1e-8 * scale) {
    throw NumericalError("psd_sqrt: covariance is not positive semidefinite");
  }
  lambda = lambda.cwiseMax(0.0);
  return eig.eigenvectors() * lambda.cwiseSqrt().asDiagonal();
}

Eigen::MatrixXd sample_gaussian(const Eigen::VectorXd &mean,
                                const Eigen::MatrixXd &cov, Index k,
                                std::uint64_t seed) {
  if (cov.rows() != mean.size() || cov.cols() != mean.size()) {
    throw DimensionError("sample_gaussian: mean and covariance disagree");
  }
  if (k < 1) throw UsageError("sample_gaussian: need k >= 1");
  const Eigen::MatrixXd root = psd_sqrt(cov);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd z(mean.size(), k);
  for (Index j = 0; j < k; ++j) {
    for (Index i = 0; i < mean.size(); ++i) z(i, j) = normal(rng);
  }
  return (root * z).colwise() + mean;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 over the combined value.
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

} // namespace mtgp
