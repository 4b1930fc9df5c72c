#include "mtgp/likelihood.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "mtgp/error.hpp"
#include "mtgp/kernels.hpp"

namespace mtgp {

namespace {

const double kLog2Pi = std::log(2.0 * std::numbers::pi);
constexpr double kEigenClamp = 1e-10;

void require_full(const Dataset &ds, const char *who) {
  if (!ds.is_full()) {
    throw UsageError(std::string(who) + " requires full observations");
  }
}

Eigen::LLT<Eigen::MatrixXd> factorize(const Eigen::MatrixXd &c,
                                      const char *who) {
  Eigen::LLT<Eigen::MatrixXd> llt(c);
  if (llt.info() != Eigen::Success) {
    throw NumericalError(std::string(who) +
                         ": covariance is not positive definite");
  }
  return llt;
}

double gaussian_logpdf(const Eigen::LLT<Eigen::MatrixXd> &llt,
                       const Eigen::VectorXd &y) {
  const double logdet =
      2.0 * llt.matrixLLT().diagonal().array().log().sum();
  const Eigen::VectorXd w = llt.matrixL().solve(y);
  return -0.5 * logdet - 0.5 * w.squaredNorm() -
         0.5 * static_cast<double>(y.size()) * kLog2Pi;
}

Eigen::VectorXd clamp_eigenvalues(Eigen::VectorXd lambda, const char *what) {
  for (Index i = 0; i < lambda.size(); ++i) {
    if (lambda(i) < -kEigenClamp) {
      throw NumericalError(std::string("kron_eigen_factorize: ") + what +
                           " has eigenvalue " + std::to_string(lambda(i)));
    }
    if (lambda(i) < 0) lambda(i) = 0;
  }
  return lambda;
}

} // namespace

std::vector<Observation> row_major_observations(Index num_points,
                                                Index num_tasks) {
  std::vector<Observation> obs;
  obs.reserve(static_cast<std::size_t>(num_points * num_tasks));
  for (Index n = 0; n < num_points; ++n) {
    for (Index m = 0; m < num_tasks; ++m) obs.push_back({n, m});
  }
  return obs;
}

Eigen::MatrixXd assemble_covariance(const Eigen::MatrixXd &kx,
                                    const Eigen::MatrixXd &kf,
                                    const Eigen::VectorXd &noise,
                                    const std::vector<Observation> &obs) {
  const auto s = static_cast<Index>(obs.size());
  Eigen::MatrixXd c(s, s);
  for (Index b = 0; b < s; ++b) {
    for (Index a = 0; a < s; ++a) {
      c(a, b) = kx(obs[a].point, obs[b].point) * kf(obs[a].task, obs[b].task);
    }
  }
  if (noise.size() > 0) {
    for (Index a = 0; a < s; ++a) c(a, a) += noise(obs[a].task);
  }
  return c;
}

Eigen::MatrixXd dense_covariance(const MtgpParams &p, const Dataset &ds) {
  require_full(ds, "dense_covariance");
  p.check_compatible(ds);
  const Eigen::MatrixXd kx = kernel_matrix(p.kernel, ds.inputs(), p.jitter);
  const Eigen::MatrixXd kf = task_cov_matrix(p.task);
  const Eigen::MatrixXd sigma = p.noise.variances().asDiagonal();
  return kron(kx, kf) +
         kron(Eigen::MatrixXd::Identity(ds.num_points(), ds.num_points()),
              sigma);
}

Eigen::MatrixXd masked_covariance(const MtgpParams &p, const Dataset &ds) {
  p.check_compatible(ds);
  return assemble_covariance(kernel_matrix(p.kernel, ds.inputs(), p.jitter),
                             task_cov_matrix(p.task), p.noise.variances(),
                             ds.observations());
}

double mll_dense(const MtgpParams &p, const Dataset &ds) {
  const auto llt = factorize(dense_covariance(p, ds), "mll_dense");
  return gaussian_logpdf(llt, ds.flattened_outputs());
}

KronEigenFactors kron_eigen_factorize(const MtgpParams &p, const Dataset &ds) {
  p.check_compatible(ds);
  const Eigen::MatrixXd kx = kernel_matrix(p.kernel, ds.inputs(), p.jitter);
  const Eigen::VectorXd noise_sqrt = p.noise.variances().array().sqrt();
  const Eigen::VectorXd inv_sqrt = noise_sqrt.cwiseInverse();
  const Eigen::MatrixXd scaled_kf = symmetrize(
      inv_sqrt.asDiagonal() * task_cov_matrix(p.task) * inv_sqrt.asDiagonal());

  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig_x(kx);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig_f(scaled_kf);
  if (eig_x.info() != Eigen::Success || eig_f.info() != Eigen::Success) {
    throw NumericalError("kron_eigen_factorize: eigendecomposition failed");
  }
  return KronEigenFactors{
      eig_x.eigenvectors(),
      clamp_eigenvalues(eig_x.eigenvalues(), "K_x"),
      eig_f.eigenvectors(),
      clamp_eigenvalues(eig_f.eigenvalues(), "scaled K_f"),
      noise_sqrt,
  };
}

double mll_kron_fast(const MtgpParams &p, const Dataset &ds,
                     const KronEigenFactors &cache) {
  require_full(ds, "mll_kron_fast");
  p.check_compatible(ds);
  const Index n = ds.num_points();
  const Index m = ds.num_tasks();
  if (cache.u_x.rows() != n || cache.v_f.rows() != m) {
    throw DimensionError("mll_kron_fast: cache does not match dataset");
  }
  // Rotated outputs: row-major flattening of U_x^T Y Sigma^{-1/2} V_f.
  const Eigen::MatrixXd rotated = cache.u_x.transpose() * ds.outputs() *
                                  cache.noise_sqrt.cwiseInverse().asDiagonal() *
                                  cache.v_f;
  const Eigen::ArrayXXd spectrum =
      (cache.lambda_x * cache.lambda_f.transpose()).array() + 1.0;
  const double log_sigma2_sum =
      2.0 * cache.noise_sqrt.array().log().sum() * static_cast<double>(n);
  const double logdet = log_sigma2_sum + spectrum.log().sum();
  const double quad = (rotated.array().square() / spectrum).sum();
  return -0.5 * logdet - 0.5 * quad -
         0.5 * static_cast<double>(n * m) * kLog2Pi;
}

double mll_masked(const MtgpParams &p, const Dataset &ds,
                  const MaskedOptions &opts) {
  p.check_compatible(ds);
  if (opts.solve == MaskedSolve::kExact) {
    if (opts.logdet == LogdetMethod::kLanczos) {
      throw UsageError("mll_masked: Lanczos log-determinant needs the "
                       "iterative solve mode");
    }
    const auto llt = factorize(masked_covariance(p, ds), "mll_masked");
    return gaussian_logpdf(llt, ds.observed_outputs());
  }

  // Iterative mode works in row-major order through the selection map.
  const Eigen::MatrixXd kx = kernel_matrix(p.kernel, ds.inputs(), p.jitter);
  const Eigen::MatrixXd kf = task_cov_matrix(p.task);
  const SelectionMap sel = ds.selection();
  const Eigen::VectorXd sigma2 = p.noise.variances();
  const Index m = ds.num_tasks();
  Eigen::VectorXd noise_diag(sel.size());
  for (Index a = 0; a < sel.size(); ++a) noise_diag(a) = sigma2(sel.kept()[a] % m);

  const LinearOperator<double> apply = [&](const Eigen::VectorXd &v) {
    Eigen::VectorXd out = masked_kron_matvec(kx, kf, sel, v);
    out.array() += noise_diag.array() * v.array();
    return out;
  };
  const Eigen::VectorXd y = sel.gather(vec_t(ds.outputs()));
  const Eigen::VectorXd alpha = cg_solve(apply, y, opts.cg);

  double logdet = 0.0;
  if (opts.logdet == LogdetMethod::kDense) {
    logdet = logdet_dense(masked_covariance(p, ds));
  } else {
    logdet = logdet_lanczos(apply, sel.size(), opts.lanczos_probes,
                            opts.lanczos_steps, opts.seed);
  }
  return -0.5 * logdet - 0.5 * y.dot(alpha) -
         0.5 * static_cast<double>(sel.size()) * kLog2Pi;
}

double mll(const MtgpParams &p, const Dataset &ds) {
  if (ds.is_full()) return mll_kron_fast(p, ds, kron_eigen_factorize(p, ds));
  return mll_masked(p, ds);
}

GradReport mll_grad(const MtgpParams &p, const Dataset &ds, GradRoute route) {
  p.check_compatible(ds);
  if (route == GradRoute::kAuto) {
    route = ds.is_full() ? GradRoute::kKronecker : GradRoute::kMasked;
  }
  if (route == GradRoute::kKronecker) require_full(ds, "mll_grad (Kronecker)");

  const std::vector<Observation> obs =
      route == GradRoute::kKronecker
          ? row_major_observations(ds.num_points(), ds.num_tasks())
          : ds.observations();
  const Eigen::VectorXd y = route == GradRoute::kKronecker
                                ? ds.flattened_outputs()
                                : ds.observed_outputs();

  const Eigen::MatrixXd kx = kernel_matrix(p.kernel, ds.inputs(), p.jitter);
  const Eigen::MatrixXd kf = task_cov_matrix(p.task);
  const Eigen::VectorXd sigma2 = p.noise.variances();
  const auto llt =
      factorize(assemble_covariance(kx, kf, sigma2, obs), "mll_grad");

  GradReport report;
  report.value = gaussian_logpdf(llt, y);

  const auto s = static_cast<Index>(obs.size());
  const Eigen::VectorXd alpha = llt.solve(y);
  const Eigen::MatrixXd q = llt.solve(Eigen::MatrixXd::Identity(s, s));
  // dL/dz = 0.5 sum((alpha alpha^T - Q) .* G) for symmetric G.
  const Eigen::MatrixXd w = alpha * alpha.transpose() - q;
  const auto half_contract = [&](const Eigen::MatrixXd &g) {
    return 0.5 * (w.array() * g.array()).sum();
  };

  report.gradient.resize(p.num_params());
  Index k = 0;
  const Eigen::VectorXd no_noise;
  for (Index d = 0; d <= p.input_dim(); ++d) {
    const Eigen::MatrixXd dkx = kernel_matrix_derivative(
        p.kernel, ds.inputs(), KernelParamId::from_flat(d));
    report.gradient(k++) =
        half_contract(assemble_covariance(dkx, kf, no_noise, obs));
  }
  for (Index i = 0; i < p.num_tasks(); ++i) {
    for (Index j = 0; j <= i; ++j) {
      const Eigen::MatrixXd dkf = task_cov_derivative(p.task, i, j);
      report.gradient(k++) =
          half_contract(assemble_covariance(kx, dkf, no_noise, obs));
    }
  }
  // Noise derivatives are diagonal: sigma_m^2 on entries of task m.
  for (Index m = 0; m < p.num_tasks(); ++m) {
    double acc = 0.0;
    for (Index a = 0; a < s; ++a) {
      if (obs[a].task == m) acc += w(a, a);
    }
    report.gradient(k++) = 0.5 * sigma2(m) * acc;
  }
  return report;
}

double complete_data_log_likelihood(const MtgpParams &p, const Dataset &ds,
                                    const Eigen::MatrixXd &f) {
  require_full(ds, "complete_data_log_likelihood");
  p.check_compatible(ds);
  const Index n = ds.num_points();
  const Index m = ds.num_tasks();
  if (f.rows() != n || f.cols() != m) {
    throw DimensionError("complete_data_log_likelihood: latent table must be " +
                         std::to_string(n) + "x" + std::to_string(m));
  }
  if (!f.allFinite()) {
    throw UsageError("complete_data_log_likelihood: latents must be finite");
  }
  const Eigen::VectorXd sigma2 = p.noise.variances();
  const auto kx_llt = factorize(kernel_matrix(p.kernel, ds.inputs(), p.jitter),
                                "complete_data_log_likelihood");
  const double logdet_kx =
      2.0 * kx_llt.matrixLLT().diagonal().array().log().sum();
  const double logdet_kf = 2.0 * p.task.raw().diagonal().sum();

  const Eigen::ArrayXXd resid2 = (ds.outputs() - f).array().square();
  const double resid_term =
      (resid2.rowwise() / (2.0 * sigma2.array().transpose())).sum();

  // tr(F^T K_x^{-1} F K_f^{-1}) = ||L_x^{-1} F L_f^{-T}||_F^2.
  const Eigen::MatrixXd left = kx_llt.matrixL().solve(f);
  const Eigen::MatrixXd lf = p.task.factor();
  const Eigen::MatrixXd whitened =
      lf.triangularView<Eigen::Lower>().solve(left.transpose());
  const double trace_term = whitened.squaredNorm();

  const double dn = static_cast<double>(n);
  const double dm = static_cast<double>(m);
  return -dn * dm * kLog2Pi - 0.5 * dn * sigma2.array().log().sum() -
         0.5 * dm * logdet_kx - 0.5 * dn * logdet_kf - resid_term -
         0.5 * trace_term;
}

} // namespace mtgp
