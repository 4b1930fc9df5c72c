// mtgp: fit, predict and gradient-check multi-task Gaussian process models.
//
// Exit codes: 0 success, 1 usage or parse error, 2 numerical failure.
// MTGP_LOG_LEVEL=quiet|info|debug controls diagnostics on stderr.

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "mtgp/diagnostics.hpp"
#include "mtgp/error.hpp"
#include "mtgp/estimators.hpp"
#include "mtgp/io.hpp"
#include "mtgp/likelihood.hpp"
#include "mtgp/params.hpp"
#include "mtgp/posterior.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitNumerical = 2;

enum class LogLevel { kQuiet = 0, kInfo = 1, kDebug = 2 };

LogLevel log_level() {
  const char *env = std::getenv("MTGP_LOG_LEVEL");
  if (env == nullptr) return LogLevel::kInfo;
  const std::string v(env);
  if (v == "quiet" || v == "0") return LogLevel::kQuiet;
  if (v == "debug" || v == "2") return LogLevel::kDebug;
  return LogLevel::kInfo;
}

void log(LogLevel level, const std::string &msg) {
  if (static_cast<int>(level) <= static_cast<int>(log_level())) {
    std::cerr << "mtgp: " << msg << "\n";
  }
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct FitArgs {
  std::string method;
  std::string config;
  std::string data;
  std::string out;
  std::optional<std::uint64_t> seed;
};

struct PredictArgs {
  std::string model;
  std::string queries;
  std::string out;
  bool observation_noise = false;
};

struct GradcheckArgs {
  std::string data;
  std::string config;
  double threshold = 1e-4;
};

int run_fit(const FitArgs &args) {
  using namespace mtgp;
  io::RunConfig cfg = args.config.empty() ? io::RunConfig{}
                                          : io::load_run_config(args.config);
  if (!args.method.empty()) {
    cfg.method = args.method == "em" ? io::FitMethod::kEm : io::FitMethod::kGradient;
  }
  if (args.seed) cfg.seed = *args.seed;
  cfg.gradient.seed = cfg.seed;
  cfg.em.seed = cfg.seed;
  cfg.em.theta_opt.seed = cfg.seed;

  const Dataset ds = io::load_dataset(args.data);
  log(LogLevel::kInfo, "loaded " + std::to_string(ds.num_points()) + " points, " +
                           std::to_string(ds.input_dim()) + " inputs, " +
                           std::to_string(ds.num_tasks()) + " tasks, " +
                           std::to_string(ds.num_observed()) + " observed entries");

  MtgpParams init = MtgpParams::defaults(ds);
  init.jitter = cfg.jitter;

  FitResult result{init, 0.0, {}, false, 0};
  std::string method_name;
  if (cfg.method == io::FitMethod::kEm) {
    if (!ds.is_full()) throw UsageError("EM requires full observations");
    method_name = "em";
    result = em_fit(ds, init, cfg.em);
  } else {
    method_name = "gradient";
    result = gradient_fit(ds, init, cfg.gradient);
  }

  double objective = result.final_objective;
  if (!ds.is_full()) {
    objective = mll_masked(result.params, ds, io::masked_options(cfg, ds));
  }

  for (std::size_t i = 0; i < result.trace.size(); ++i) {
    log(LogLevel::kDebug, "iteration " + std::to_string(i + 1) + ": mll " + fmt(result.trace[i]));
  }
  std::cout << "method " << method_name << "\n"
            << "iterations " << result.iterations_used << "\n"
            << "converged " << (result.converged ? "true" : "false") << "\n"
            << "final_objective " << fmt(objective) << "\n";
  if (!result.trace.empty()) {
    std::cout << "trace first " << fmt(result.trace.front()) << " last "
              << fmt(result.trace.back()) << "\n";
  }

  io::ModelFile model{io::kModelSchemaVersion,
                      result.params,
                      ds,
                      io::dataset_fingerprint(ds),
                      {method_name, cfg.seed, objective, result.iterations_used,
                       result.converged}};
  io::save_model(model, args.out);
  log(LogLevel::kInfo, "wrote model to " + args.out);
  return kExitOk;
}

int run_predict(const PredictArgs &args) {
  using namespace mtgp;
  const io::ModelFile model = io::load_model(args.model);
  const io::QuerySet queries = io::load_queries(
      args.queries, model.training.input_dim(), model.training.num_tasks());

  std::ostringstream out;
  out << "row,task,mean,variance\n";
  if (!queries.tasks.empty()) {
    PredictionRequest req{queries.inputs, queries.tasks, false, args.observation_noise};
    const Prediction pred = predict(model.params, model.training, req);
    for (std::size_t q = 0; q < queries.tasks.size(); ++q) {
      const auto i = static_cast<Index>(q);
      out << q << "," << queries.tasks[q] << "," << fmt(pred.means(i)) << ","
          << fmt(pred.variances(i)) << "\n";
    }
  }
  io::write_file(args.out, out.str());
  log(LogLevel::kInfo, "wrote " + std::to_string(queries.tasks.size()) +
                           " predictions to " + args.out);
  return kExitOk;
}

int run_gradcheck(const GradcheckArgs &args) {
  using namespace mtgp;
  const io::RunConfig cfg = args.config.empty() ? io::RunConfig{}
                                                : io::load_run_config(args.config);
  const Dataset ds = io::load_dataset(args.data);
  MtgpParams p = MtgpParams::defaults(ds);
  p.jitter = cfg.jitter;

  const GradcheckReport report = gradcheck(p, ds, args.threshold);
  std::cout << "mll " << fmt(report.value) << "\n";
  std::cout << "parameter,analytic,numeric,error\n";
  for (const auto &e : report.entries) {
    std::cout << e.name << "," << fmt(e.analytic) << "," << fmt(e.numeric) << ","
              << fmt(e.error) << "\n";
  }
  std::cout << (report.passed ? "PASS" : "FAIL") << " max_error " << fmt(report.max_error)
            << " threshold " << fmt(args.threshold) << "\n";
  return report.passed ? kExitOk : kExitNumerical;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Multi-task Gaussian process regression"};
  app.require_subcommand(1);

  FitArgs fit_args;
  auto *fit = app.add_subcommand("fit", "Fit hyperparameters and write a model file");
  fit->add_option("--method", fit_args.method, "Estimator")
      ->check(CLI::IsMember({"em", "gradient"}));
  fit->add_option("--config", fit_args.config, "JSON run configuration")
      ->check(CLI::ExistingFile);
  fit->add_option("--data", fit_args.data, "Training CSV")->required();
  fit->add_option("--out", fit_args.out, "Model file to write")->required();
  fit->add_option("--seed", fit_args.seed, "Random seed (overrides the config)");

  PredictArgs predict_args;
  auto *pred = app.add_subcommand("predict", "Predict at query points");
  pred->add_option("--model", predict_args.model, "Model file")->required();
  pred->add_option("--queries", predict_args.queries, "Query CSV (x1..xD,task)")->required();
  pred->add_option("--out", predict_args.out, "Output CSV")->required();
  pred->add_flag("--observation-noise", predict_args.observation_noise,
                 "Add task noise to the predictive variance");

  GradcheckArgs gc_args;
  auto *gc = app.add_subcommand("gradcheck", "Compare analytic and numeric gradients");
  gc->add_option("--data", gc_args.data, "Training CSV")->required();
  gc->add_option("--config", gc_args.config, "JSON run configuration")
      ->check(CLI::ExistingFile);
  gc->add_option("--threshold", gc_args.threshold, "Largest accepted error")
      ->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success &e) {
    return app.exit(e);
  } catch (const CLI::ParseError &e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*fit) return run_fit(fit_args);
    if (*pred) return run_predict(predict_args);
    return run_gradcheck(gc_args);
  } catch (const mtgp::NumericalError &e) {
    std::cerr << "mtgp: numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const mtgp::Error &e) {
    std::cerr << "mtgp: error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception &e) {
    std::cerr << "mtgp: error: " << e.what() << "\n";
    return kExitUsage;
  }
}
