#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <sstream>
#include <string>

#include "mtgp/diagnostics.hpp"
#include "mtgp/error.hpp"
#include "mtgp/io.hpp"
#include "test_support.hpp"

using namespace mtgp;
using namespace mtgp::testing;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

Dataset parse(const std::string &text) {
  std::istringstream in(text);
  return io::parse_dataset(in);
}

/// Kind and line of the ParseError raised by parsing `text`.
std::pair<ParseErrorKind, std::size_t> parse_failure(const std::string &text) {
  try {
    parse(text);
  } catch (const ParseError &e) {
    return {e.kind(), e.line()};
  }
  FAIL("expected a parse error");
  return {};
}

io::QuerySet queries(const std::string &text, Index d, Index m) {
  std::istringstream in(text);
  return io::parse_queries(in, d, m);
}

bool same_bits(const MatrixXd &a, const MatrixXd &b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  for (Index i = 0; i < a.size(); ++i) {
    const double x = a.data()[i];
    const double y = b.data()[i];
    if (std::isnan(x) != std::isnan(y)) return false;
    if (!std::isnan(x) && std::memcmp(&x, &y, sizeof(double)) != 0) return false;
  }
  return true;
}

} // namespace

TEST_CASE("dataset CSV: well-formed input") {
  SUBCASE("two points, one input, two tasks, one missing value") {
    const Dataset ds = parse("x1,y1,y2\n0.5,1.0,NaN\n1.5,-2.0,3.25\n");
    CHECK(ds.num_points() == 2);
    CHECK(ds.input_dim() == 1);
    CHECK(ds.num_tasks() == 2);
    CHECK(ds.num_observed() == 3);
    CHECK(ds.inputs()(1, 0) == 1.5);
    CHECK(ds.outputs()(1, 1) == 3.25);
    CHECK(std::isnan(ds.outputs()(0, 1)));
    CHECK_FALSE(ds.is_full());
  }
  SUBCASE("empty cells, case-insensitive nan, blank lines, CRLF") {
    const Dataset ds = parse("x1,x2,y1,y2\r\n\r\n1,2,,3\r\n4,5,6,nan\r\n7,8,9,10\r\n");
    CHECK(ds.num_points() == 3);
    CHECK(ds.input_dim() == 2);
    CHECK(ds.num_observed() == 4);
    CHECK(std::isnan(ds.outputs()(0, 0)));
    CHECK(std::isnan(ds.outputs()(1, 1)));
  }
  SUBCASE("full precision survives") {
    const Dataset ds = parse("x1,y1\n0.1,1e-300\n");
    CHECK(ds.inputs()(0, 0) == 0.1);
    CHECK(ds.outputs()(0, 0) == 1e-300);
  }
}

TEST_CASE("dataset CSV: every failure has its own kind and line") {
  using K = ParseErrorKind;
  CHECK(parse_failure("") == std::pair{K::kMissingHeader, std::size_t{0}});
  CHECK(parse_failure("\n\n") == std::pair{K::kMissingHeader, std::size_t{0}});
  CHECK(parse_failure("x1,z1\n1,2\n").first == K::kBadHeader);
  CHECK(parse_failure("y1,x1\n1,2\n").first == K::kBadHeader);
  CHECK(parse_failure("x1,yy\n1,2\n").first == K::kBadHeader);
  CHECK(parse_failure("y1,y2\n1,2\n") == std::pair{K::kNoInputs, std::size_t{1}});
  CHECK(parse_failure("x1,x2\n1,2\n") == std::pair{K::kNoOutputs, std::size_t{1}});
  CHECK(parse_failure("x1,y1\n1,2\n3\n") == std::pair{K::kRaggedRow, std::size_t{3}});
  CHECK(parse_failure("x1,y1\n1,2\n3,4,5\n") == std::pair{K::kRaggedRow, std::size_t{3}});
  CHECK(parse_failure("x1,y1\n\n1,abc\n") == std::pair{K::kNonNumeric, std::size_t{3}});
  CHECK(parse_failure("x1,y1\n1.5.2,3\n") == std::pair{K::kNonNumeric, std::size_t{2}});
  CHECK(parse_failure("x1,y1\n,3\n").first == K::kNonNumeric);
  CHECK(parse_failure("x1,y1,y2\n1,2,\n3,4,nan\n").first == K::kEmptyTask);
  try {
    parse("x1,y1,y2\n1,2,\n");
  } catch (const ParseError &e) {
    CHECK(std::string(e.what()).find("task 2") != std::string::npos);
  }
}

TEST_CASE("query CSV") {
  SUBCASE("parses inputs and 0-based tasks") {
    const io::QuerySet q = queries("x1,x2,task\n0.5,1,0\n2,3,1\n", 2, 2);
    CHECK(q.inputs.rows() == 2);
    CHECK(q.inputs(1, 1) == 3.0);
    CHECK(q.tasks == std::vector<Index>{0, 1});
  }
  SUBCASE("header only gives zero queries") {
    CHECK(queries("x1,task\n", 1, 2).inputs.rows() == 0);
  }
  SUBCASE("rejects out-of-range and fractional tasks and wrong headers") {
    CHECK_THROWS_AS(queries("x1,task\n0,2\n", 1, 2), ParseError);
    CHECK_THROWS_AS(queries("x1,task\n0,-1\n", 1, 2), ParseError);
    CHECK_THROWS_AS(queries("x1,task\n0,0.5\n", 1, 2), ParseError);
    CHECK_THROWS_AS(queries("x1,x2,task\n0,1,0\n", 1, 2), ParseError);
    CHECK_THROWS_AS(queries("x1,y1\n0,0\n", 1, 2), ParseError);
  }
}

TEST_CASE("run configuration") {
  SUBCASE("defaults") {
    const io::RunConfig cfg = io::parse_run_config("{}");
    CHECK(cfg.method == io::FitMethod::kGradient);
    CHECK(cfg.jitter == kDefaultJitter);
    CHECK(cfg.masked_mode == io::MaskedMode::kAuto);
  }
  SUBCASE("every key") {
    const io::RunConfig cfg = io::parse_run_config(R"({
      "method": "em", "kernel": "rbf-ard", "jitter": 1e-6, "seed": 42,
      "masked_mode": "iterative",
      "gradient": {"max_iterations": 50, "gradient_tolerance": 1e-4, "step_memory": 5,
                   "num_restarts": 3, "restart_scale": 0.25},
      "em": {"num_latent_samples": 20, "max_em_iterations": 7, "e_step_mode": "exact-moments",
             "theta_opt": {"max_iterations": 30}}
    })");
    CHECK(cfg.method == io::FitMethod::kEm);
    CHECK(cfg.jitter == 1e-6);
    CHECK(cfg.seed == 42);
    CHECK(cfg.gradient.max_iterations == 50);
    CHECK(cfg.gradient.step_memory == 5);
    CHECK(cfg.gradient.num_restarts == 3);
    CHECK(cfg.gradient.restart_scale == 0.25);
    CHECK(cfg.em.num_latent_samples == 20);
    CHECK(cfg.em.max_em_iterations == 7);
    CHECK(cfg.em.e_step_mode == EStepMode::kExactMoments);
    CHECK(cfg.em.theta_opt.max_iterations == 30);
  }
  SUBCASE("strict keys and values") {
    CHECK_THROWS_AS(io::parse_run_config(R"({"methd": "em"})"), ParseError);
    CHECK_THROWS_AS(io::parse_run_config(R"({"gradient": {"lr": 1}})"), ParseError);
    CHECK_THROWS_AS(io::parse_run_config(R"({"method": "newton"})"), UsageError);
    CHECK_THROWS_AS(io::parse_run_config(R"({"kernel": "matern"})"), UsageError);
    CHECK_THROWS_AS(io::parse_run_config(R"({"jitter": -1})"), UsageError);
    CHECK_THROWS_AS(io::parse_run_config(R"({"jitter": "small"})"), ParseError);
    CHECK_THROWS_AS(io::parse_run_config("[1, 2]"), ParseError);
    CHECK_THROWS_AS(io::parse_run_config("{"), ParseError);
  }
  SUBCASE("masked mode selects the log-determinant and solver") {
    Rng rng(1);
    const Dataset small = random_masked_dataset(rng, 10, 2, 0.3);
    io::RunConfig cfg;
    CHECK(io::masked_options(cfg, small).logdet == LogdetMethod::kDense);
    cfg.masked_mode = io::MaskedMode::kIterative;
    CHECK(io::masked_options(cfg, small).logdet == LogdetMethod::kLanczos);
    cfg.masked_mode = io::MaskedMode::kAuto;
    const Dataset large = random_full_dataset(rng, 300, 2);
    CHECK(io::masked_options(cfg, large).logdet == LogdetMethod::kLanczos);
  }
}

TEST_CASE("model file") {
  Rng rng(2);
  const Dataset ds = random_masked_dataset(rng, 6, 2, 0.3, 2);
  const MtgpParams p = random_params(rng, 2, 2);
  const io::ModelFile model{io::kModelSchemaVersion, p, ds, io::dataset_fingerprint(ds),
                            io::FitMetadata{"gradient", 7, -3.25, 12, true}};

  SUBCASE("round trip is bit-exact") {
    const io::ModelFile back = io::parse_model(io::serialize_model(model));
    CHECK(back.params.flatten() == p.flatten());
    CHECK(back.params.jitter == p.jitter);
    CHECK(same_bits(back.training.inputs(), ds.inputs()));
    CHECK(same_bits(back.training.outputs(), ds.outputs()));
    CHECK(back.fingerprint == model.fingerprint);
    CHECK(back.fit.method == "gradient");
    CHECK(back.fit.seed == 7);
    CHECK(back.fit.objective == -3.25);
    CHECK(back.fit.iterations == 12);
    CHECK(back.fit.converged);
    CHECK(io::serialize_model(back) == io::serialize_model(model));
  }
  SUBCASE("file round trip") {
    const auto path = std::filesystem::temp_directory_path() / "mtgp_test_model.json";
    io::save_model(model, path.string());
    CHECK(io::load_model(path.string()).params.flatten() == p.flatten());
    std::filesystem::remove(path);
    CHECK_THROWS_AS(io::load_model(path.string()), UsageError);
  }
  SUBCASE("schema version and fingerprint are enforced") {
    std::string text = io::serialize_model(model);
    const auto at = text.find("\"schema_version\": 1");
    REQUIRE(at != std::string::npos);
    std::string wrong_version = text;
    wrong_version.replace(at, 19, "\"schema_version\": 2");
    CHECK_THROWS_AS(io::parse_model(wrong_version), ParseError);

    io::ModelFile tampered = model;
    MatrixXd y = ds.outputs();
    y(0, 0) = 123.0;
    tampered.training = Dataset(ds.inputs(), y);
    CHECK_THROWS_AS(io::parse_model(io::serialize_model(tampered)), ParseError);
    CHECK_THROWS_AS(io::parse_model("{}"), ParseError);
    CHECK_THROWS_AS(io::parse_model("not json"), ParseError);
  }
  SUBCASE("fingerprint distinguishes shape, values and mask") {
    const std::string base = io::dataset_fingerprint(ds);
    CHECK(base.size() == 16);
    CHECK(io::dataset_fingerprint(Dataset(ds.inputs(), ds.outputs())) == base);
    MatrixXd x = ds.inputs();
    x(0, 0) = std::nextafter(x(0, 0), 10.0);
    CHECK(io::dataset_fingerprint(Dataset(x, ds.outputs())) != base);
    MatrixXd y = ds.outputs();
    for (Index i = 0; i < y.size(); ++i) {
      if (std::isfinite(y.data()[i])) {
        y.data()[i] = std::numeric_limits<double>::quiet_NaN();
        break;
      }
    }
    CHECK(io::dataset_fingerprint(Dataset(ds.inputs(), y)) != base);
  }
}

TEST_CASE("gradcheck") {
  Rng rng(3);
  SUBCASE("the analytic gradient passes on full and masked data") {
    for (int t = 0; t < 5; ++t) {
      const Dataset ds = t % 2 == 0 ? random_full_dataset(rng, 6, 2, 2)
                                    : random_masked_dataset(rng, 6, 2, 0.3, 2);
      const MtgpParams p = random_params(rng, 2, 2);
      const GradcheckReport r = gradcheck(p, ds);
      CHECK(r.passed);
      CHECK(r.max_error <= 1e-4);
      CHECK(static_cast<Index>(r.entries.size()) == p.flatten().size());
      CHECK(r.value == doctest::Approx(mll(p, ds)).epsilon(1e-12));
    }
  }
  SUBCASE("a corrupted gradient is caught at the right parameter") {
    const Dataset ds = random_full_dataset(rng, 6, 2, 2);
    const MtgpParams p = random_params(rng, 2, 2);
    const Index target = 3;
    const GradientFn corrupted = [&](const MtgpParams &q, const Dataset &d) {
      GradReport g = mll_grad(q, d);
      g.gradient(target) += 0.01 * std::max(1.0, std::abs(g.gradient(target)));
      return g;
    };
    const GradcheckReport r = gradcheck(p, ds, 1e-4, corrupted);
    CHECK_FALSE(r.passed);
    Index worst = 0;
    for (std::size_t i = 0; i < r.entries.size(); ++i) {
      if (r.entries[i].error > r.entries[static_cast<std::size_t>(worst)].error) {
        worst = static_cast<Index>(i);
      }
    }
    CHECK(worst == target);
    CHECK(r.max_error >= 5e-3);
  }
  SUBCASE("a NaN gradient fails") {
    const Dataset ds = random_full_dataset(rng, 4, 2);
    const MtgpParams p = random_params(rng, 1, 2);
    const GradientFn broken = [](const MtgpParams &q, const Dataset &d) {
      GradReport g = mll_grad(q, d);
      g.gradient(0) = std::numeric_limits<double>::quiet_NaN();
      return g;
    };
    CHECK_FALSE(gradcheck(p, ds, 1e-4, broken).passed);
  }
}
