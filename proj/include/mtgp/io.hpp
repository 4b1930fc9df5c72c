#ifndef MTGP_IO_HPP_
#define MTGP_IO_HPP_

// File formats for the command-line tool.
//
// Dataset CSV: a header row naming input columns x1..xD followed by output
// columns y1..yM. An empty output cell or a NaN token marks a missing value.
//
// Query CSV: header x1..xD,task. Task indices are 0-based.
//
// Model file: JSON document, see ModelFile.

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "mtgp/dataset.hpp"
#include "mtgp/estimators.hpp"
#include "mtgp/likelihood.hpp"
#include "mtgp/params.hpp"

namespace mtgp::io {

inline constexpr int kModelSchemaVersion = 1;

Dataset parse_dataset(std::istream &in);
Dataset load_dataset(const std::string &path);

struct QuerySet {
  Eigen::MatrixXd inputs;
  std::vector<Index> tasks;
};

/// Parses a query file. An empty file body (header only) gives zero queries.
QuerySet parse_queries(std::istream &in, Index input_dim, Index num_tasks);
QuerySet load_queries(const std::string &path, Index input_dim,
                      Index num_tasks);

enum class FitMethod { kEm, kGradient };
enum class MaskedMode { kAuto, kDense, kIterative };

/// Everything the fit command can be configured with.
struct RunConfig {
  FitMethod method = FitMethod::kGradient;
  std::string kernel = "rbf-ard";
  double jitter = kDefaultJitter;
  std::uint64_t seed = 0;
  MaskedMode masked_mode = MaskedMode::kAuto;
  InnerOptConfig gradient{};
  EmConfig em{};
};

/// Largest observation count for which masked_mode "auto" stays dense.
inline constexpr Index kAutoDenseLimit = 500;

RunConfig parse_run_config(const std::string &json_text);
RunConfig load_run_config(const std::string &path);

/// Options for mll_masked implied by the config's masked mode.
MaskedOptions masked_options(const RunConfig &cfg, const Dataset &ds);

struct FitMetadata {
  std::string method;
  std::uint64_t seed = 0;
  double objective = 0.0;
  Index iterations = 0;
  bool converged = false;
};

/// Persisted model: hyperparameters, the training data they were fitted on,
/// a content hash of that data and fit metadata.
struct ModelFile {
  int schema_version = kModelSchemaVersion;
  MtgpParams params;
  Dataset training;
  std::string fingerprint;
  FitMetadata fit;
};

/// 64-bit FNV-1a over the shape and bit patterns of the data, as hex.
std::string dataset_fingerprint(const Dataset &ds);

std::string serialize_model(const ModelFile &model);
ModelFile parse_model(const std::string &text);

void save_model(const ModelFile &model, const std::string &path);
ModelFile load_model(const std::string &path);

std::string read_file(const std::string &path);
void write_file(const std::string &path, const std::string &contents);

} // namespace mtgp::io

#endif // MTGP_IO_HPP_
