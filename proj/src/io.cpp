#include "mtgp/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "mtgp/error.hpp"

namespace mtgp::io {

using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_row(const std::string &line) {
  std::vector<std::string> cells;
  std::string_view rest(line);
  while (true) {
    const auto comma = rest.find(',');
    cells.push_back(trim(rest.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    rest.remove_prefix(comma + 1);
  }
  return cells;
}

bool is_missing_token(const std::string &cell) {
  if (cell.empty()) return true;
  std::string lower(cell);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return lower == "nan";
}

double parse_number(const std::string &cell, std::size_t line,
                    const std::string &column) {
  double value = 0.0;
  const char *begin = cell.data();
  const char *end = begin + cell.size();
  if (!cell.empty() && *begin == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (cell.empty() || ec != std::errc() || ptr != end || !std::isfinite(value)) {
    throw ParseError(ParseErrorKind::kNonNumeric, line,
                     "column " + column + ": '" + cell + "' is not a number");
  }
  return value;
}

/// Lines of a CSV stream with 1-based numbers; blank lines are skipped.
struct CsvLines {
  explicit CsvLines(std::istream &in) {
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
      ++number;
      if (trim(line).empty()) continue;
      rows.push_back({number, split_row(line)});
    }
  }
  struct Row {
    std::size_t line;
    std::vector<std::string> cells;
  };
  std::vector<Row> rows;
};

bool has_prefix_index(const std::string &name, char prefix) {
  if (name.size() < 2 || std::tolower(static_cast<unsigned char>(name[0])) != prefix) {
    return false;
  }
  return std::all_of(name.begin() + 1, name.end(),
                     [](unsigned char c) { return std::isdigit(c); });
}

void check_row_width(const CsvLines::Row &row, std::size_t width) {
  if (row.cells.size() != width) {
    throw ParseError(ParseErrorKind::kRaggedRow, row.line,
                     "expected " + std::to_string(width) + " cells, found " +
                         std::to_string(row.cells.size()));
  }
}

std::uint64_t fnv1a(std::uint64_t h, std::uint64_t word) {
  for (int i = 0; i < 8; ++i) {
    h ^= (word >> (8 * i)) & 0xffu;
    h *= 0x100000001b3ULL;
  }
  return h;
}

template <typename T> T get_checked(const json &j, const char *key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception &e) {
    throw ParseError(ParseErrorKind::kSchema, 0,
                     std::string("model/config field '") + key + "': " + e.what());
  }
}

void reject_unknown_keys(const json &j, std::initializer_list<const char *> known,
                         const std::string &where) {
  for (const auto &item : j.items()) {
    if (std::none_of(known.begin(), known.end(),
                     [&](const char *k) { return item.key() == k; })) {
      throw ParseError(ParseErrorKind::kSchema, 0,
                       "unknown key '" + item.key() + "' in " + where);
    }
  }
}

void read_inner(const json &j, InnerOptConfig &cfg, const std::string &where) {
  reject_unknown_keys(j,
                      {"max_iterations", "gradient_tolerance", "step_memory",
                       "num_restarts", "restart_scale"},
                      where);
  if (j.contains("max_iterations")) cfg.max_iterations = get_checked<Index>(j, "max_iterations");
  if (j.contains("gradient_tolerance")) cfg.gradient_tolerance = get_checked<double>(j, "gradient_tolerance");
  if (j.contains("step_memory")) cfg.step_memory = get_checked<Index>(j, "step_memory");
  if (j.contains("num_restarts")) cfg.num_restarts = get_checked<Index>(j, "num_restarts");
  if (j.contains("restart_scale")) cfg.restart_scale = get_checked<double>(j, "restart_scale");
  if (cfg.max_iterations < 0 || cfg.step_memory < 1 || cfg.num_restarts < 1 ||
      !(cfg.gradient_tolerance > 0) || !(cfg.restart_scale >= 0)) {
    throw UsageError(where + ": counts must be positive and tolerances > 0");
  }
}

json matrix_to_json(const Eigen::MatrixXd &m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < m.cols(); ++j) {
      if (std::isnan(m(i, j))) {
        row.push_back(nullptr);
      } else {
        row.push_back(m(i, j));
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json &j, const char *what) {
  if (!j.is_array() || j.empty() || !j[0].is_array()) {
    throw ParseError(ParseErrorKind::kSchema, 0,
                     std::string(what) + " must be a non-empty array of rows");
  }
  const auto rows = static_cast<Index>(j.size());
  const auto cols = static_cast<Index>(j[0].size());
  Eigen::MatrixXd m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    const auto &row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Index>(row.size()) != cols) {
      throw ParseError(ParseErrorKind::kSchema, 0,
                       std::string(what) + " has ragged rows");
    }
    for (Index c = 0; c < cols; ++c) {
      const auto &v = row[static_cast<std::size_t>(c)];
      if (v.is_null()) {
        m(i, c) = kNaN;
      } else if (v.is_number()) {
        m(i, c) = v.get<double>();
      } else {
        throw ParseError(ParseErrorKind::kSchema, 0,
                         std::string(what) + " has a non-numeric entry");
      }
    }
  }
  return m;
}

Eigen::VectorXd vector_from_json(const json &j, const char *what) {
  if (!j.is_array()) {
    throw ParseError(ParseErrorKind::kSchema, 0, std::string(what) + " must be an array");
  }
  Eigen::VectorXd v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) {
      throw ParseError(ParseErrorKind::kSchema, 0,
                       std::string(what) + " has a non-numeric entry");
    }
    v(static_cast<Index>(i)) = j[i].get<double>();
  }
  return v;
}

std::vector<double> to_std(const Eigen::VectorXd &v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

} // namespace

Dataset parse_dataset(std::istream &in) {
  const CsvLines csv(in);
  if (csv.rows.empty()) {
    throw ParseError(ParseErrorKind::kMissingHeader, 0, "missing header row");
  }
  const auto &header = csv.rows.front();
  Index d = 0;
  Index m = 0;
  for (const auto &name : header.cells) {
    if (has_prefix_index(name, 'x')) {
      if (m > 0) {
        throw ParseError(ParseErrorKind::kBadHeader, header.line,
                         "input column '" + name + "' after an output column");
      }
      ++d;
    } else if (has_prefix_index(name, 'y')) {
      ++m;
    } else {
      throw ParseError(ParseErrorKind::kBadHeader, header.line,
                       "column '" + name + "' is neither x<k> nor y<k>");
    }
  }
  if (d == 0) throw ParseError(ParseErrorKind::kNoInputs, header.line, "no input columns (x1..xD)");
  if (m == 0) throw ParseError(ParseErrorKind::kNoOutputs, header.line, "no output columns (y1..yM)");

  const auto n = static_cast<Index>(csv.rows.size() - 1);
  Eigen::MatrixXd inputs(n, d);
  Eigen::MatrixXd outputs(n, m);
  for (Index i = 0; i < n; ++i) {
    const auto &row = csv.rows[static_cast<std::size_t>(i + 1)];
    check_row_width(row, header.cells.size());
    for (Index c = 0; c < d; ++c) {
      inputs(i, c) = parse_number(row.cells[c], row.line, header.cells[c]);
    }
    for (Index c = 0; c < m; ++c) {
      const std::string &cell = row.cells[d + c];
      outputs(i, c) = is_missing_token(cell)
                          ? kNaN
                          : parse_number(cell, row.line, header.cells[d + c]);
    }
  }
  for (Index c = 0; c < m; ++c) {
    bool any = false;
    for (Index i = 0; i < n; ++i) any = any || std::isfinite(outputs(i, c));
    if (!any) {
      throw ParseError(ParseErrorKind::kEmptyTask, 0,
                       "task " + std::to_string(c + 1) + " has no observations");
    }
  }
  return Dataset(std::move(inputs), std::move(outputs));
}

Dataset load_dataset(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open data file '" + path + "'");
  return parse_dataset(in);
}

QuerySet parse_queries(std::istream &in, Index input_dim, Index num_tasks) {
  const CsvLines csv(in);
  QuerySet out;
  out.inputs.resize(0, input_dim);
  if (csv.rows.empty()) return out;

  const auto &header = csv.rows.front();
  const auto width = static_cast<std::size_t>(input_dim + 1);
  bool ok = header.cells.size() == width && header.cells.back() == "task";
  for (Index c = 0; ok && c < input_dim; ++c) {
    ok = has_prefix_index(header.cells[c], 'x');
  }
  if (!ok) {
    throw ParseError(ParseErrorKind::kSchema, header.line,
                     "query header must be x1..x" + std::to_string(input_dim) +
                         ",task for this model");
  }

  const auto n = static_cast<Index>(csv.rows.size() - 1);
  out.inputs.resize(n, input_dim);
  for (Index i = 0; i < n; ++i) {
    const auto &row = csv.rows[static_cast<std::size_t>(i + 1)];
    check_row_width(row, width);
    for (Index c = 0; c < input_dim; ++c) {
      out.inputs(i, c) = parse_number(row.cells[c], row.line, header.cells[c]);
    }
    const double t = parse_number(row.cells.back(), row.line, "task");
    if (t != std::floor(t) || t < 0 || t >= static_cast<double>(num_tasks)) {
      throw ParseError(ParseErrorKind::kSchema, row.line,
                       "task index " + row.cells.back() + " is not in [0, " +
                           std::to_string(num_tasks) + ")");
    }
    out.tasks.push_back(static_cast<Index>(t));
  }
  return out;
}

QuerySet load_queries(const std::string &path, Index input_dim,
                      Index num_tasks) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open query file '" + path + "'");
  return parse_queries(in, input_dim, num_tasks);
}

RunConfig parse_run_config(const std::string &json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error &e) {
    throw ParseError(ParseErrorKind::kSchema, 0, std::string("config: ") + e.what());
  }
  if (!j.is_object()) {
    throw ParseError(ParseErrorKind::kSchema, 0, "config must be a JSON object");
  }
  reject_unknown_keys(j,
                      {"method", "kernel", "jitter", "seed", "masked_mode",
                       "gradient", "em"},
                      "config");
  RunConfig cfg;
  if (j.contains("method")) {
    const auto m = get_checked<std::string>(j, "method");
    if (m == "em") cfg.method = FitMethod::kEm;
    else if (m == "gradient") cfg.method = FitMethod::kGradient;
    else throw UsageError("config: method must be 'em' or 'gradient'");
  }
  if (j.contains("kernel")) {
    cfg.kernel = get_checked<std::string>(j, "kernel");
    if (cfg.kernel != "rbf-ard") throw UsageError("config: kernel must be 'rbf-ard'");
  }
  if (j.contains("jitter")) {
    cfg.jitter = get_checked<double>(j, "jitter");
    if (!(cfg.jitter >= 0)) throw UsageError("config: jitter must be >= 0");
  }
  if (j.contains("seed")) cfg.seed = get_checked<std::uint64_t>(j, "seed");
  if (j.contains("masked_mode")) {
    const auto m = get_checked<std::string>(j, "masked_mode");
    if (m == "auto") cfg.masked_mode = MaskedMode::kAuto;
    else if (m == "dense") cfg.masked_mode = MaskedMode::kDense;
    else if (m == "iterative") cfg.masked_mode = MaskedMode::kIterative;
    else throw UsageError("config: masked_mode must be auto, dense or iterative");
  }
  if (j.contains("gradient")) read_inner(j.at("gradient"), cfg.gradient, "config.gradient");
  if (j.contains("em")) {
    const json &e = j.at("em");
    reject_unknown_keys(e,
                        {"num_latent_samples", "max_em_iterations",
                         "e_step_mode", "theta_opt"},
                        "config.em");
    if (e.contains("num_latent_samples")) cfg.em.num_latent_samples = get_checked<Index>(e, "num_latent_samples");
    if (e.contains("max_em_iterations")) cfg.em.max_em_iterations = get_checked<Index>(e, "max_em_iterations");
    if (e.contains("e_step_mode")) {
      const auto m = get_checked<std::string>(e, "e_step_mode");
      if (m == "sample") cfg.em.e_step_mode = EStepMode::kSample;
      else if (m == "exact-moments") cfg.em.e_step_mode = EStepMode::kExactMoments;
      else throw UsageError("config.em: e_step_mode must be sample or exact-moments");
    }
    if (e.contains("theta_opt")) read_inner(e.at("theta_opt"), cfg.em.theta_opt, "config.em.theta_opt");
    if (cfg.em.num_latent_samples < 1 || cfg.em.max_em_iterations < 0) {
      throw UsageError("config.em: num_latent_samples >= 1 and max_em_iterations >= 0");
    }
  }
  return cfg;
}

RunConfig load_run_config(const std::string &path) {
  return parse_run_config(read_file(path));
}

MaskedOptions masked_options(const RunConfig &cfg, const Dataset &ds) {
  MaskedOptions opts;
  const bool iterative =
      cfg.masked_mode == MaskedMode::kIterative ||
      (cfg.masked_mode == MaskedMode::kAuto && ds.num_observed() > kAutoDenseLimit);
  if (iterative) {
    opts.solve = MaskedSolve::kIterative;
    opts.logdet = LogdetMethod::kLanczos;
    opts.seed = cfg.seed;
  }
  return opts;
}

std::string dataset_fingerprint(const Dataset &ds) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  h = fnv1a(h, static_cast<std::uint64_t>(ds.num_points()));
  h = fnv1a(h, static_cast<std::uint64_t>(ds.input_dim()));
  h = fnv1a(h, static_cast<std::uint64_t>(ds.num_tasks()));
  const auto mix = [&](double v) {
    if (std::isnan(v)) v = kNaN; // one bit pattern for every NaN
    h = fnv1a(h, std::bit_cast<std::uint64_t>(v));
  };
  for (Index i = 0; i < ds.num_points(); ++i) {
    for (Index c = 0; c < ds.input_dim(); ++c) mix(ds.inputs()(i, c));
    for (Index c = 0; c < ds.num_tasks(); ++c) mix(ds.outputs()(i, c));
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

std::string serialize_model(const ModelFile &model) {
  const MtgpParams &p = model.params;
  json j;
  j["schema_version"] = model.schema_version;
  j["kernel"] = {
      {"type", "rbf-ard"},
      {"log_lengthscales", to_std(p.kernel.log_lengthscales)},
      {"log_signal_variance", p.kernel.log_signal_variance},
  };
  j["task"] = {{"raw_factor", matrix_to_json(p.task.raw())}};
  j["noise"] = {{"log_noise_variances", to_std(p.noise.log_noise_variances)}};
  j["jitter"] = p.jitter;
  j["training"] = {
      {"inputs", matrix_to_json(model.training.inputs())},
      {"outputs", matrix_to_json(model.training.outputs())},
  };
  j["dataset_fingerprint"] = model.fingerprint;
  j["fit"] = {
      {"method", model.fit.method},
      {"seed", model.fit.seed},
      {"objective", model.fit.objective},
      {"iterations", model.fit.iterations},
      {"converged", model.fit.converged},
  };
  return j.dump(2) + "\n";
}

ModelFile parse_model(const std::string &text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error &e) {
    throw ParseError(ParseErrorKind::kSchema, 0, std::string("model: ") + e.what());
  }
  const int version = get_checked<int>(j, "schema_version");
  if (version != kModelSchemaVersion) {
    throw ParseError(ParseErrorKind::kSchema, 0,
                     "model schema_version " + std::to_string(version) +
                         " is not supported (expected " +
                         std::to_string(kModelSchemaVersion) + ")");
  }
  try {
    const json &k = j.at("kernel");
    if (get_checked<std::string>(k, "type") != "rbf-ard") {
      throw ParseError(ParseErrorKind::kSchema, 0, "model: unknown kernel type");
    }
    KernelParams kernel{vector_from_json(k.at("log_lengthscales"), "log_lengthscales"),
                        get_checked<double>(k, "log_signal_variance")};
    TaskCov task(matrix_from_json(j.at("task").at("raw_factor"), "raw_factor"));
    NoiseParams noise{vector_from_json(j.at("noise").at("log_noise_variances"),
                                       "log_noise_variances")};
    MtgpParams params{std::move(kernel), std::move(task), std::move(noise),
                      get_checked<double>(j, "jitter")};
    const json &t = j.at("training");
    Dataset training(matrix_from_json(t.at("inputs"), "training.inputs"),
                     matrix_from_json(t.at("outputs"), "training.outputs"));
    params.check_compatible(training);

    const json &f = j.at("fit");
    FitMetadata fit{get_checked<std::string>(f, "method"),
                    get_checked<std::uint64_t>(f, "seed"),
                    get_checked<double>(f, "objective"),
                    get_checked<Index>(f, "iterations"),
                    get_checked<bool>(f, "converged")};

    ModelFile model{version, std::move(params), std::move(training),
                    get_checked<std::string>(j, "dataset_fingerprint"),
                    std::move(fit)};
    if (model.fingerprint != dataset_fingerprint(model.training)) {
      throw ParseError(ParseErrorKind::kSchema, 0,
                       "model: training data does not match its fingerprint");
    }
    return model;
  } catch (const json::exception &e) {
    throw ParseError(ParseErrorKind::kSchema, 0, std::string("model: ") + e.what());
  } catch (const DimensionError &e) {
    throw ParseError(ParseErrorKind::kSchema, 0, std::string("model: ") + e.what());
  }
}

void save_model(const ModelFile &model, const std::string &path) {
  write_file(path, serialize_model(model));
}

ModelFile load_model(const std::string &path) {
  return parse_model(read_file(path));
}

std::string read_file(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const std::string &path, const std::string &contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw UsageError("cannot write '" + path + "'");
  out << contents;
  if (!out) throw UsageError("failed writing '" + path + "'");
}

} // namespace mtgp::io
