#ifndef MTGP_ERROR_HPP_
#define MTGP_ERROR_HPP_

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mtgp {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Shapes or indices that do not conform.
class DimensionError : public Error {
public:
  using Error::Error;
};

/// Factorization, eigendecomposition or other numerical breakdown.
class NumericalError : public Error {
public:
  using Error::Error;
};

/// An iterative solver ran out of iterations. Carries the best relative
/// residual it reached.
class IterationLimitError : public NumericalError {
public:
  IterationLimitError(const std::string &what, double best_residual)
      : NumericalError(what), best_residual_(best_residual) {}

  double best_residual() const { return best_residual_; }

private:
  double best_residual_;
};

/// Every restart of a fit failed. The message aggregates per-restart
/// diagnostics.
class FitError : public NumericalError {
public:
  using NumericalError::NumericalError;
};

/// Invalid arguments or preconditions (bad config values, EM on masked
/// data, unknown task index).
class UsageError : public Error {
public:
  using Error::Error;
};

enum class ParseErrorKind {
  kMissingHeader,
  kBadHeader,
  kRaggedRow,
  kNonNumeric,
  kNoInputs,
  kNoOutputs,
  kEmptyTask,
  kSchema,
};

/// Malformed input file. `line()` is 1-based; 0 when the error is not tied
/// to a specific line.
class ParseError : public Error {
public:
  ParseError(ParseErrorKind kind, std::size_t line, const std::string &what)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        kind_(kind), line_(line) {}

  ParseErrorKind kind() const { return kind_; }
  std::size_t line() const { return line_; }

private:
  ParseErrorKind kind_;
  std::size_t line_;
};

} // namespace mtgp

#endif // MTGP_ERROR_HPP_
