#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace ebstab {

enum class ErrorCode {
  DimensionMismatch,
  UnsupportedSubdiff,
  NonConvergence,
  UndeterminedInradius,
  NoSlaterPoint,
  NoSignChange,
  Precondition,
  Syntax,
  ConvexityRule,
  InfeasibleSlater,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DimensionMismatch: return "dimension-mismatch";
    case ErrorCode::UnsupportedSubdiff: return "unsupported-subdiff";
    case ErrorCode::NonConvergence: return "non-convergence";
    case ErrorCode::UndeterminedInradius: return "undetermined-inradius";
    case ErrorCode::NoSlaterPoint: return "no-slater-point";
    case ErrorCode::NoSignChange: return "no-sign-change-in-box";
    case ErrorCode::Precondition: return "precondition";
    case ErrorCode::Syntax: return "syntax-error";
    case ErrorCode::ConvexityRule: return "convexity-rule";
    case ErrorCode::InfeasibleSlater: return "infeasible-slater-point";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Iteration cap reached; carries the best iterate and its certificate residual.
class NonConvergenceError : public Error {
 public:
  NonConvergenceError(const std::string& what, Eigen::VectorXd best, double residual)
      : Error(ErrorCode::NonConvergence, what), best_(std::move(best)), residual_(residual) {}

  const Eigen::VectorXd& best_iterate() const noexcept { return best_; }
  double residual() const noexcept { return residual_; }

 private:
  Eigen::VectorXd best_;
  double residual_;
};

/// Interior inradius could not be pinned down to tolerance (m > 4).
class UndeterminedInradiusError : public Error {
 public:
  UndeterminedInradiusError(double lower, double upper)
      : Error(ErrorCode::UndeterminedInradius,
              "inradius bracket [" + std::to_string(lower) + ", " + std::to_string(upper) + "]"),
        lower_(lower),
        upper_(upper) {}

  double lower() const noexcept { return lower_; }
  double upper() const noexcept { return upper_; }

 private:
  double lower_;
  double upper_;
};

/// Parse failure with 1-based line/column.
class ParseError : public Error {
 public:
  ParseError(ErrorCode code, int line, int column, const std::string& what)
      : Error(code, std::to_string(line) + ":" + std::to_string(column) + ": " + what),
        line_(line),
        column_(column) {}

  int line() const noexcept { return line_; }
  int column() const noexcept { return column_; }

 private:
  int line_;
  int column_;
};

}  // namespace ebstab
