#pragma once

#include <stdexcept>
#include <string>

namespace slowfast {

/// A standing assumption of the averaging theory does not hold for the
/// requested configuration. `hypothesis()` names the violated condition.
class HypothesisViolation : public std::runtime_error {
 public:
  HypothesisViolation(std::string hypothesis, const std::string& detail)
      : std::runtime_error(hypothesis + ": " + detail), hypothesis_(std::move(hypothesis)) {}

  const std::string& hypothesis() const { return hypothesis_; }

 private:
  std::string hypothesis_;
};

/// A least-squares rate fit had no usable data (e.g. coupled trajectories
/// coincide to round-off before the fit window).
class DegenerateFit : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Configuration text could not be turned into an experiment.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& message, int line = -1, int column = -1)
      : std::runtime_error(format(message, line, column)), line_(line), column_(column) {}

  int line() const { return line_; }
  int column() const { return column_; }

 private:
  static std::string format(const std::string& message, int line, int column) {
    if (line < 0) return message;
    return "line " + std::to_string(line + 1) + ", column " + std::to_string(column + 1) + ": " +
           message;
  }

  int line_;
  int column_;
};

}  // namespace slowfast
