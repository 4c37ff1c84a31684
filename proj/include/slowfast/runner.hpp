#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "slowfast/config.hpp"

namespace slowfast {

enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 1,      // unparseable or invalid configuration
  kExitHypothesis = 2,  // a standing assumption fails for the configured system
  kExitValidate = 3,    // a validate-mode check failed
};

/// Command-line overrides applied on top of a parsed spec.
struct RunOptions {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> replicas;
  std::optional<int> threads;
};

ExperimentSpec apply_options(ExperimentSpec spec, const RunOptions& options);

struct ValidationCheck {
  std::string name;
  bool passed = false;
  double value = 0.0;
  double reference = 0.0;
  std::string detail;
};

struct RunReport {
  int exit_code = kExitOk;
  std::string spec_hash;
  std::vector<std::string> files;  // written artifacts
  std::vector<ValidationCheck> checks;
  std::string message;  // error text for nonzero exits
};

/// Runs spec.experiment, writing CSV tables and summary.txt into spec.output.
/// Progress and the summary go to `log`. Exceptions are mapped to exit codes.
RunReport run_experiment(const ExperimentSpec& spec, std::ostream& log);

}  // namespace slowfast
