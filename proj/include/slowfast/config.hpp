#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "slowfast/invariant_measure.hpp"
#include "slowfast/multiscale.hpp"
#include "slowfast/reaction.hpp"
#include "slowfast/spectral.hpp"

namespace slowfast {

enum class ExperimentKind { Validate, Fast, Invariant, Coupled, Average, Converge, Remainder };

std::string to_string(ExperimentKind kind);
/// Throws std::invalid_argument for unknown names.
ExperimentKind experiment_from_string(const std::string& name);

struct SystemSpec {
  double length = 3.141592653589793;
  int grid_points = 0;  // 0 selects 2 n_modes + 1
  OperatorParams slow_operator;
  OperatorParams fast_operator;
  ReactionFunction f;
  ReactionFunction g = ReactionFunction::parse("linear_damped(a=0.5)");

  bool operator==(const SystemSpec&) const = default;
};

/// Initial data and probe direction as leading eigen-coefficients
/// (missing entries are zero).
struct InitialSpec {
  std::vector<double> x0{1.0};
  std::vector<double> y0;

  bool operator==(const InitialSpec&) const = default;
};

struct ProbeSpec {
  std::vector<double> h{1.0};

  bool operator==(const ProbeSpec&) const = default;
};

struct StudySpec {
  std::vector<double> eps_grid{1.0, 0.1, 0.01};
  double c_eps = 1.0;
  double T_cut = 20.0;
  double dt = 0.01;

  bool operator==(const StudySpec&) const = default;
};

struct FastSpec {
  double T = 10.0;
  double dt = 0.01;
  int record_every = 10;

  bool operator==(const FastSpec&) const = default;
};

struct ExperimentSpec {
  std::string name = "experiment";
  ExperimentKind experiment = ExperimentKind::Validate;
  std::string output = "out";
  SystemSpec system;
  SimConfig sim;
  InitialSpec initial;
  ProbeSpec probe;
  StudySpec study;
  MeasureConfig measure;
  FastSpec fast;

  bool operator==(const ExperimentSpec&) const = default;
};

/// Parses the YAML experiment format documented in the README. Unknown keys,
/// wrong types and invalid values raise ConfigError with the 1-based line and
/// column of the offending node.
ExperimentSpec parse_config(std::string_view text);
ExperimentSpec load_config(const std::string& path);

/// Canonical text form; parse_config(serialize(s)) == s.
std::string serialize(const ExperimentSpec& spec);

/// FNV-1a (64 bit, hex) of the canonical serialization, with the output
/// directory left out.
std::string spec_hash(const ExperimentSpec& spec);

}  // namespace slowfast
