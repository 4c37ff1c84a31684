#include "slowfast/config.hpp"

#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

#include <array>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "slowfast/errors.hpp"

namespace slowfast {

namespace {

constexpr std::array<std::pair<ExperimentKind, const char*>, 7> kExperimentNames{{
    {ExperimentKind::Validate, "validate"},
    {ExperimentKind::Fast, "fast"},
    {ExperimentKind::Invariant, "invariant"},
    {ExperimentKind::Coupled, "coupled"},
    {ExperimentKind::Average, "average"},
    {ExperimentKind::Converge, "converge"},
    {ExperimentKind::Remainder, "remainder"},
}};

}  // namespace

std::string to_string(ExperimentKind kind) {
  for (const auto& [k, name] : kExperimentNames) {
    if (k == kind) return name;
  }
  return "validate";
}

ExperimentKind experiment_from_string(const std::string& name) {
  for (const auto& [k, n] : kExperimentNames) {
    if (name == n) return k;
  }
  throw std::invalid_argument("unknown experiment '" + name +
                              "' (expected validate, fast, invariant, coupled, average, converge "
                              "or remainder)");
}

namespace {

[[noreturn]] void fail(const YAML::Node& node, const std::string& message) {
  const YAML::Mark mark = node.Mark();
  throw ConfigError(message, mark.line, mark.column);
}

// Rejects unknown and repeated keys; returns the node for chaining.
void check_keys(const YAML::Node& node, const std::string& section,
                std::initializer_list<std::string_view> allowed) {
  if (!node.IsMap()) fail(node, "'" + section + "' must be a mapping");
  std::set<std::string> seen;
  for (const auto& item : node) {
    const std::string key = item.first.Scalar();
    const std::string path = section.empty() ? key : section + "." + key;
    bool known = false;
    for (auto a : allowed) known = known || a == key;
    if (!known) fail(item.first, "unknown key '" + path + "'");
    if (!seen.insert(key).second) fail(item.first, "duplicate key '" + path + "'");
  }
}

template <typename T>
T scalar(const YAML::Node& node, const std::string& path, const char* type_name) {
  if (!node.IsScalar()) fail(node, "'" + path + "' must be a " + type_name);
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    fail(node, "'" + path + "' must be a " + type_name + " (got '" + node.Scalar() + "')");
  }
}

double real(const YAML::Node& n, const std::string& path) {
  return scalar<double>(n, path, "number");
}

int integer(const YAML::Node& n, const std::string& path) { return scalar<int>(n, path, "integer"); }

std::vector<double> real_list(const YAML::Node& node, const std::string& path) {
  if (!node.IsSequence()) fail(node, "'" + path + "' must be a list of numbers");
  std::vector<double> out;
  for (const auto& item : node) out.push_back(real(item, path));
  return out;
}

template <typename Fn>
void optional(const YAML::Node& map, const char* key, Fn&& fn) {
  const YAML::Node node = map[key];
  if (node) fn(node);
}

template <typename Parse>
auto checked(const YAML::Node& node, Parse&& parse) -> decltype(parse()) {
  try {
    return parse();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    fail(node, e.what());
  }
}

OperatorParams parse_operator(const YAML::Node& node, const std::string& path) {
  check_keys(node, path, {"boundary", "diffusivity", "mass"});
  OperatorParams op;
  optional(node, "boundary", [&](const YAML::Node& n) {
    const std::string name = scalar<std::string>(n, path + ".boundary", "string");
    op.boundary = checked(n, [&] { return boundary_from_string(name); });
  });
  optional(node, "diffusivity", [&](const YAML::Node& n) {
    op.diffusivity = real(n, path + ".diffusivity");
    if (!(op.diffusivity > 0.0)) fail(n, "'" + path + ".diffusivity' must be positive");
  });
  optional(node, "mass", [&](const YAML::Node& n) { op.mass = real(n, path + ".mass"); });
  return op;
}

ReactionFunction parse_reaction(const YAML::Node& node, const std::string& path) {
  const std::string text = scalar<std::string>(node, path, "string");
  return checked(node, [&] { return ReactionFunction::parse(text); });
}

void parse_system(const YAML::Node& node, SystemSpec& s) {
  check_keys(node, "system", {"length", "grid_points", "slow_operator", "fast_operator", "f", "g"});
  optional(node, "length", [&](const YAML::Node& n) {
    s.length = real(n, "system.length");
    if (!(s.length > 0.0)) fail(n, "'system.length' must be positive");
  });
  optional(node, "grid_points", [&](const YAML::Node& n) {
    s.grid_points = integer(n, "system.grid_points");
    if (s.grid_points < 0) fail(n, "'system.grid_points' must be >= 0");
  });
  optional(node, "slow_operator",
           [&](const YAML::Node& n) { s.slow_operator = parse_operator(n, "system.slow_operator"); });
  optional(node, "fast_operator",
           [&](const YAML::Node& n) { s.fast_operator = parse_operator(n, "system.fast_operator"); });
  optional(node, "f", [&](const YAML::Node& n) { s.f = parse_reaction(n, "system.f"); });
  optional(node, "g", [&](const YAML::Node& n) { s.g = parse_reaction(n, "system.g"); });
}

void parse_sim(const YAML::Node& node, SimConfig& c) {
  check_keys(node, "sim",
             {"eps", "T", "dt_slow", "dt_fast", "n_modes", "replicas", "seed", "eta"});
  optional(node, "eps", [&](const YAML::Node& n) { c.eps = real(n, "sim.eps"); });
  optional(node, "T", [&](const YAML::Node& n) { c.T = real(n, "sim.T"); });
  optional(node, "dt_slow", [&](const YAML::Node& n) { c.dt_slow = real(n, "sim.dt_slow"); });
  optional(node, "dt_fast", [&](const YAML::Node& n) { c.dt_fast = real(n, "sim.dt_fast"); });
  optional(node, "n_modes", [&](const YAML::Node& n) { c.n_modes = integer(n, "sim.n_modes"); });
  optional(node, "replicas", [&](const YAML::Node& n) { c.replicas = integer(n, "sim.replicas"); });
  optional(node, "seed", [&](const YAML::Node& n) {
    c.seed = scalar<std::uint64_t>(n, "sim.seed", "unsigned 64-bit integer");
  });
  optional(node, "eta", [&](const YAML::Node& n) { c.eta = real(n, "sim.eta"); });
  checked(node, [&] {
    c.validate();
    return 0;
  });
}

void parse_measure(const YAML::Node& node, MeasureConfig& m) {
  check_keys(node, "measure", {"estimator", "pcn", "ergodic"});
  optional(node, "estimator", [&](const YAML::Node& n) {
    const std::string name = scalar<std::string>(n, "measure.estimator", "string");
    m.estimator = checked(n, [&] { return provenance_from_string(name); });
  });
  optional(node, "pcn", [&](const YAML::Node& p) {
    check_keys(p, "measure.pcn",
               {"samples", "beta", "burn_in", "thin", "adapt", "target_acceptance"});
    optional(p, "samples", [&](const YAML::Node& n) {
      m.pcn.n_samples = integer(n, "measure.pcn.samples");
      if (m.pcn.n_samples < 4) fail(n, "'measure.pcn.samples' must be >= 4");
    });
    optional(p, "beta", [&](const YAML::Node& n) {
      m.pcn.beta = real(n, "measure.pcn.beta");
      if (!(m.pcn.beta > 0.0 && m.pcn.beta < 1.0)) fail(n, "'measure.pcn.beta' must lie in (0, 1)");
    });
    optional(p, "burn_in", [&](const YAML::Node& n) {
      m.pcn.burn_in = integer(n, "measure.pcn.burn_in");
      if (m.pcn.burn_in < 0) fail(n, "'measure.pcn.burn_in' must be >= 0");
    });
    optional(p, "thin", [&](const YAML::Node& n) {
      m.pcn.thin = integer(n, "measure.pcn.thin");
      if (m.pcn.thin < 1) fail(n, "'measure.pcn.thin' must be >= 1");
    });
    optional(p, "adapt",
             [&](const YAML::Node& n) { m.pcn.adapt = scalar<bool>(n, "measure.pcn.adapt", "boolean"); });
    optional(p, "target_acceptance", [&](const YAML::Node& n) {
      m.pcn.target_acceptance = real(n, "measure.pcn.target_acceptance");
      if (!(m.pcn.target_acceptance > 0.0 && m.pcn.target_acceptance < 1.0)) {
        fail(n, "'measure.pcn.target_acceptance' must lie in (0, 1)");
      }
    });
  });
  optional(node, "ergodic", [&](const YAML::Node& e) {
    check_keys(e, "measure.ergodic", {"T_burn", "T_sample", "dt", "thin"});
    optional(e, "T_burn", [&](const YAML::Node& n) {
      m.ergodic.T_burn = real(n, "measure.ergodic.T_burn");
      if (m.ergodic.T_burn < 0.0) fail(n, "'measure.ergodic.T_burn' must be >= 0");
    });
    optional(e, "T_sample", [&](const YAML::Node& n) {
      m.ergodic.T_sample = real(n, "measure.ergodic.T_sample");
      if (!(m.ergodic.T_sample > 0.0)) fail(n, "'measure.ergodic.T_sample' must be positive");
    });
    optional(e, "dt", [&](const YAML::Node& n) {
      m.ergodic.dt = real(n, "measure.ergodic.dt");
      if (!(m.ergodic.dt > 0.0)) fail(n, "'measure.ergodic.dt' must be positive");
    });
    optional(e, "thin", [&](const YAML::Node& n) {
      m.ergodic.thin = integer(n, "measure.ergodic.thin");
      if (m.ergodic.thin < 1) fail(n, "'measure.ergodic.thin' must be >= 1");
    });
  });
}

ExperimentSpec parse_root(const YAML::Node& root) {
  if (!root || root.IsNull()) throw ConfigError("configuration is empty");
  check_keys(root, "",
             {"name", "experiment", "output", "system", "sim", "initial", "probe", "study",
              "measure", "fast"});
  ExperimentSpec spec;
  optional(root, "name", [&](const YAML::Node& n) { spec.name = scalar<std::string>(n, "name", "string"); });
  optional(root, "experiment", [&](const YAML::Node& n) {
    const std::string name = scalar<std::string>(n, "experiment", "string");
    spec.experiment = checked(n, [&] { return experiment_from_string(name); });
  });
  optional(root, "output",
           [&](const YAML::Node& n) { spec.output = scalar<std::string>(n, "output", "string"); });
  optional(root, "system", [&](const YAML::Node& n) { parse_system(n, spec.system); });
  optional(root, "sim", [&](const YAML::Node& n) { parse_sim(n, spec.sim); });
  optional(root, "initial", [&](const YAML::Node& n) {
    check_keys(n, "initial", {"x0", "y0"});
    optional(n, "x0", [&](const YAML::Node& v) { spec.initial.x0 = real_list(v, "initial.x0"); });
    optional(n, "y0", [&](const YAML::Node& v) { spec.initial.y0 = real_list(v, "initial.y0"); });
    for (const char* key : {"x0", "y0"}) {
      const YAML::Node v = n[key];
      if (v && v.size() > static_cast<std::size_t>(spec.sim.n_modes)) {
        fail(v, fmt::format("'initial.{}' has more entries than sim.n_modes = {}", key,
                            spec.sim.n_modes));
      }
    }
  });
  optional(root, "probe", [&](const YAML::Node& n) {
    check_keys(n, "probe", {"h"});
    optional(n, "h", [&](const YAML::Node& v) {
      spec.probe.h = real_list(v, "probe.h");
      if (spec.probe.h.size() > static_cast<std::size_t>(spec.sim.n_modes)) {
        fail(v, "'probe.h' has more entries than sim.n_modes");
      }
    });
  });
  optional(root, "study", [&](const YAML::Node& n) {
    check_keys(n, "study", {"eps_grid", "c_eps", "T_cut", "dt"});
    optional(n, "eps_grid", [&](const YAML::Node& v) {
      spec.study.eps_grid = real_list(v, "study.eps_grid");
      if (spec.study.eps_grid.empty()) fail(v, "'study.eps_grid' must not be empty");
      for (std::size_t i = 0; i < spec.study.eps_grid.size(); ++i) {
        if (!(spec.study.eps_grid[i] > 0.0)) fail(v, "'study.eps_grid' entries must be positive");
        if (i > 0 && !(spec.study.eps_grid[i] < spec.study.eps_grid[i - 1])) {
          fail(v, "'study.eps_grid' must be strictly decreasing");
        }
      }
    });
    optional(n, "c_eps", [&](const YAML::Node& v) {
      spec.study.c_eps = real(v, "study.c_eps");
      if (!(spec.study.c_eps > 0.0)) fail(v, "'study.c_eps' must be positive");
    });
    optional(n, "T_cut", [&](const YAML::Node& v) {
      spec.study.T_cut = real(v, "study.T_cut");
      if (!(spec.study.T_cut > 0.0)) fail(v, "'study.T_cut' must be positive");
    });
    optional(n, "dt", [&](const YAML::Node& v) {
      spec.study.dt = real(v, "study.dt");
      if (!(spec.study.dt > 0.0)) fail(v, "'study.dt' must be positive");
    });
  });
  optional(root, "measure", [&](const YAML::Node& n) { parse_measure(n, spec.measure); });
  optional(root, "fast", [&](const YAML::Node& n) {
    check_keys(n, "fast", {"T", "dt", "record_every"});
    optional(n, "T", [&](const YAML::Node& v) {
      spec.fast.T = real(v, "fast.T");
      if (!(spec.fast.T > 0.0)) fail(v, "'fast.T' must be positive");
    });
    optional(n, "dt", [&](const YAML::Node& v) {
      spec.fast.dt = real(v, "fast.dt");
      if (!(spec.fast.dt > 0.0)) fail(v, "'fast.dt' must be positive");
    });
    optional(n, "record_every", [&](const YAML::Node& v) {
      spec.fast.record_every = integer(v, "fast.record_every");
      if (spec.fast.record_every < 1) fail(v, "'fast.record_every' must be >= 1");
    });
  });
  return spec;
}

std::string quoted(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

std::string list(const std::vector<double>& xs) {
  return fmt::format("[{}]", fmt::join(xs, ", "));
}

void emit_operator(std::ostringstream& os, const char* key, const OperatorParams& op) {
  os << "  " << key << ":\n"
     << "    boundary: " << to_string(op.boundary) << '\n'
     << fmt::format("    diffusivity: {}\n    mass: {}\n", op.diffusivity, op.mass);
}

}  // namespace

ExperimentSpec parse_config(std::string_view text) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(text));
  } catch (const YAML::ParserException& e) {
    throw ConfigError(e.msg, e.mark.line, e.mark.column);
  }
  return parse_root(root);
}

ExperimentSpec load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read configuration file '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

std::string serialize(const ExperimentSpec& s) {
  std::ostringstream os;
  os << "name: " << quoted(s.name) << '\n'
     << "experiment: " << to_string(s.experiment) << '\n'
     << "output: " << quoted(s.output) << '\n';
  os << "system:\n"
     << fmt::format("  length: {}\n  grid_points: {}\n", s.system.length, s.system.grid_points);
  emit_operator(os, "slow_operator", s.system.slow_operator);
  emit_operator(os, "fast_operator", s.system.fast_operator);
  os << "  f: " << quoted(s.system.f.to_string()) << '\n'
     << "  g: " << quoted(s.system.g.to_string()) << '\n';
  os << fmt::format(
      "sim:\n  eps: {}\n  T: {}\n  dt_slow: {}\n  dt_fast: {}\n  n_modes: {}\n  replicas: {}\n"
      "  seed: {}\n  eta: {}\n",
      s.sim.eps, s.sim.T, s.sim.dt_slow, s.sim.dt_fast, s.sim.n_modes, s.sim.replicas, s.sim.seed,
      s.sim.eta);
  os << "initial:\n  x0: " << list(s.initial.x0) << "\n  y0: " << list(s.initial.y0) << '\n';
  os << "probe:\n  h: " << list(s.probe.h) << '\n';
  os << fmt::format("study:\n  eps_grid: {}\n  c_eps: {}\n  T_cut: {}\n  dt: {}\n",
                    list(s.study.eps_grid), s.study.c_eps, s.study.T_cut, s.study.dt);
  const MeasureConfig& m = s.measure;
  os << "measure:\n  estimator: " << to_string(m.estimator) << '\n'
     << fmt::format(
            "  pcn:\n    samples: {}\n    beta: {}\n    burn_in: {}\n    thin: {}\n    adapt: {}\n"
            "    target_acceptance: {}\n",
            m.pcn.n_samples, m.pcn.beta, m.pcn.burn_in, m.pcn.thin, m.pcn.adapt,
            m.pcn.target_acceptance)
     << fmt::format("  ergodic:\n    T_burn: {}\n    T_sample: {}\n    dt: {}\n    thin: {}\n",
                    m.ergodic.T_burn, m.ergodic.T_sample, m.ergodic.dt, m.ergodic.thin);
  os << fmt::format("fast:\n  T: {}\n  dt: {}\n  record_every: {}\n", s.fast.T, s.fast.dt,
                    s.fast.record_every);
  return os.str();
}

std::string spec_hash(const ExperimentSpec& spec) {
  ExperimentSpec hashed = spec;
  hashed.output.clear();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : serialize(hashed)) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return fmt::format("{:016x}", h);
}

}  // namespace slowfast
