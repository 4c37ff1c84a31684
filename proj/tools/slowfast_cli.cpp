#include <CLI11.hpp>

#include <iostream>

#include "slowfast/config.hpp"
#include "slowfast/errors.hpp"
#include "slowfast/runner.hpp"

using namespace slowfast;

int main(int argc, char** argv) {
  CLI::App app{"Slow-fast stochastic reaction-diffusion experiments"};
  app.require_subcommand(1);

  std::string config_path;
  RunOptions options;
  std::uint64_t seed = 0;
  std::string out;
  int replicas = 0;
  int threads = 0;

  std::vector<CLI::App*> commands;
  for (const char* name :
       {"validate", "fast", "invariant", "coupled", "average", "converge", "remainder"}) {
    CLI::App* cmd = app.add_subcommand(name, std::string("run the ") + name + " experiment");
    cmd->add_option("--config", config_path, "experiment file (YAML)")->required();
    cmd->add_option("--seed", seed, "override sim.seed");
    cmd->add_option("--out", out, "override the output directory");
    cmd->add_option("--replicas", replicas, "override sim.replicas");
    cmd->add_option("--threads", threads, "worker threads (results do not depend on it)");
    commands.push_back(cmd);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  CLI::App* cmd = app.get_subcommands().front();
  if (cmd->count("--seed")) options.seed = seed;
  if (cmd->count("--out")) options.out = out;
  if (cmd->count("--replicas")) options.replicas = replicas;
  if (cmd->count("--threads")) options.threads = threads;

  ExperimentSpec spec;
  try {
    spec = apply_options(load_config(config_path), options);
    spec.experiment = experiment_from_string(cmd->get_name());
  } catch (const ConfigError& e) {
    std::cerr << config_path << ": " << e.what() << '\n';
    return kExitConfig;
  }

  const RunReport report = run_experiment(spec, std::cout);
  if (!report.message.empty()) std::cerr << report.message << '\n';
  for (const auto& file : report.files) std::cout << "wrote " << file << '\n';
  return report.exit_code;
}
