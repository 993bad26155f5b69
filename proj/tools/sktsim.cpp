// Command-line front end: simulate | ensemble | convergence | validate.

#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "sktsim/sktsim.hpp"

namespace {

int resolve_threads(int flag_value) {
  if (flag_value > 0) return flag_value;
  if (const char* env = std::getenv("SKT_SPDE_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  return 1;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"stochastic cross-diffusion simulator"};
  app.set_version_flag("--version", sktsim::version);
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  uint64_t seed = 0;
  bool seed_set = false;
  int threads = 0;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "run configuration file (JSON, comments allowed)")
        ->required();
    cmd->add_option("--out", out_dir, "output directory (overrides config)");
    cmd->add_option("--seed", seed, "base seed (overrides config)")->each([&](const std::string&) {
      seed_set = true;
    });
    cmd->add_option("--threads", threads,
                    "worker threads (speed only, never results); SKT_SPDE_THREADS as fallback");
  };

  CLI::App* sim = app.add_subcommand("simulate", "run one trajectory and write diagnostics");
  CLI::App* ens = app.add_subcommand("ensemble", "Monte Carlo over independent paths");
  CLI::App* conv = app.add_subcommand("convergence", "strong-order and refinement studies");
  CLI::App* val = app.add_subcommand("validate", "check the configuration against the model assumptions");
  for (CLI::App* cmd : {sim, ens, conv, val}) add_common(cmd);

  CLI11_PARSE(app, argc, argv);

  sktsim::RunConfig cfg;
  try {
    cfg = sktsim::load_config(config_path);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return sktsim::exit_config;
  }

  sktsim::RunOptions opts;
  opts.out_dir = out_dir;
  if (seed_set) opts.seed_override = seed;
  opts.threads = resolve_threads(threads);

  try {
    if (val->parsed()) return sktsim::run_validate(cfg, std::cout);
    if (sim->parsed()) return sktsim::run_simulate(cfg, opts, std::cout);
    if (ens->parsed()) return sktsim::run_ensemble_cmd(cfg, opts, std::cout);
    if (conv->parsed()) return sktsim::run_convergence(cfg, opts, std::cout);
  } catch (const sktsim::ConfigRejected& e) {
    std::cerr << "rejected: " << e.what() << "\n";
    return sktsim::exit_config;
  } catch (const sktsim::EnsembleDegenerate& e) {
    std::cerr << "degenerate: " << e.what() << "\n";
    return sktsim::exit_guard;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return sktsim::exit_numerical;
  }
  return sktsim::exit_config;
}
