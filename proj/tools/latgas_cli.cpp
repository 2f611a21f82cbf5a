// Command-line front end: one subcommand per experiment.
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"

#include "latgas/harness.hpp"

namespace {

struct Flags {
  std::string config;
  std::uint64_t seed = 0;
  int workers = 0;
  std::string out;
};

using Runner = std::function<latgas::Report(const latgas::ExperimentConfig&)>;

int execute(const Flags& f, CLI::App* sub, const Runner& run) {
  latgas::ExperimentConfig cfg;
  try {
    cfg = latgas::load_config(f.config);
    if (sub->count("--seed")) {
      cfg.seed = f.seed;
      cfg.raw["seed"] = f.seed;
    }
    if (sub->count("--workers")) cfg.workers = f.workers;
    if (sub->count("--out")) cfg.output_dir = f.out;
  } catch (const latgas::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  }
  try {
    const latgas::Report rep = run(cfg);
    for (const auto& p : latgas::emit_report(rep, cfg, cfg.output_dir)) std::cout << "wrote " << p.string() << '\n';
    std::cout << rep.command << ": " << (rep.passed ? "ok" : "FAILED") << '\n';
    return rep.passed ? 0 : 1;
  } catch (const latgas::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Open-boundary lattice gases: simulation, conservation-law solver and phase diagrams"};
  app.require_subcommand(1);
  Flags flags;
  const std::map<std::string, std::pair<std::string, Runner>> commands{
      {"validate", {"check the model hypotheses", latgas::run_validate}},
      {"simulate", {"simulate and record density profiles", latgas::run_simulate}},
      {"solve", {"solve the boundary value problem and audit entropy", latgas::run_solve}},
      {"hydrostatic", {"simulated bulk densities against the variational formula", latgas::run_hydrostatic_experiment}},
      {"phases", {"classify the (lambda_a, lambda_b) phase diagram", latgas::run_phases}},
      {"couple-audit", {"coupled runs: order, domination, marginals", latgas::run_coupling_audit}},
      {"hydro-convergence", {"empirical profiles against the PDE over N", latgas::run_hydrodynamic_experiment}},
  };
  int code = 0;
  for (const auto& [name, entry] : commands) {
    CLI::App* sub = app.add_subcommand(name, entry.first);
    sub->add_option("--config", flags.config, "experiment config (JSON)")->required();
    sub->add_option("--seed", flags.seed, "master seed");
    sub->add_option("--workers", flags.workers, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--out", flags.out, "output directory");
    const Runner run = entry.second;
    sub->callback([&flags, sub, run, &code] { code = execute(flags, sub, run); });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  return code;
}
