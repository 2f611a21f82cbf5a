#ifndef LATGAS_HARNESS_HPP
#define LATGAS_HARNESS_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "latgas/flux_pde.hpp"
#include "latgas/geometry.hpp"
#include "latgas/hydrostatics.hpp"
#include "latgas/model_spec.hpp"
#include "latgas/simulator.hpp"

namespace latgas {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct InitialSpec {
  enum class Kind { BoundaryMean, Constant, Step } kind = Kind::BoundaryMean;
  double value = 0.0;
  double left = 0.0;
  double right = 0.0;
  double at = 0.5;  // step location along the normal
};

struct CouplingSpec {
  double c = -1.0;  // xi reservoir for the order run; < 0 selects max(lambda) + 0.1 K clipped to K
  std::uint64_t events = 10'000'000;
  int probes = 5;
  int replicas = 200;
  double marginal_density = -1.0;  // < 0 selects K / 2 (or 1 for unbounded)
  double marginal_t_end = 1.0;
  int marginal_N = 0;  // 0 selects the first N
};

struct ExperimentConfig {
  nlohmann::json raw;
  ModelSpec model;
  std::string domain_shape = "slab";
  PerturbedDomain domain;
  double width = 1.0;
  double lambda_a = 0.5;
  double lambda_b = 0.5;
  InitialSpec initial;
  std::vector<int> N{100};
  std::uint64_t seed = 1;
  int replicas = 1;
  std::vector<double> times{0.5};
  double cell_width = 0.02;
  double pde_dx = 1.0 / 400.0;
  double pde_cfl = 0.9;
  double pde_t_end = -1.0;  // < 0 selects max(times)
  double flux_upper = 0.0;  // needed for unbounded occupancy
  StationaryOptions stationary;
  std::vector<std::pair<double, double>> points;
  double bulk_tolerance = 0.03;
  double collar_tolerance = 0.04;
  int phase_resolution = 400;
  nlohmann::json phase_flux;  // null: model flux along the normal
  int expected_phases = -1;
  double max_distance = -1.0;  // hydro-convergence threshold at the largest N
  CouplingSpec coupling;
  int workers = 1;
  std::string output_dir = "out";
};

/// Parses and validates a JSON config. Relative file references resolve
/// against base_dir. Throws ConfigError.
ExperimentConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir = ".");
ExperimentConfig load_config(const std::filesystem::path& path);

ModelSpec parse_model(const nlohmann::json& j);
PerturbedDomain parse_domain(const nlohmann::json& j, std::string* shape = nullptr, double* width = nullptr);

/// Initial profile as a field on macroscopic positions.
MacroField initial_field(const ExperimentConfig& cfg);

/// Flux along the domain normal for the configured model.
FluxTable config_flux(const ExperimentConfig& cfg);

/// CSV table with preformatted cells.
struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  void add(std::vector<std::string> row) { rows.push_back(std::move(row)); }
};

std::string fmt(double v);
std::string fmt(long long v);

struct Report {
  std::string command;
  bool passed = true;
  nlohmann::json summary;
  std::vector<Table> tables;
};

/// 64-bit FNV-1a over the canonical config dump and seed.
std::uint64_t config_hash(const ExperimentConfig& cfg);

/// Writes <command>-<table>-<hash>.csv for every table and
/// <command>-<hash>.json for the summary; creates the directory. Returns the paths.
std::vector<std::filesystem::path> emit_report(const Report& report, const ExperimentConfig& cfg,
                                               const std::filesystem::path& out_dir);

struct ConvergenceRow {
  int N = 0;
  double t = 0.0;
  double distance = 0.0;  // L1 of the replica-averaged profile against the PDE
  double stderr_ = 0.0;   // standard error of the per-replica distances
  double mean_replica_distance = 0.0;
};

std::vector<ConvergenceRow> hydrodynamic_rows(const ExperimentConfig& cfg);

Report run_validate(const ExperimentConfig& cfg);
Report run_simulate(const ExperimentConfig& cfg);
Report run_solve(const ExperimentConfig& cfg);
Report run_hydrostatic_experiment(const ExperimentConfig& cfg);
Report run_phases(const ExperimentConfig& cfg);
Report run_coupling_audit(const ExperimentConfig& cfg);
Report run_hydrodynamic_experiment(const ExperimentConfig& cfg);

/// Builds the lattice with its two-sided reservoir for scale N.
LatticeDomain config_lattice(const ExperimentConfig& cfg, int N);

}  // namespace latgas

#endif  // LATGAS_HARNESS_HPP
