#ifndef LATGAS_SIMULATOR_HPP
#define LATGAS_SIMULATOR_HPP

#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "latgas/geometry.hpp"
#include "latgas/model_spec.hpp"
#include "latgas/particle_models.hpp"
#include "latgas/rng.hpp"

namespace latgas {

using MacroField = std::function<double(const Eigen::VectorXd&)>;

/// Configuration on Omega_N with macroscopic clock t = (process time) / N.
struct SimState {
  std::vector<int> eta;
  double t_macro = 0.0;
  Rng rng;
};

struct CoupledState {
  std::vector<int> eta;
  std::vector<int> xi;
  double t_macro = 0.0;
  Rng rng;
};

struct EventLedger {
  std::uint64_t events = 0;
  std::uint64_t jumps = 0;
  std::uint64_t births = 0;
  std::uint64_t deaths = 0;
};

struct CoupledLedger {
  std::uint64_t events = 0;
  std::uint64_t joint = 0;
  std::uint64_t eta_only = 0;
  std::uint64_t xi_only = 0;
  std::int64_t eta_net_births = 0;
  std::int64_t xi_net_births = 0;
  std::uint64_t order_violations = 0;
};

/// A particle move between slots; a shell endpoint makes it a birth or death.
struct Move {
  int from = -1;
  int to = -1;
};

/// Called before each event with the pre-event state, the move and the
/// holding time spent in that state.
using EventObserver = std::function<void(const std::vector<int>& eta, const Move& move, double holding)>;

class OrderViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Open-boundary process on a lattice domain: bulk jumps with rates
/// p(y-x) b(eta(x), eta(y)), births and deaths with reservoir-averaged rates
/// (overtaking: segment-averaged rates). Exact continuous-time simulation.
class OpenSystem {
 public:
  /// closed = true drops every reservoir event (reflecting walls).
  OpenSystem(ModelSpec model, LatticeDomain lattice, bool closed = false);
  ~OpenSystem();
  OpenSystem(OpenSystem&&) noexcept;
  OpenSystem& operator=(OpenSystem&&) noexcept;

  const ModelSpec& model() const;
  const LatticeDomain& lattice() const;

  /// Product measure with site marginals theta_{rho0(x/N)}.
  SimState init_from_profile(const MacroField& rho0, std::uint64_t seed) const;

  /// Advances until macroscopic time t_end (or max_events events).
  void run(SimState& state, double t_end, EventLedger* ledger = nullptr,
           std::uint64_t max_events = std::numeric_limits<std::uint64_t>::max(),
           const EventObserver* observer = nullptr) const;

  /// Total event rate of a configuration.
  double total_rate(const std::vector<int>& eta) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Basic coupling of an eta-process (reservoir lambda_N from the lattice)
/// with a xi-process whose reservoir is uniform at density c.
class CoupledSystem {
 public:
  CoupledSystem(ModelSpec model, LatticeDomain lattice, double xi_reservoir);
  ~CoupledSystem();
  CoupledSystem(CoupledSystem&&) noexcept;
  CoupledSystem& operator=(CoupledSystem&&) noexcept;

  const ModelSpec& model() const;
  const LatticeDomain& lattice() const;
  double xi_reservoir() const;

  /// Sites drawn from the monotone coupling of theta_{rho_eta(x)} and
  /// theta_{rho_xi(x)}; ordered profiles give ordered configurations.
  CoupledState init_coupled(const MacroField& rho_eta, const MacroField& rho_xi,
                            std::uint64_t seed) const;

  /// check_order: count sites with eta > xi after every event; with
  /// throw_on_violation an OrderViolation is raised at the first one.
  void run(CoupledState& state, double t_end, CoupledLedger* ledger = nullptr,
           std::uint64_t max_events = std::numeric_limits<std::uint64_t>::max(),
           bool check_order = false, bool throw_on_violation = false) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Block averages over cells of width delta along the slab normal, on [a, b].
struct DensityProfile {
  double origin = 0.0;
  double cell_width = 0.0;
  Eigen::VectorXd values;
  Eigen::VectorXd stderr_;

  int cells() const { return static_cast<int>(values.size()); }
  double center(int i) const { return origin + (i + 0.5) * cell_width; }
};

DensityProfile empirical_density(const LatticeDomain& lattice, const std::vector<int>& eta,
                                 double cell_width);

/// Mean occupation over sites whose macroscopic position satisfies `region`.
double region_density(const LatticeDomain& lattice, const std::vector<int>& eta,
                      const std::function<bool(const Eigen::VectorXd&)>& region);

/// N^{-d} sum_x phi(x/N) (eta(x) - xi(x))^{+/-}; sign > 0 selects the
/// positive part.
double kruzkov_monitor(const LatticeDomain& lattice, const std::vector<int>& eta,
                       const std::vector<int>& xi, const MacroField& phi, int sign);

/// Observable of a configuration, evaluated during stationary sampling.
using Observable = std::function<double(const LatticeDomain&, const std::vector<int>&)>;

struct StationaryOptions {
  double burn_in = 4.0;
  double horizon = 12.0;
  double sample_dt = 0.05;
  int replicas = 4;
  std::uint64_t seed = 1;
  double cell_width = 0.02;
  int workers = 1;
  std::vector<Observable> observables;
};

struct StationaryEstimate {
  DensityProfile profile;  // time-and-replica mean with replica standard errors
  double bulk = 0.0;       // central-third mean
  double bulk_stderr = 0.0;
  bool nonstationary = false;
  std::vector<double> observable_mean;
  std::vector<double> observable_stderr;
};

StationaryEstimate stationary_profile(const OpenSystem& system, const MacroField& rho0,
                                      const StationaryOptions& options);

/// Translated local function: g receives an accessor offset -> eta([N x] + offset).
using LocalFunction = std::function<double(const std::function<int(const Point&)>&)>;

Observable local_observable(const LocalFunction& g, const Eigen::VectorXd& x);

/// Time average of g(tau_{[Nx]} eta) under the stationary dynamics.
double local_equilibrium_probe(const OpenSystem& system, const MacroField& rho0,
                               const LocalFunction& g, const Eigen::VectorXd& x,
                               StationaryOptions options, double* stderr_out = nullptr);

/// Exact expectation of g under the product of theta_rho over `window`.
double product_expectation(const LocalFunction& g, const std::vector<Point>& window,
                           double rho, const ModelSpec& model);

}  // namespace latgas

#endif  // LATGAS_SIMULATOR_HPP
