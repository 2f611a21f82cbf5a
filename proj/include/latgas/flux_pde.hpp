#ifndef LATGAS_FLUX_PDE_HPP
#define LATGAS_FLUX_PDE_HPP

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "latgas/geometry.hpp"
#include "latgas/model_spec.hpp"

namespace latgas {

/// Scalar flux f on [0, upper], sampled on a uniform grid. Evaluation uses
/// the exact callable when one is attached, linear interpolation otherwise.
struct FluxTable {
  struct Extremum {
    double rho = 0.0;
    double value = 0.0;
    bool is_max = false;
  };

  Eigen::VectorXd grid;
  Eigen::VectorXd values;
  double drho = 1e-3;
  double lipschitz = 0.0;  // max |difference quotient| on the grid
  double eps_flat = 0.0;   // 1e-9 * sup |f|
  std::vector<Extremum> extrema;  // interior local extrema, refined
  std::function<double(double)> exact;

  double upper() const { return grid(grid.size() - 1); }
  double sup_abs() const { return values.cwiseAbs().maxCoeff(); }
  double operator()(double rho) const;
  /// Min (want_max = false) or max of f over [lo, hi], from the endpoints and the stored extrema.
  double extreme_on(double lo, double hi, bool want_max) const;
};

/// Tabulates f on [0, upper] with spacing drho and locates extrema with
/// parabolic refinement.
FluxTable tabulate_flux(std::function<double(double)> f, double upper, double drho = 1e-3,
                        bool keep_exact = true);

/// Piecewise-linear table through (rho, f) samples; rho must start at 0 and increase.
FluxTable flux_from_samples(const Eigen::VectorXd& rho, const Eigen::VectorXd& f);

void write_flux_csv(std::ostream& os, const FluxTable& flux);
FluxTable read_flux_csv(std::istream& is);

/// h(rho) = gamma * sum_{n,m} theta_rho(n) theta_rho(m) b(n, m).
Eigen::VectorXd misanthrope_flux(const ModelSpec& model, double rho);
/// rho(1-rho) sum_i [sum_j j (beta_j^{e_i} - beta_j^{-e_i}) rho^{j-1}] e_i.
Eigen::VectorXd overtaking_flux(const ModelSpec& model, double rho);
Eigen::VectorXd model_flux(const ModelSpec& model, double rho);

/// f = h . n tabulated on [0, K] (or [0, upper] for unbounded occupancy).
FluxTable normal_flux(const ModelSpec& model, const Eigen::VectorXd& normal, double upper = 0.0,
                      double drho = 1e-3);

/// Two-point Godunov flux: min of f on [u, v] if u <= v, max on [v, u] otherwise.
double godunov_flux(double u, double v, const FluxTable& flux);

/// Cell averages on [a, b] at time t, with boundary data and CFL number.
struct Grid1D {
  double a = 0.0;
  double b = 1.0;
  double dx = 0.0;
  double t = 0.0;
  double lambda_a = 0.0;
  double lambda_b = 0.0;
  double cfl = 0.9;
  Eigen::VectorXd u;

  int cells() const { return static_cast<int>(u.size()); }
  double center(int i) const { return a + (i + 0.5) * dx; }
  /// Piecewise-constant value at x, clamped to the end cells.
  double value(double x) const;
};

struct Snapshot {
  double t = 0.0;
  Eigen::VectorXd u;
};

/// Solver output: final state, snapshots and (optionally) every time level.
struct Trajectory {
  Grid1D initial;
  Grid1D final;
  double dt = 0.0;
  double lipschitz = 0.0;
  std::vector<double> times;               // t_0 = 0 < ... < t_end (history only)
  std::vector<Eigen::VectorXd> history;    // u at each time level
  std::vector<Snapshot> snapshots;
  double mass_balance_error = 0.0;         // |mass(T) - mass(0) - sum dt (G_in - G_out)|
  double max_principle_violation = 0.0;    // largest excursion outside the admissible band
  long steps = 0;

  /// Cell averages at time t, linear in time between stored levels.
  Eigen::VectorXd at(double t) const;
  Grid1D grid_at(double t) const;
};

struct SolveOptions {
  double dx = 1.0 / 400.0;
  double cfl = 0.9;
  std::vector<double> snapshot_times;
  bool keep_history = true;
  /// Throw std::logic_error when the discrete maximum principle fails by more than 1e-12.
  bool assert_max_principle = true;
};

using Profile1D = std::function<double(double)>;

/// Explicit Godunov scheme with ghost cells lambda_a, lambda_b and
/// dt = cfl dx / lipschitz (the last step is shortened to hit t_end).
Trajectory solve_ibvp(const Profile1D& rho0, double a, double b, double lambda_a, double lambda_b,
                      const FluxTable& flux, double t_end, const SolveOptions& options = {});

/// Same scheme from given cell averages.
Trajectory solve_ibvp(const Grid1D& start, const FluxTable& flux, double t_end,
                      const SolveOptions& options = {});

/// Piecewise-constant trajectory built from u(t, x) sampled at cell centres
/// and step midpoints, for auditing candidate solutions.
Trajectory trajectory_from_function(const std::function<double(double, double)>& u, double a, double b,
                                    double lambda_a, double lambda_b, double dx, double dt, double t_end);

/// Slab-invariant solve: f = h . n, lifted by rho(t, x) = rho_1d(t, n . x).
struct SlabSolution {
  SlabDomain slab;
  FluxTable flux;
  Trajectory trajectory;

  double value(double t, const Eigen::VectorXd& x) const;
};

/// Rejects data that vary along the slab (checked at sampled transverse offsets).
SlabSolution solve_slab(const ModelSpec& model, const SlabDomain& slab,
                        const std::function<double(const Eigen::VectorXd&)>& rho0, double lambda_a,
                        double lambda_b, double t_end, const SolveOptions& options = {}, double upper = 0.0);
SlabSolution solve_slab(const std::function<Eigen::VectorXd(double)>& h, const SlabDomain& slab,
                        const std::function<double(const Eigen::VectorXd&)>& rho0, double lambda_a,
                        double lambda_b, double t_end, double upper, const SolveOptions& options = {});

/// Tensor bump phi(t, x) = T(t) X(x), bump(s) = (1 - s^2)^2 on |s| < 1.
/// time_half_width <= 0 gives a purely spatial test function.
struct TestFunction {
  int id = 0;
  double t_center = 0.0;
  double t_half_width = 0.0;
  double x_center = 0.0;
  double x_half_width = 1.0;

  bool stationary() const { return t_half_width <= 0.0; }
};

/// Bumps covering [0, T] x [a - eps, b + eps]; time supports end by T.
std::vector<TestFunction> default_test_family(double a, double b, double t_end, bool stationary);

struct EntropyResidual {
  int sign = 1;  // +1 uses (rho - c)^+, -1 uses (c - rho)^+
  double c = 0.0;
  int phi_id = 0;
  double residual = 0.0;  // nonnegative means the inequality holds
  double tolerance = 0.0;
};

struct EntropyReport {
  std::vector<EntropyResidual> rows;
  double M = 0.0;
  double worst = 0.0;         // min residual
  double worst_margin = 0.0;  // min (residual + tolerance)
  bool stationary = false;
  bool passed = true;
  const EntropyResidual* worst_row() const;
};

struct AuditOptions {
  int num_c = 33;
  double M = 0.0;  // 0 selects 1.1 * lipschitz
  double tolerance_constant = 1.0;
  bool stationary = false;
  std::vector<TestFunction> family;  // empty selects default_test_family
  int workers = 1;
};

/// Discrete Kruzkov functional with boundary penalty M for each (sign, c, phi).
/// Time-dependent mode needs the trajectory history; stationary mode audits
/// the final state with spatial test functions only.
EntropyReport entropy_audit(const Trajectory& trajectory, const FluxTable& flux, const AuditOptions& options = {});

void write_snapshots_csv(std::ostream& os, const Trajectory& trajectory);
void write_audit_csv(std::ostream& os, const EntropyReport& report);

/// Position where cell averages cross `level` (linear between cell centres); NaN when absent.
double front_position(const Grid1D& grid, double level);

}  // namespace latgas

#endif  // LATGAS_FLUX_PDE_HPP
