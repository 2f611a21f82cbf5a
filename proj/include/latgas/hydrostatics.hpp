#ifndef LATGAS_HYDROSTATICS_HPP
#define LATGAS_HYDROSTATICS_HPP

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "latgas/flux_pde.hpp"
#include "latgas/geometry.hpp"

namespace latgas {

enum class PhaseLabel { LD, HD, MC, mC, Coexistence, DegenerateFlat };

std::string to_string(PhaseLabel label);
PhaseLabel parse_phase_label(const std::string& text);

/// Absolute tolerance deciding ties between extremizers.
inline constexpr double kTieTolerance = 1e-6;

struct EffectiveEndpoints {
  double a = 0.0;
  double b = 0.0;
};

/// Pushes each boundary density across the flat stretch of f it sits on:
/// lambda_a down and lambda_b up when lambda_a <= lambda_b, the other way otherwise.
EffectiveEndpoints effective_endpoints(const FluxTable& flux, double lambda_a, double lambda_b);

struct PhasePoint {
  double lambda_a = 0.0;
  double lambda_b = 0.0;
  double lambda_a_f = 0.0;
  double lambda_b_f = 0.0;
  bool unique = true;
  double bulk = 0.0;                 // R_f when unique
  double extremum = 0.0;             // min (or max) value of f
  std::vector<double> extremizers;   // M_f sample points (endpoints and interior extrema)
  PhaseLabel label = PhaseLabel::LD;

  /// Membership in M_f: inside the effective interval with f at the extremal value.
  bool in_extremizer_set(double rho, const FluxTable& flux) const;
};

/// Bulk density from the variational formula: argmin of f on the effective
/// interval when lambda_a <= lambda_b, argmax otherwise.
PhasePoint bulk_density(const FluxTable& flux, double lambda_a, double lambda_b);

struct PhaseDiagram {
  int resolution = 0;  // grid points per unit density
  double upper = 1.0;
  int side = 0;        // points per axis
  std::vector<PhasePoint> points;  // index i * side + j for (lambda_a_i, lambda_b_j)
  std::map<PhaseLabel, int> components;
  int phase_count = 0;  // connected regions, coexistence excluded

  const PhasePoint& at(int i, int j) const { return points[static_cast<std::size_t>(i) * side + j]; }
};

/// Classifies [0, K]^2 at spacing 1/resolution and counts 4-connected regions per label.
PhaseDiagram phase_diagram(const FluxTable& flux, int resolution = 400, int workers = 1);

/// Connected-region count per label of a side x side label grid.
std::map<PhaseLabel, int> count_phase_regions(const std::vector<PhaseLabel>& labels, int side);

void write_phase_csv(std::ostream& os, const PhaseDiagram& diagram);
/// Reads (lambda_a, lambda_b, bulk, label) rows back into a square grid and recounts.
PhaseDiagram read_phase_csv(std::istream& is);

/// Piecewise-constant profile sum_k rho_k 1_(x_k, x_{k+1}).
struct StationaryProfile {
  std::vector<double> breakpoints;  // a = x_0 < ... < x_n = b
  std::vector<double> values;       // n entries
  double lambda_a = 0.0;
  double lambda_b = 0.0;

  double a() const { return breakpoints.front(); }
  double b() const { return breakpoints.back(); }
  double value(double x) const;
};

/// Validates that every value lies in M_f and that the sequence is monotone
/// in the f-order; throws std::invalid_argument otherwise.
StationaryProfile build_stationary_profile(const FluxTable& flux, double lambda_a, double lambda_b,
                                           std::vector<double> breakpoints, std::vector<double> values);

struct StationaryCheck {
  EntropyReport audit;
  double drift = 0.0;          // L1 distance after one crossing time
  double crossing_time = 0.0;  // (b - a) / lipschitz
};

struct StationaryCheckOptions {
  double dx = 1.0 / 400.0;
  double cfl = 0.9;
  double M = 0.0;  // 0 selects 1.1 * lipschitz
};

/// Stationary entropy audit of the profile plus L1 drift under the evolution.
StationaryCheck verify_stationary(const StationaryProfile& profile, const FluxTable& flux,
                                  const StationaryCheckOptions& options = {});

/// Closed density interval I[lo, hi] (endpoints sorted).
struct DensityBand {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double v, double tol = 0.0) const { return v >= lo - tol && v <= hi + tol; }
};

enum class DomainRegion { Outside, Inner, LeftCollar, RightCollar };

struct DomainPrediction {
  PhasePoint point;
  double rho_star = 0.0;
  DensityBand inner;
  DensityBand left_collar;   // I[lambda_a^f, rho*], collapsed to rho* when rho* = lambda_a
  DensityBand right_collar;  // I[rho*, lambda_b^f], collapsed to rho* when rho* = lambda_b
  PerturbedDomain domain;

  DomainRegion region(const Eigen::VectorXd& x) const;
  const DensityBand& band(DomainRegion r) const;
};

/// Region-wise bulk predictions on a domain sandwiched between two slabs.
/// Requires a unique R_f.
DomainPrediction perturbed_domain_prediction(const FluxTable& flux, double lambda_a, double lambda_b,
                                             const PerturbedDomain& domain);

}  // namespace latgas

#endif  // LATGAS_HYDROSTATICS_HPP
