#ifndef LATGAS_PARTICLE_MODELS_HPP
#define LATGAS_PARTICLE_MODELS_HPP

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "latgas/model_spec.hpp"

namespace latgas {

struct ValidationItem {
  std::string condition;
  bool passed = true;
  std::string detail;  // offending indices when failed
};

struct ValidationReport {
  std::vector<ValidationItem> items;

  bool ok() const;
  const ValidationItem* find(const std::string& condition) const;
};

/// Structural hypotheses: kernel normalization and irreducibility, rate
/// boundary conditions, monotonicity, and the product-measure algebraic
/// identities (relative tolerance 1e-10).
ValidationReport validate_model(const ModelSpec& model);

/// p(y - x) b(eta(x), eta(y)).
double bulk_rate(const Misanthrope& model, const Point& displacement, int eta_x, int eta_y);

/// Reservoir-averaged entry rate sum_m theta_rho(m) b(m, n).
double bar_b_plus(const ModelSpec& model, double rho, int n);
/// Reservoir-averaged exit rate sum_m theta_rho(m) b(n, m).
double bar_b_minus(const ModelSpec& model, int n, double rho);

/// Tabulated averaged rates for one reservoir density, indexed by occupation.
struct ReservoirRates {
  double density = 0.0;
  Eigen::VectorXd plus;   // plus(n)  = bar_b_plus(density, n)
  Eigen::VectorXd minus;  // minus(n) = bar_b_minus(n, density)

  double entry(int n) const { return plus(n < plus.size() ? n : plus.size() - 1); }
  double exit(int n) const { return minus(n < minus.size() ? n : minus.size() - 1); }
};

ReservoirRates reservoir_rates(const ModelSpec& model, double density);

/// beta_j^alpha c_{x,j}^alpha(eta); ray[i] = eta(x + i alpha), i = 0..j.
double overtaking_rate(const Overtaking& model, std::span<const int> ray, int direction, int j);

enum class BoundaryEvent { None, BulkJump, Birth, Death };

struct BoundaryRate {
  double rate = 0.0;
  BoundaryEvent kind = BoundaryEvent::None;
};

/// Averaged rate along a segment touching the reservoir. values[i] holds
/// eta(x + i alpha) inside the domain and lambda_N outside; inside[i] flags
/// domain membership. i = 0..j.
BoundaryRate overtaking_boundary_rate(const Overtaking& model, std::span<const double> values,
                                      std::span<const bool> inside, int direction, int j);

/// Microscopic current sum_z z p(z) b(eta(0), eta(z)); eta_at_support is
/// listed in kernel support order.
Eigen::VectorXd microscopic_flux(const Misanthrope& model, int eta0,
                                 std::span<const int> eta_at_support);

/// Microscopic current sum_alpha sum_j j alpha beta_j c_{0,j}; rays[d] holds
/// eta(i alpha_d) for i = 0..reach.
Eigen::VectorXd microscopic_flux(const Overtaking& model,
                                 const std::vector<std::vector<int>>& rays);

}  // namespace latgas

#endif  // LATGAS_PARTICLE_MODELS_HPP
