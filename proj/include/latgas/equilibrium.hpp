#ifndef LATGAS_EQUILIBRIUM_HPP
#define LATGAS_EQUILIBRIUM_HPP

#include <iosfwd>
#include <utility>

#include <Eigen/Dense>

#include "latgas/model_spec.hpp"

namespace latgas {

/// One-site equilibrium law theta: probabilities over 0..k_eff.
struct SiteMarginal {
  Eigen::VectorXd probs;
  Eigen::VectorXd cdf;
  double mean = 0.0;
  double beta = 0.0;

  int k_eff() const { return static_cast<int>(probs.size()) - 1; }
};

/// Joint law of (F_rho^{-1}(U), F_c^{-1}(U)).
struct CoupledMarginal {
  Eigen::MatrixXd joint;
  double left_density = 0.0;
  double right_density = 0.0;
};

/// q(n) = b(n,0) / b(1,n-1).
double fugacity_ratio(const ModelSpec& model, int n);

/// Supremum of q; +inf for bounded occupancy.
double max_chemical_potential(const ModelSpec& model);

/// theta^beta(n) proportional to beta^n / q(n)!. For bounded K, beta = +inf
/// yields delta_K. Unbounded series are cut at tail mass < 1e-14.
SiteMarginal marginal_from_beta(double beta, const ModelSpec& model);

/// Inverse of the mean map R(beta), |R(beta) - rho| < 1e-10.
double density_to_beta(double rho, const ModelSpec& model);

SiteMarginal marginal_for_density(double rho, const ModelSpec& model);

/// Generalized inverse CDF: min{n : F(n) > u}.
int sample_site(const SiteMarginal& m, double u);

CoupledMarginal coupled_marginal(double rho, double c, const ModelSpec& model);
CoupledMarginal coupled_marginal(const SiteMarginal& left, const SiteMarginal& right);

/// Monotone pair from a single uniform. Rounding in two separately
/// normalized CDFs can cross them by an ulp; the pair is clamped to the
/// order of the means so ordered laws always give ordered samples.
inline std::pair<int, int> sample_coupled(const SiteMarginal& left, const SiteMarginal& right,
                                          double u) {
  const int n = sample_site(left, u);
  const int m = sample_site(right, u);
  if (left.mean <= right.mean) return {n, n > m ? n : m};
  return {n, n < m ? n : m};
}

/// Rows "n,prob" for debugging.
void write_marginal_csv(std::ostream& os, const SiteMarginal& m);

}  // namespace latgas

#endif  // LATGAS_EQUILIBRIUM_HPP
