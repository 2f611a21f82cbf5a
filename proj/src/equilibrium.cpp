#include "latgas/equilibrium.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <vector>

namespace latgas {

namespace {

constexpr double kTailMass = 1e-14;
constexpr int kMaxSeriesTerms = 5'000'000;

double log_add(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

SiteMarginal from_log_weights(const std::vector<double>& lw, double beta) {
  const double top = *std::max_element(lw.begin(), lw.end());
  const int n = static_cast<int>(lw.size());
  SiteMarginal m;
  m.beta = beta;
  m.probs.resize(n);
  for (int i = 0; i < n; ++i) m.probs(i) = std::exp(lw[i] - top);
  m.probs /= m.probs.sum();
  m.cdf.resize(n);
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    acc += m.probs(i);
    m.cdf(i) = std::min(acc, 1.0);
  }
  m.cdf(n - 1) = 1.0;
  m.mean = m.probs.dot(Eigen::VectorXd::LinSpaced(n, 0.0, n - 1.0));
  return m;
}

SiteMarginal dirac(int n, double beta) {
  SiteMarginal m;
  m.beta = beta;
  m.probs = Eigen::VectorXd::Zero(n + 1);
  m.probs(n) = 1.0;
  m.cdf = Eigen::VectorXd::Zero(n + 1);
  m.cdf(n) = 1.0;
  m.mean = n;
  return m;
}

}  // namespace

double fugacity_ratio(const ModelSpec& model, int n) {
  const double den = model.rate(1, n - 1);
  if (!(den > 0.0)) throw std::domain_error("b(1, n-1) must be positive to define q(n)");
  return model.rate(n, 0) / den;
}

double max_chemical_potential(const ModelSpec& model) {
  if (model.capacity() != kUnbounded) return std::numeric_limits<double>::infinity();
  double q = 0.0;
  for (int n = 1; n <= model.rate_cap() + 1; ++n) q = std::max(q, fugacity_ratio(model, n));
  return q;
}

SiteMarginal marginal_from_beta(double beta, const ModelSpec& model) {
  if (!(beta >= 0.0)) throw std::domain_error("chemical potential must be nonnegative");
  if (beta == 0.0) return dirac(0, 0.0);
  const int K = model.capacity();
  if (K != kUnbounded) {
    if (std::isinf(beta)) return dirac(K, beta);
    std::vector<double> lw(K + 1, 0.0);
    const double lb = std::log(beta);
    for (int n = 1; n <= K; ++n) lw[n] = lw[n - 1] + lb - std::log(fugacity_ratio(model, n));
    return from_log_weights(lw, beta);
  }

  const double qsup = max_chemical_potential(model);
  if (!(beta < qsup)) throw std::domain_error("chemical potential outside [0, q(inf)): divergent normalizer");
  const double lb = std::log(beta);
  const double ratio = beta / qsup;
  const double log_tail_factor = std::log(ratio / (1.0 - ratio));
  const int settled = model.rate_cap() + 1;  // q(n) constant beyond this index
  std::vector<double> lw{0.0};
  double log_z = 0.0;
  for (int n = 1;; ++n) {
    if (n > kMaxSeriesTerms) throw std::domain_error("normalizer series does not settle");
    const double next = lw.back() + lb - std::log(fugacity_ratio(model, n));
    lw.push_back(next);
    log_z = log_add(log_z, next);
    if (n >= settled && next + log_tail_factor - log_z < std::log(kTailMass)) break;
  }
  return from_log_weights(lw, beta);
}

double density_to_beta(double rho, const ModelSpec& model) {
  if (!(rho >= -1e-12)) throw std::domain_error("density below zero");
  if (rho <= 0.0) return 0.0;
  const int K = model.capacity();
  auto mean_at = [&](double b) { return marginal_from_beta(b, model).mean; };

  double lo = 0.0;
  double hi = 0.0;
  if (K != kUnbounded) {
    if (rho > K + 1e-12) throw std::domain_error("density above the occupancy cap");
    if (rho >= K - 1e-13) return std::numeric_limits<double>::infinity();
    hi = 1.0;
    while (mean_at(hi) <= rho) {
      lo = hi;
      hi *= 2.0;
      if (hi > 1e300) throw std::domain_error("density not reachable");
    }
  } else {
    const double qs = max_chemical_potential(model);
    int k = 1;
    hi = 0.5 * qs;
    while (mean_at(hi) <= rho) {
      lo = hi;
      ++k;
      if (k > 48) throw std::domain_error("density outside achievable range");
      hi = qs * (1.0 - std::ldexp(1.0, -k));
    }
  }
  double mid = 0.5 * (lo + hi);
  for (int it = 0; it < 400; ++it) {
    mid = 0.5 * (lo + hi);
    const double r = mean_at(mid);
    if (std::abs(r - rho) < 1e-13) break;
    (r < rho ? lo : hi) = mid;
    if (hi - lo <= 1e-16 * hi) break;
  }
  if (std::abs(mean_at(mid) - rho) >= 1e-10) throw std::domain_error("density inversion did not converge");
  return mid;
}

SiteMarginal marginal_for_density(double rho, const ModelSpec& model) {
  return marginal_from_beta(density_to_beta(rho, model), model);
}

int sample_site(const SiteMarginal& m, double u) {
  u = std::clamp(u, 0.0, 1.0);
  const double* first = m.cdf.data();
  const double* last = first + m.cdf.size();
  const double* it = std::upper_bound(first, last, u);
  if (it == last) return m.k_eff();
  return static_cast<int>(it - first);
}

CoupledMarginal coupled_marginal(const SiteMarginal& left, const SiteMarginal& right) {
  std::vector<double> cuts{0.0, 1.0};
  for (int i = 0; i < left.cdf.size(); ++i) cuts.push_back(left.cdf(i));
  for (int i = 0; i < right.cdf.size(); ++i) cuts.push_back(right.cdf(i));
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  CoupledMarginal c;
  c.left_density = left.mean;
  c.right_density = right.mean;
  c.joint = Eigen::MatrixXd::Zero(left.probs.size(), right.probs.size());
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double width = cuts[i + 1] - cuts[i];
    if (width <= 0.0 || cuts[i] >= 1.0) continue;
    const double mid = 0.5 * (cuts[i] + cuts[i + 1]);
    const auto [n, m] = sample_coupled(left, right, mid);
    c.joint(n, m) += width;
  }
  return c;
}

CoupledMarginal coupled_marginal(double rho, double c, const ModelSpec& model) {
  auto out = coupled_marginal(marginal_for_density(rho, model), marginal_for_density(c, model));
  out.left_density = rho;
  out.right_density = c;
  return out;
}

void write_marginal_csv(std::ostream& os, const SiteMarginal& m) {
  os << "n,prob\n";
  char buf[64];
  for (int n = 0; n < m.probs.size(); ++n) {
    std::snprintf(buf, sizeof buf, "%d,%.17g\n", n, m.probs(n));
    os << buf;
  }
}

}  // namespace latgas
