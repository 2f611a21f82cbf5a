#include "latgas/particle_models.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <vector>

#include "latgas/equilibrium.hpp"

namespace latgas {

namespace {

constexpr double kIdentityTol = 1e-10;

bool close_rel(double x, double y) {
  return std::abs(x - y) <= kIdentityTol * std::max({1.0, std::abs(x), std::abs(y)});
}

class Collector {
 public:
  Collector(ValidationReport& r, std::string name) : report_(r), name_(std::move(name)) {}
  ~Collector() {
    ValidationItem item{name_, failures_ == 0, detail_.str()};
    report_.items.push_back(std::move(item));
  }
  void fail(const std::string& what) {
    if (failures_++ < 8) detail_ << (failures_ > 1 ? "; " : "") << what;
  }

 private:
  ValidationReport& report_;
  std::string name_;
  int failures_ = 0;
  std::ostringstream detail_;
};

std::string idx(int n, int m) {
  return "(" + std::to_string(n) + "," + std::to_string(m) + ")";
}

// Every nonzero x in the unit box is reachable by positive steps of p,
// or -x is (sum_n p^{*n}(x) + p^{*n}(-x) > 0).
bool kernel_irreducible(const JumpKernel& k) {
  const int d = k.dim;
  const int radius = 4 * k.range() + 4;
  const int side = 2 * radius + 1;
  long total = 1;
  for (int i = 0; i < d; ++i) total *= side;
  auto encode = [&](const Point& x) {
    long code = 0;
    for (int i = d - 1; i >= 0; --i) code = code * side + (x(i) + radius);
    return code;
  };
  std::vector<char> seen(total, 0);
  std::vector<Point> frontier;
  for (const auto& e : k.support) {
    if (e.z.cwiseAbs().maxCoeff() <= radius && !seen[encode(e.z)]) {
      seen[encode(e.z)] = 1;
      frontier.push_back(e.z);
    }
  }
  while (!frontier.empty()) {
    Point x = frontier.back();
    frontier.pop_back();
    for (const auto& e : k.support) {
      Point y = x + e.z;
      if (y.cwiseAbs().maxCoeff() > radius) continue;
      if (!seen[encode(y)]) {
        seen[encode(y)] = 1;
        frontier.push_back(y);
      }
    }
  }
  long cube = 1;
  for (int i = 0; i < d; ++i) cube *= 3;
  for (long c = 0; c < cube; ++c) {
    Point x(d);
    long r = c;
    for (int i = 0; i < d; ++i) {
      x(i) = static_cast<int>(r % 3) - 1;
      r /= 3;
    }
    if (x.isZero()) continue;
    if (!seen[encode(x)] && !seen[encode(-x)]) return false;
  }
  return true;
}

void validate_misanthrope(const Misanthrope& m, ValidationReport& report) {
  const auto& k = m.kernel;
  {
    Collector c(report, "kernel-normalized");
    double sum = 0.0;
    for (const auto& e : k.support) {
      if (!(e.p > 0.0)) c.fail("nonpositive p at support entry");
      if (e.z.size() != k.dim) c.fail("displacement dimension mismatch");
      sum += e.p;
    }
    if (std::abs(sum - 1.0) > 1e-12) c.fail("sum p = " + std::to_string(sum));
  }
  {
    Collector c(report, "kernel-irreducible");
    if (k.support.empty() || !kernel_irreducible(k)) c.fail("support does not generate Z^d");
  }
  const auto& b = m.rates;
  const int cap = b.table_cap();
  const bool bounded = b.bounded();
  {
    Collector c(report, "empty-site-rate-zero");
    for (int mm = 0; mm <= cap; ++mm)
      if (b(0, mm) != 0.0) c.fail("b" + idx(0, mm) + " != 0");
  }
  if (bounded) {
    Collector c(report, "full-target-rate-zero");
    for (int n = 0; n <= cap; ++n)
      if (b(n, cap) != 0.0) c.fail("b" + idx(n, cap) + " != 0");
  }
  {
    Collector c(report, "positivity");
    const int mmax = bounded ? cap - 1 : cap;
    for (int n = 1; n <= cap; ++n)
      for (int mm = 0; mm <= mmax; ++mm)
        if (!(b(n, mm) > 0.0)) c.fail("b" + idx(n, mm) + " <= 0");
  }
  {
    Collector c(report, "nondecreasing-in-n");
    for (int n = 0; n < cap; ++n)
      for (int mm = 0; mm <= cap; ++mm)
        if (b(n + 1, mm) < b(n, mm) - 1e-12) c.fail("at " + idx(n, mm));
  }
  {
    Collector c(report, "nonincreasing-in-m");
    for (int n = 0; n <= cap; ++n)
      for (int mm = 0; mm < cap; ++mm)
        if (b(n, mm + 1) > b(n, mm) + 1e-12) c.fail("at " + idx(n, mm));
  }
  {
    Collector c(report, "ratio-identity");
    for (int n = 1; n <= cap; ++n)
      for (int mm = 0; mm + 1 <= cap; ++mm) {
        const double den = b(mm + 1, n - 1) * b(1, n - 1);
        if (!(den > 0.0)) continue;
        const double lhs = b(n, mm) * b(mm + 1, 0) * b(1, n - 1);
        const double rhs = b(n, 0) * b(1, mm) * b(mm + 1, n - 1);
        if (!close_rel(lhs, rhs)) c.fail("at " + idx(n, mm));
      }
  }
  {
    Collector c(report, "antisymmetry-identity");
    for (int n = 0; n <= cap; ++n)
      for (int mm = 0; mm <= cap; ++mm)
        if (!close_rel(b(n, mm) - b(mm, n), b(n, 0) - b(mm, 0))) c.fail("at " + idx(n, mm));
  }
}

void validate_overtaking(const Overtaking& o, ValidationReport& report) {
  {
    Collector c(report, "weights-shape");
    if (static_cast<int>(o.weights.size()) != 2 * o.dim) c.fail("need 2*dim direction lists");
    if (o.reach() < 1) c.fail("all weights vanish");
  }
  {
    Collector c(report, "weights-nonnegative");
    for (std::size_t a = 0; a < o.weights.size(); ++a)
      for (std::size_t j = 0; j < o.weights[a].size(); ++j)
        if (!(o.weights[a][j] >= 0.0)) c.fail(idx(static_cast<int>(a), static_cast<int>(j + 1)));
  }
  {
    Collector c(report, "weights-nonincreasing-in-j");
    for (std::size_t a = 0; a < o.weights.size(); ++a)
      for (std::size_t j = 0; j + 1 < o.weights[a].size(); ++j)
        if (o.weights[a][j + 1] > o.weights[a][j]) c.fail(idx(static_cast<int>(a), static_cast<int>(j + 2)));
  }
  {
    Collector c(report, "axis-irreducible");
    for (int i = 0; i < o.dim && 2 * i + 1 < static_cast<int>(o.weights.size()); ++i)
      if (!(o.beta(2 * i, 1) + o.beta(2 * i + 1, 1) > 0.0)) c.fail("axis " + std::to_string(i + 1));
  }
}

}  // namespace

bool ValidationReport::ok() const {
  return std::all_of(items.begin(), items.end(), [](const auto& i) { return i.passed; });
}

const ValidationItem* ValidationReport::find(const std::string& condition) const {
  for (const auto& i : items)
    if (i.condition == condition) return &i;
  return nullptr;
}

ValidationReport validate_model(const ModelSpec& model) {
  ValidationReport r;
  if (model.is_overtaking())
    validate_overtaking(model.overtaking(), r);
  else
    validate_misanthrope(model.misanthrope(), r);
  return r;
}

double bulk_rate(const Misanthrope& model, const Point& displacement, int eta_x, int eta_y) {
  const double p = model.kernel.prob(displacement);
  return p == 0.0 ? 0.0 : p * model.rates(eta_x, eta_y);
}

double bar_b_plus(const ModelSpec& model, double rho, int n) {
  const SiteMarginal th = marginal_for_density(rho, model);
  double s = 0.0;
  for (int m = 0; m <= th.k_eff(); ++m) s += th.probs(m) * model.rate(m, n);
  return s;
}

double bar_b_minus(const ModelSpec& model, int n, double rho) {
  const SiteMarginal th = marginal_for_density(rho, model);
  double s = 0.0;
  for (int m = 0; m <= th.k_eff(); ++m) s += th.probs(m) * model.rate(n, m);
  return s;
}

ReservoirRates reservoir_rates(const ModelSpec& model, double density) {
  const SiteMarginal th = marginal_for_density(density, model);
  const int top = model.capacity() != kUnbounded ? model.capacity() : model.rate_cap() + 1;
  ReservoirRates r;
  r.density = density;
  r.plus = Eigen::VectorXd::Zero(top + 1);
  r.minus = Eigen::VectorXd::Zero(top + 1);
  for (int n = 0; n <= top; ++n)
    for (int m = 0; m <= th.k_eff(); ++m) {
      r.plus(n) += th.probs(m) * model.rate(m, n);
      r.minus(n) += th.probs(m) * model.rate(n, m);
    }
  return r;
}

double overtaking_rate(const Overtaking& model, std::span<const int> ray, int direction, int j) {
  const double beta = model.beta(direction, j);
  if (beta == 0.0 || static_cast<int>(ray.size()) <= j) return 0.0;
  for (int i = 0; i < j; ++i)
    if (ray[i] == 0) return 0.0;
  return ray[j] == 0 ? beta : 0.0;
}

BoundaryRate overtaking_boundary_rate(const Overtaking& model, std::span<const double> values,
                                      std::span<const bool> inside, int direction, int j) {
  BoundaryRate out;
  if (static_cast<int>(values.size()) <= j || static_cast<int>(inside.size()) <= j) return out;
  if (inside[0] && inside[j])
    out.kind = BoundaryEvent::BulkJump;
  else if (!inside[0] && inside[j])
    out.kind = BoundaryEvent::Birth;
  else if (inside[0] && !inside[j])
    out.kind = BoundaryEvent::Death;
  else
    return out;
  double c = 1.0 - values[j];
  for (int i = 0; i < j; ++i) c *= values[i];
  out.rate = model.beta(direction, j) * c;
  return out;
}

Eigen::VectorXd microscopic_flux(const Misanthrope& model, int eta0,
                                 std::span<const int> eta_at_support) {
  Eigen::VectorXd j = Eigen::VectorXd::Zero(model.kernel.dim);
  const auto& sup = model.kernel.support;
  for (std::size_t k = 0; k < sup.size() && k < eta_at_support.size(); ++k)
    j += sup[k].z.cast<double>() * (sup[k].p * model.rates(eta0, eta_at_support[k]));
  return j;
}

Eigen::VectorXd microscopic_flux(const Overtaking& model,
                                 const std::vector<std::vector<int>>& rays) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(model.dim);
  const int reach = model.reach();
  for (int a = 0; a < model.num_directions() && a < static_cast<int>(rays.size()); ++a) {
    const Eigen::VectorXd alpha = model.direction_vector(a).cast<double>();
    for (int j = 1; j <= reach; ++j) {
      const double r = overtaking_rate(model, rays[a], a, j);
      if (r != 0.0) out += alpha * (j * r);
    }
  }
  return out;
}

}  // namespace latgas
