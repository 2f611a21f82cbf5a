#include "latgas/model_spec.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace latgas {

int JumpKernel::range() const {
  int r = 0;
  for (const auto& e : support) r = std::max(r, e.z.cwiseAbs().maxCoeff());
  return r;
}

Eigen::VectorXd JumpKernel::drift() const {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(dim);
  for (const auto& e : support) g += e.p * e.z.cast<double>();
  return g;
}

double JumpKernel::prob(const Point& z) const {
  for (const auto& e : support)
    if (e.z == z) return e.p;
  return 0.0;
}

MisanthropeRates::MisanthropeRates(int capacity, Eigen::MatrixXd table)
    : capacity_(capacity), table_(std::move(table)) {
  if (table_.rows() != table_.cols() || table_.rows() < 2)
    throw std::invalid_argument("rate table must be square with at least two rows");
  if (capacity_ != kUnbounded && table_.rows() != capacity_ + 1)
    throw std::invalid_argument("rate table size must be K+1 for bounded occupancy");
}

int Overtaking::reach() const {
  int j = 0;
  for (const auto& w : weights)
    for (int k = static_cast<int>(w.size()); k >= 1; --k)
      if (w[k - 1] > 0.0) {
        j = std::max(j, k);
        break;
      }
  return j;
}

Point Overtaking::direction_vector(int direction) const {
  Point v = Point::Zero(dim);
  v(direction / 2) = (direction % 2 == 0) ? 1 : -1;
  return v;
}

int ModelSpec::dim() const {
  return is_overtaking() ? overtaking().dim : misanthrope().kernel.dim;
}

int ModelSpec::capacity() const {
  return is_overtaking() ? 1 : misanthrope().rates.capacity();
}

int ModelSpec::range() const {
  return is_overtaking() ? overtaking().reach() : misanthrope().kernel.range();
}

double ModelSpec::rate(int n, int m) const {
  if (is_overtaking()) return (n >= 1 && m == 0) ? 1.0 : 0.0;
  return misanthrope().rates(n, m);
}

int ModelSpec::rate_cap() const {
  return is_overtaking() ? 1 : misanthrope().rates.table_cap();
}

JumpKernel totally_asymmetric_kernel(int dim) {
  JumpKernel k;
  k.dim = dim;
  Point z = Point::Zero(dim);
  z(0) = 1;
  k.support.push_back({z, 1.0});
  return k;
}

ModelSpec exclusion_model(JumpKernel kernel, int capacity) {
  if (capacity < 1) throw std::invalid_argument("exclusion capacity must be >= 1");
  Eigen::MatrixXd b(capacity + 1, capacity + 1);
  for (int n = 0; n <= capacity; ++n)
    for (int m = 0; m <= capacity; ++m) b(n, m) = static_cast<double>(n * (capacity - m));
  ModelSpec s;
  s.dynamics = Misanthrope{std::move(kernel), MisanthropeRates(capacity, b)};
  s.name = capacity == 1 ? "exclusion" : "generalized-exclusion-K" + std::to_string(capacity);
  return s;
}

ModelSpec zero_range_model(JumpKernel kernel, std::vector<double> g, int working_cap) {
  if (g.empty() || g[0] != 0.0) throw std::invalid_argument("zero-range g must start with g(0)=0");
  working_cap = std::max<int>(working_cap, static_cast<int>(g.size()));
  Eigen::MatrixXd b(working_cap + 1, working_cap + 1);
  for (int n = 0; n <= working_cap; ++n) {
    const double gn = g[std::min<std::size_t>(n, g.size() - 1)];
    b.row(n).setConstant(gn);
  }
  ModelSpec s;
  s.dynamics = Misanthrope{std::move(kernel), MisanthropeRates(kUnbounded, b)};
  s.name = "zero-range";
  return s;
}

ModelSpec table_model(JumpKernel kernel, int capacity, Eigen::MatrixXd table) {
  ModelSpec s;
  s.dynamics = Misanthrope{std::move(kernel), MisanthropeRates(capacity, std::move(table))};
  s.name = "misanthrope-table";
  return s;
}

ModelSpec overtaking_model(int dim, std::vector<std::vector<double>> weights) {
  if (static_cast<int>(weights.size()) != 2 * dim)
    throw std::invalid_argument("overtaking weights need one list per direction (2*dim)");
  ModelSpec s;
  s.dynamics = Overtaking{dim, std::move(weights)};
  s.name = "overtaking";
  return s;
}

}  // namespace latgas
