#include "latgas/geometry.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace latgas {

SlabDomain::SlabDomain(Eigen::VectorXd n, double lo, double hi) : normal(std::move(n)), a(lo), b(hi) {
  if (std::abs(normal.norm() - 1.0) > 1e-9) throw std::invalid_argument("slab normal must be a unit vector");
  if (!(a < b)) throw std::invalid_argument("slab requires a < b");
}

bool SlabDomain::contains(const Eigen::VectorXd& x) const {
  const double s = normal.dot(x);
  return s > a && s < b;
}

PerturbedDomain as_domain(const SlabDomain& slab) {
  PerturbedDomain d;
  d.inner = slab;
  d.a_outer = slab.a;
  d.b_outer = slab.b;
  d.contains = [slab](const Eigen::VectorXd& x) { return slab.contains(x); };
  d.name = "slab";
  return d;
}

namespace {

int transverse_axis(const SlabDomain& s) {
  for (int i = 0; i < s.dim(); ++i)
    if (std::abs(s.normal(i)) < 0.5) return i;
  return -1;
}

}  // namespace

PerturbedDomain notched_slab(const SlabDomain& inner, double a_outer, double width) {
  if (inner.dim() < 2) throw std::invalid_argument("notched slab needs d >= 2");
  if (!(a_outer <= inner.a)) throw std::invalid_argument("notch depth must satisfy a' <= a");
  const int t = transverse_axis(inner);
  PerturbedDomain d;
  d.inner = inner;
  d.a_outer = a_outer;
  d.b_outer = inner.b;
  d.contains = [inner, a_outer, width, t](const Eigen::VectorXd& x) {
    if (inner.contains(x)) return true;
    const double s = inner.normal.dot(x);
    const double y = x(t) - width * std::floor(x(t) / width);
    return s > a_outer && s <= inner.a && y > 0.25 * width && y < 0.75 * width;
  };
  d.name = "notched";
  return d;
}

PerturbedDomain bumped_slab(const SlabDomain& inner, double a_outer, double width) {
  if (inner.dim() < 2) throw std::invalid_argument("bumped slab needs d >= 2");
  if (!(a_outer <= inner.a)) throw std::invalid_argument("bump depth must satisfy a' <= a");
  const int t = transverse_axis(inner);
  PerturbedDomain d;
  d.inner = inner;
  d.a_outer = a_outer;
  d.b_outer = inner.b;
  d.contains = [inner, a_outer, width, t](const Eigen::VectorXd& x) {
    const double s = inner.normal.dot(x);
    const double bump = std::sin(std::numbers::pi * x(t) / width);
    return s > inner.a - (inner.a - a_outer) * bump * bump && s < inner.b;
  };
  d.name = "bumped";
  return d;
}

int LatticeDomain::locate(const Point& x) const {
  long index = 0;
  long stride = 1;
  for (int i = 0; i < dim_; ++i) {
    int c = x(i) - lo_[i];
    if (i != normal_axis_) {
      c %= period_;
      if (c < 0) c += period_;
    } else if (c < 0 || c >= extent_[i]) {
      return -1;
    }
    index += stride * c;
    stride *= extent_[i];
  }
  return codes_[index];
}

LatticeDomain discretize(const PerturbedDomain& domain, int N, int range, double width) {
  if (N < 2) throw std::invalid_argument("scaling parameter N must be >= 2");
  if (range < 1) throw std::invalid_argument("interaction range must be >= 1");
  const SlabDomain& slab = domain.inner;
  const int d = slab.dim();
  int axis = -1;
  for (int i = 0; i < d; ++i)
    if (std::abs(std::abs(slab.normal(i)) - 1.0) < 1e-12) axis = i;
  if (axis < 0) throw std::invalid_argument("lattice discretization needs an axis-aligned normal");
  const double sign = slab.normal(axis);

  LatticeDomain L;
  L.dim_ = d;
  L.scale_ = N;
  L.range_ = range;
  L.normal_axis_ = axis;
  L.width_ = width;
  L.domain_ = domain;
  L.period_ = d > 1 ? std::max(1, static_cast<int>(std::lround(width * N))) : 0;
  L.lo_.assign(d, 0);
  L.extent_.assign(d, 0);
  const double lo_macro = sign > 0 ? domain.a_outer : -domain.b_outer;
  const double hi_macro = sign > 0 ? domain.b_outer : -domain.a_outer;
  const int lo = static_cast<int>(std::floor(lo_macro * N)) - range - 1;
  const int hi = static_cast<int>(std::ceil(hi_macro * N)) + range + 1;
  for (int i = 0; i < d; ++i) {
    if (i == axis) {
      L.lo_[i] = lo;
      L.extent_[i] = hi - lo + 1;
    } else {
      L.extent_[i] = L.period_;
    }
  }
  long total = 1;
  for (int e : L.extent_) total *= e;

  auto point_of = [&](long index) {
    Point x(d);
    for (int i = 0; i < d; ++i) {
      x(i) = static_cast<int>(index % L.extent_[i]) + L.lo_[i];
      index /= L.extent_[i];
    }
    return x;
  };

  std::vector<char> inside(total, 0);
  for (long idx = 0; idx < total; ++idx) {
    const Eigen::VectorXd pos = point_of(idx).cast<double>() / N;
    inside[idx] = domain.contains(pos) ? 1 : 0;
  }

  L.codes_.assign(total, -1);
  for (long idx = 0; idx < total; ++idx)
    if (inside[idx]) {
      L.codes_[idx] = static_cast<int>(L.slot_coords_.size());
      L.slot_coords_.push_back(point_of(idx));
    }
  L.num_sites_ = static_cast<int>(L.slot_coords_.size());
  if (L.num_sites_ == 0) throw std::invalid_argument("discretized domain has empty interior");

  // Sup-norm ball offsets.
  long ball = 1;
  for (int i = 0; i < d; ++i) ball *= 2 * range + 1;
  std::vector<char> shell(total, 0);
  for (int s = 0; s < L.num_sites_; ++s) {
    for (long o = 0; o < ball; ++o) {
      Point x = L.slot_coords_[s];
      long r = o;
      for (int i = 0; i < d; ++i) {
        x(i) += static_cast<int>(r % (2 * range + 1)) - range;
        r /= 2 * range + 1;
      }
      long index = 0;
      long stride = 1;
      bool ok = true;
      for (int i = 0; i < d; ++i) {
        int c = x(i) - L.lo_[i];
        if (i != axis) {
          c %= L.period_;
          if (c < 0) c += L.period_;
        } else if (c < 0 || c >= L.extent_[i]) {
          ok = false;
          break;
        }
        index += stride * c;
        stride *= L.extent_[i];
      }
      if (ok && !inside[index]) shell[index] = 1;
    }
  }
  for (long idx = 0; idx < total; ++idx)
    if (shell[idx]) {
      L.codes_[idx] = static_cast<int>(L.slot_coords_.size());
      L.slot_coords_.push_back(point_of(idx));
    }
  L.reservoir_ = Eigen::VectorXd::Zero(L.num_shell());
  return L;
}

LatticeDomain discretize(const SlabDomain& domain, int N, int range, double width) {
  return discretize(as_domain(domain), N, range, width);
}

void reservoir_from_profile(LatticeDomain& lattice,
                            const std::function<double(const Eigen::VectorXd&)>& lambda,
                            double capacity) {
  Eigen::VectorXd v(lattice.num_shell());
  for (int k = 0; k < lattice.num_shell(); ++k) {
    const double val = lambda(lattice.position(lattice.num_sites() + k));
    if (!(val >= 0.0) || (capacity >= 0 && val > capacity))
      throw std::domain_error("reservoir density outside [0, K]");
    v(k) = val;
  }
  lattice.set_reservoir(std::move(v));
}

void two_sided_reservoir(LatticeDomain& lattice, double lambda_a, double lambda_b, double capacity) {
  const PerturbedDomain& dom = lattice.domain();
  reservoir_from_profile(
      lattice,
      [&](const Eigen::VectorXd& x) { return dom.on_left_boundary(x) ? lambda_a : lambda_b; },
      capacity);
}

}  // namespace latgas
