#ifndef LATGAS_GEOMETRY_HPP
#define LATGAS_GEOMETRY_HPP

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "latgas/model_spec.hpp"

namespace latgas {

/// Open slab {x : a < n.x < b}.
struct SlabDomain {
  Eigen::VectorXd normal;
  double a = 0.0;
  double b = 1.0;

  SlabDomain() = default;
  SlabDomain(Eigen::VectorXd n, double lo, double hi);
  int dim() const { return static_cast<int>(normal.size()); }
  bool contains(const Eigen::VectorXd& x) const;
};

/// Projection n.x used to reduce slab problems to one dimension.
inline double slab_coordinates(const SlabDomain& domain, const Eigen::VectorXd& x) {
  return domain.normal.dot(x);
}

/// Domain sandwiched between the inner slab (a, b) and the outer slab (a', b').
/// Transverse coordinates passed to `contains` live in [0, W).
struct PerturbedDomain {
  SlabDomain inner;
  double a_outer = 0.0;
  double b_outer = 1.0;
  std::function<bool(const Eigen::VectorXd&)> contains;
  std::string name;

  /// n.x <= a side versus n.x >= b side of the boundary.
  bool on_left_boundary(const Eigen::VectorXd& x) const {
    return slab_coordinates(inner, x) < 0.5 * (inner.a + inner.b);
  }
};

PerturbedDomain as_domain(const SlabDomain& slab);

/// Slab whose left boundary carries a rectangular protrusion of depth
/// a - a_outer over the transverse band (W/4, 3W/4). Requires d >= 2.
PerturbedDomain notched_slab(const SlabDomain& inner, double a_outer, double width);

/// Slab whose left boundary bulges sinusoidally down to a_outer.
PerturbedDomain bumped_slab(const SlabDomain& inner, double a_outer, double width);

/// Lattice discretization Omega_N = {x in Z^d : x/N in Omega}, its reservoir
/// shell {x not in Omega_N : |x - y| <= range for some y in Omega_N} and the
/// reservoir field lambda_N on the shell. Axes orthogonal to the normal are
/// periodic with period round(W N).
///
/// Sites and shell share one slot numbering: slots [0, num_sites()) are
/// domain sites, [num_sites(), num_slots()) shell sites.
class LatticeDomain {
 public:
  int dim() const { return dim_; }
  int scale() const { return scale_; }
  int range() const { return range_; }
  int normal_axis() const { return normal_axis_; }
  int num_sites() const { return num_sites_; }
  int num_shell() const { return static_cast<int>(slot_coords_.size()) - num_sites_; }
  int num_slots() const { return static_cast<int>(slot_coords_.size()); }
  bool is_site(int slot) const { return slot >= 0 && slot < num_sites_; }
  bool is_shell(int slot) const { return slot >= num_sites_; }

  const Point& coords(int slot) const { return slot_coords_[slot]; }
  /// Macroscopic position x/N.
  Eigen::VectorXd position(int slot) const { return coords(slot).cast<double>() / scale_; }
  /// Slot of a lattice point (transverse axes wrapped), or -1.
  int locate(const Point& x) const;
  /// Slot of coords(slot) + z, or -1.
  int shifted(int slot, const Point& z) const { return locate(coords(slot) + z); }

  const Eigen::VectorXd& reservoir() const { return reservoir_; }
  /// Reservoir density at a shell slot.
  double reservoir_at(int slot) const { return reservoir_(slot - num_sites_); }
  void set_reservoir(Eigen::VectorXd values) { reservoir_ = std::move(values); }
  /// Transverse period in lattice units (0 for d = 1).
  int period() const { return period_; }
  double transverse_width() const { return width_; }
  const PerturbedDomain& domain() const { return domain_; }

 private:
  friend LatticeDomain discretize(const PerturbedDomain&, int, int, double);

  int dim_ = 1;
  int scale_ = 2;
  int range_ = 1;
  int normal_axis_ = 0;
  int period_ = 0;
  double width_ = 1.0;
  std::vector<int> lo_;      // box origin per axis
  std::vector<int> extent_;  // box size per axis
  std::vector<int> codes_;   // box index -> slot or -1
  std::vector<Point> slot_coords_;
  int num_sites_ = 0;
  Eigen::VectorXd reservoir_;
  PerturbedDomain domain_;
};

/// Builds Omega_N and its shell. The normal must be a signed coordinate axis.
LatticeDomain discretize(const PerturbedDomain& domain, int N, int range, double width = 1.0);
LatticeDomain discretize(const SlabDomain& domain, int N, int range, double width = 1.0);

/// lambda_N(x) = lambda(x / N) on the shell; values checked against [0, K].
void reservoir_from_profile(LatticeDomain& lattice,
                            const std::function<double(const Eigen::VectorXd&)>& lambda,
                            double capacity);

/// Two-valued datum: lambda_a on the n.x <= a component, lambda_b on the other.
void two_sided_reservoir(LatticeDomain& lattice, double lambda_a, double lambda_b, double capacity);

}  // namespace latgas

#endif  // LATGAS_GEOMETRY_HPP
