#include "doctest.h"

#include <cmath>
#include <sstream>

#include "latgas/hydrostatics.hpp"

using namespace latgas;

namespace {

FluxTable tasep_flux() {
  return tabulate_flux([](double r) { return r * (1 - r); }, 1.0);
}

FluxTable double_hump() {
  return tabulate_flux([](double r) { return r * (1 - r) * ((r - 0.5) * (r - 0.5) + 0.02); }, 1.0);
}

// flat on [0.3, 0.4], increasing elsewhere
FluxTable plateau() {
  return tabulate_flux(
      [](double r) {
        if (r < 0.3) return r;
        if (r <= 0.4) return 0.3;
        return 0.3 + (r - 0.4);
      },
      1.0);
}

}  // namespace

TEST_CASE("phase label names") {
  for (auto l : {PhaseLabel::LD, PhaseLabel::HD, PhaseLabel::MC, PhaseLabel::mC, PhaseLabel::Coexistence,
                 PhaseLabel::DegenerateFlat})
    CHECK(parse_phase_label(to_string(l)) == l);
  CHECK_THROWS(parse_phase_label("XX"));
}

TEST_CASE("effective_endpoints") {
  const auto f = tasep_flux();
  const auto ep = effective_endpoints(f, 0.2, 0.7);
  CHECK(ep.a == 0.2);
  CHECK(ep.b == 0.7);

  const auto zero = tabulate_flux([](double) { return 0.0; }, 1.0);
  const auto ez = effective_endpoints(zero, 0.4, 0.6);
  CHECK(ez.a == 0.0);
  CHECK(ez.b == 1.0);
  CHECK(bulk_density(zero, 0.4, 0.6).label == PhaseLabel::DegenerateFlat);

  const auto ep2 = effective_endpoints(plateau(), 0.35, 0.8);
  CHECK(ep2.a == doctest::Approx(0.3).epsilon(1e-6));
  CHECK(ep2.b == 0.8);
}

TEST_CASE("bulk_density on the TASEP flux") {
  const auto f = tasep_flux();
  auto p = bulk_density(f, 0.2, 0.6);
  CHECK(p.unique);
  CHECK(p.bulk == doctest::Approx(0.2));
  CHECK(p.label == PhaseLabel::LD);
  p = bulk_density(f, 0.3, 0.9);
  CHECK(p.bulk == doctest::Approx(0.9));
  CHECK(p.label == PhaseLabel::HD);
  p = bulk_density(f, 0.8, 0.2);
  CHECK(p.bulk == doctest::Approx(0.5).epsilon(1e-7));
  CHECK(p.label == PhaseLabel::MC);
  p = bulk_density(f, 0.3, 0.7);
  CHECK_FALSE(p.unique);
  CHECK(p.label == PhaseLabel::Coexistence);
  REQUIRE(p.extremizers.size() == 2);
  CHECK(p.extremizers[0] == doctest::Approx(0.3));
  CHECK(p.extremizers[1] == doctest::Approx(0.7));
  CHECK(p.in_extremizer_set(0.7, f));
  CHECK_FALSE(p.in_extremizer_set(0.5, f));

  for (int i = 0; i <= 20; ++i) {
    const double c = i / 20.0;
    CHECK(bulk_density(f, c, c).bulk == doctest::Approx(c));
  }
}

TEST_CASE("bulk density properties on a grid") {
  const auto f = tasep_flux();
  const int n = 24;
  for (int i = 0; i <= n; ++i)
    for (int j = 0; j <= n; ++j) {
      const double la = double(i) / n, lb = double(j) / n;
      const auto p = bulk_density(f, la, lb);
      if (!p.unique) continue;
      // bulk carries the Godunov boundary flux
      CHECK(f(p.bulk) == doctest::Approx(godunov_flux(la, lb, f)).epsilon(1e-7));
      // particle-hole symmetry swaps LD and HD; (0.5, 0.5) is its own mirror
      if (i + j == n) continue;
      const auto q = bulk_density(f, 1 - lb, 1 - la);
      CHECK(q.bulk == doctest::Approx(1 - p.bulk).epsilon(1e-7));
      if (p.label == PhaseLabel::LD) CHECK(q.label == PhaseLabel::HD);
      if (p.label == PhaseLabel::HD) CHECK(q.label == PhaseLabel::LD);
      // nondecreasing in each boundary density
      if (i < n) {
        const auto r = bulk_density(f, double(i + 1) / n, lb);
        if (r.unique) CHECK(r.bulk >= p.bulk - 1e-7);
      }
      if (j < n) {
        const auto r = bulk_density(f, la, double(j + 1) / n);
        if (r.unique) CHECK(r.bulk >= p.bulk - 1e-7);
      }
    }
}

TEST_CASE("phase_diagram") {
  SUBCASE("TASEP") {
    const auto d = phase_diagram(tasep_flux(), 100, 4);
    CHECK(d.phase_count == 3);
    CHECK(d.components.at(PhaseLabel::LD) == 1);
    CHECK(d.components.at(PhaseLabel::HD) == 1);
    CHECK(d.components.at(PhaseLabel::MC) == 1);
    for (int i = 0; i < d.side; ++i)
      for (int j = 0; j < d.side; ++j) {
        const auto& p = d.at(i, j);
        if (p.label == PhaseLabel::Coexistence) {
          CHECK(p.lambda_a + p.lambda_b == doctest::Approx(1.0));
          CHECK(p.lambda_a < 0.5);
        }
      }
    CHECK(d.at(20, 80).label == PhaseLabel::Coexistence);
  }
  SUBCASE("double hump has seven phases") {
    const auto d = phase_diagram(double_hump(), 100, 4);
    CHECK(d.phase_count == 7);
    CHECK(d.components.at(PhaseLabel::LD) == 2);
    CHECK(d.components.at(PhaseLabel::HD) == 2);
    CHECK(d.components.at(PhaseLabel::MC) == 2);
    CHECK(d.components.at(PhaseLabel::mC) == 1);
  }
  SUBCASE("increasing flux has one phase") {
    const auto f = tabulate_flux([](double r) { return r / (1 + r); }, 1.0);
    const auto d = phase_diagram(f, 50);
    CHECK(d.phase_count == 1);
    for (const auto& p : d.points) CHECK(p.bulk == doctest::Approx(p.lambda_a));
  }
  SUBCASE("CSV export round-trips") {
    const auto d = phase_diagram(double_hump(), 40);
    std::stringstream ss;
    write_phase_csv(ss, d);
    const auto back = read_phase_csv(ss);
    CHECK(back.side == d.side);
    CHECK(back.phase_count == d.phase_count);
    for (std::size_t k = 0; k < d.points.size(); ++k) CHECK(back.points[k].label == d.points[k].label);
  }
  SUBCASE("region counting") {
    using L = PhaseLabel;
    const std::vector<L> grid{L::LD, L::HD, L::LD,  //
                              L::LD, L::Coexistence, L::HD,  //
                              L::MC, L::MC, L::LD};
    const auto c = count_phase_regions(grid, 3);
    CHECK(c.at(L::LD) == 3);
    CHECK(c.at(L::HD) == 2);
    CHECK(c.at(L::MC) == 1);
    CHECK(c.count(L::Coexistence) == 0);
  }
}

TEST_CASE("stationary profiles") {
  const auto f = tasep_flux();
  const auto two = build_stationary_profile(f, 0.3, 0.7, {0.0, 0.4, 1.0}, {0.3, 0.7});
  CHECK(two.value(0.2) == 0.3);
  CHECK(two.value(0.9) == 0.7);
  CHECK_THROWS_AS(build_stationary_profile(f, 0.3, 0.7, {0.0, 0.4, 1.0}, {0.7, 0.3}), std::invalid_argument);
  CHECK_THROWS_AS(build_stationary_profile(f, 0.2, 0.6, {0.0, 0.5, 1.0}, {0.2, 0.6}), std::invalid_argument);
  CHECK_NOTHROW(build_stationary_profile(f, 0.2, 0.6, {0.0, 1.0}, {0.2}));
  CHECK_THROWS(build_stationary_profile(f, 0.2, 0.6, {0.0, 1.0}, {0.4}));

  SUBCASE("two-step coexistence profile is stationary") {
    const auto chk = verify_stationary(two, f);
    CHECK(chk.audit.passed);
    CHECK(chk.drift < 0.02);
    CHECK(chk.crossing_time == doctest::Approx(1.0 / f.lipschitz));
  }
  SUBCASE("constant bulk profile") {
    const auto mc = build_stationary_profile(f, 0.8, 0.2, {0.0, 1.0}, {bulk_density(f, 0.8, 0.2).bulk});
    const auto chk = verify_stationary(mc, f);
    CHECK(chk.audit.passed);
    CHECK(chk.drift < 0.01);
  }
  SUBCASE("non-extremal constant with mismatched data") {
    StationaryProfile bad;
    bad.breakpoints = {0.0, 1.0};
    bad.values = {0.4};
    bad.lambda_a = 0.3;
    bad.lambda_b = 0.7;
    const auto chk = verify_stationary(bad, f);
    CHECK((!chk.audit.passed || chk.drift > 0.02));
  }
}

TEST_CASE("perturbed_domain_prediction") {
  const auto f = tasep_flux();
  Eigen::VectorXd n(2);
  n << 1.0, 0.0;
  const SlabDomain inner(n, 0.0, 1.0);

  SUBCASE("plain slab") {
    const auto p = perturbed_domain_prediction(f, 0.2, 0.6, as_domain(inner));
    Eigen::VectorXd x(2);
    x << 0.5, 0.5;
    CHECK(p.region(x) == DomainRegion::Inner);
    CHECK(p.band(DomainRegion::Inner).lo == doctest::Approx(0.2));
    CHECK(p.band(DomainRegion::Inner).hi == doctest::Approx(0.2));
  }
  SUBCASE("low-density collar collapses to the bulk") {
    const auto p = perturbed_domain_prediction(f, 0.2, 0.6, notched_slab(inner, -0.25, 1.0));
    Eigen::VectorXd x(2);
    x << -0.1, 0.5;
    CHECK(p.region(x) == DomainRegion::LeftCollar);
    CHECK(p.left_collar.lo == doctest::Approx(0.2));
    CHECK(p.left_collar.hi == doctest::Approx(0.2));
    x << -0.1, 0.1;
    CHECK(p.region(x) == DomainRegion::Outside);
  }
  SUBCASE("maximal-current collars") {
    const auto p = perturbed_domain_prediction(f, 0.8, 0.2, notched_slab(inner, -0.25, 1.0));
    CHECK(p.rho_star == doctest::Approx(0.5).epsilon(1e-7));
    CHECK(p.left_collar.lo == doctest::Approx(0.5).epsilon(1e-7));
    CHECK(p.left_collar.hi == doctest::Approx(0.8));
    CHECK(p.right_collar.lo == doctest::Approx(0.2));
    CHECK(p.right_collar.hi == doctest::Approx(0.5).epsilon(1e-7));
    CHECK(p.left_collar.contains(0.83, 0.04));
    CHECK_FALSE(p.left_collar.contains(0.45, 0.04));
  }
  SUBCASE("coexistence has no unique prediction") {
    CHECK_THROWS(perturbed_domain_prediction(f, 0.3, 0.7, as_domain(inner)));
  }
}
