#include "doctest.h"

#include <array>
#include <vector>

#include "latgas/particle_models.hpp"

using namespace latgas;

namespace {

Point pt(int x) {
  Point p(1);
  p << x;
  return p;
}

ModelSpec sep() { return exclusion_model(totally_asymmetric_kernel(), 1); }

ModelSpec zrp(std::vector<double> g = {0.0, 1.0}) {
  return zero_range_model(totally_asymmetric_kernel(), std::move(g));
}

}  // namespace

TEST_CASE("validate_model") {
  CHECK(validate_model(sep()).ok());
  CHECK(validate_model(exclusion_model(totally_asymmetric_kernel(), 3)).ok());
  CHECK(validate_model(zrp({0.0, 1.0, 1.5, 1.75})).ok());
  CHECK(validate_model(overtaking_model(1, {{2.0, 1.0}, {}})).ok());

  SUBCASE("b = n + m fails monotonicity in the target") {
    Eigen::MatrixXd b(3, 3);
    for (int n = 0; n < 3; ++n)
      for (int m = 0; m < 3; ++m) b(n, m) = n == 0 ? 0.0 : n + m;
    const auto r = validate_model(table_model(totally_asymmetric_kernel(), kUnbounded, b));
    CHECK_FALSE(r.ok());
    REQUIRE(r.find("nonincreasing-in-m") != nullptr);
    CHECK_FALSE(r.find("nonincreasing-in-m")->passed);
    CHECK(r.find("nonincreasing-in-m")->detail.find("(1,0)") != std::string::npos);
  }
  SUBCASE("overtaking weights must decrease in j") {
    const auto r = validate_model(overtaking_model(1, {{1.0, 2.0}, {}}));
    CHECK_FALSE(r.find("weights-nonincreasing-in-j")->passed);
  }
  SUBCASE("every axis needs a nearest-neighbour weight") {
    const auto r = validate_model(overtaking_model(2, {{1.0}, {}, {}, {}}));
    CHECK_FALSE(r.find("axis-irreducible")->passed);
  }
  SUBCASE("kernel on a sublattice is reducible") {
    JumpKernel k;
    k.support.push_back({pt(2), 1.0});
    const auto r = validate_model(exclusion_model(k, 1));
    CHECK_FALSE(r.find("kernel-irreducible")->passed);
  }
}

TEST_CASE("bulk_rate") {
  const auto model = sep();
  const auto& m = model.misanthrope();
  CHECK(bulk_rate(m, pt(1), 1, 0) == 1.0);
  CHECK(bulk_rate(m, pt(1), 0, 0) == 0.0);
  CHECK(bulk_rate(m, pt(-1), 1, 0) == 0.0);
  const auto z = zrp();
  CHECK(bulk_rate(z.misanthrope(), pt(1), 3, 5) == 1.0);
}

TEST_CASE("reservoir-averaged rates") {
  const auto s = sep();
  for (double lam : {0.0, 0.25, 0.6, 1.0})
    for (int n : {0, 1}) {
      CHECK(bar_b_plus(s, lam, n) == doctest::Approx(lam * (1 - n)).epsilon(1e-12));
      CHECK(bar_b_minus(s, n, lam) == doctest::Approx(n * (1 - lam)).epsilon(1e-12));
    }
  const auto z = zrp({0.0, 1.0, 1.5});
  for (double lam : {0.2, 1.0, 3.0}) {
    CHECK(bar_b_minus(z, 0, lam) == 0.0);
    CHECK(bar_b_minus(z, 1, lam) == doctest::Approx(1.0));
    CHECK(bar_b_minus(z, 4, lam) == doctest::Approx(1.5));
  }
  CHECK(bar_b_plus(z, 0.0, 2) == 0.0);

  SUBCASE("monotone in density and occupation") {
    const auto k3 = exclusion_model(totally_asymmetric_kernel(), 3);
    for (const auto& model : {s, k3, z}) {
      const int top = model.capacity() == kUnbounded ? 5 : model.capacity();
      const double rmax = model.capacity() == kUnbounded ? 3.0 : model.capacity();
      for (int i = 0; i < 20; ++i) {
        const double r0 = rmax * i / 20.0, r1 = rmax * (i + 1) / 20.0;
        for (int n = 0; n <= top; ++n) {
          CHECK(bar_b_plus(model, r1, n) >= bar_b_plus(model, r0, n) - 1e-12);
          CHECK(bar_b_minus(model, n, r1) <= bar_b_minus(model, n, r0) + 1e-12);
          if (n < top) {
            CHECK(bar_b_plus(model, r0, n + 1) <= bar_b_plus(model, r0, n) + 1e-12);
            CHECK(bar_b_minus(model, n + 1, r0) >= bar_b_minus(model, n, r0) - 1e-12);
          }
        }
      }
    }
  }
  SUBCASE("tables agree with pointwise evaluation") {
    const auto t = reservoir_rates(s, 0.35);
    CHECK(t.entry(0) == doctest::Approx(0.35));
    CHECK(t.exit(1) == doctest::Approx(0.65));
    CHECK(t.entry(1) == 0.0);
  }
}

TEST_CASE("overtaking_rate") {
  const Overtaking o{1, {{2.0, 1.0}, {}}};
  const std::array<int, 3> ray{1, 1, 0};
  CHECK(overtaking_rate(o, ray, 0, 2) == 1.0);
  CHECK(overtaking_rate(o, ray, 0, 1) == 0.0);
  const std::array<int, 3> empty{0, 0, 0};
  CHECK(overtaking_rate(o, empty, 0, 1) == 0.0);
  const std::array<int, 2> hop{1, 0};
  CHECK(overtaking_rate(o, hop, 0, 1) == 2.0);
  CHECK(overtaking_rate(o, hop, 1, 1) == 0.0);
}

TEST_CASE("overtaking_boundary_rate on the one-dimensional segment") {
  const double b1 = 2.0, b2 = 1.0, lam_l = 0.3, lam_r = 0.6;
  const Overtaking o{1, {{b1, b2}, {}}};
  for (int eta1 : {0, 1}) {
    // birth at site 1 from x = 0 (j = 1) and x = -1 (j = 2)
    const std::array<double, 2> v1{lam_l, double(eta1)};
    const std::array<bool, 2> in1{false, true};
    const std::array<double, 3> v2{lam_l, lam_l, double(eta1)};
    const std::array<bool, 3> in2{false, false, true};
    const auto r1 = overtaking_boundary_rate(o, v1, in1, 0, 1);
    const auto r2 = overtaking_boundary_rate(o, v2, in2, 0, 2);
    CHECK(r1.kind == BoundaryEvent::Birth);
    CHECK(r2.kind == BoundaryEvent::Birth);
    CHECK(r1.rate + r2.rate == doctest::Approx((b1 * lam_l + b2 * lam_l * lam_l) * (1 - eta1)));
  }
  for (int eta : {0, 1}) {
    // death at N-1 towards N (j = 1) and N+1 (j = 2)
    const std::array<double, 2> v1{double(eta), lam_r};
    const std::array<bool, 2> in1{true, false};
    const std::array<double, 3> v2{double(eta), lam_r, lam_r};
    const std::array<bool, 3> in2{true, false, false};
    const auto d1 = overtaking_boundary_rate(o, v1, in1, 0, 1);
    const auto d2 = overtaking_boundary_rate(o, v2, in2, 0, 2);
    CHECK(d1.kind == BoundaryEvent::Death);
    CHECK(d1.rate + d2.rate == doctest::Approx((b1 * (1 - lam_r) + b2 * lam_r * (1 - lam_r)) * eta));
  }
  const std::array<double, 2> zero{0.0, 0.0};
  const std::array<bool, 2> in{false, true};
  CHECK(overtaking_boundary_rate(o, zero, in, 0, 1).rate == 0.0);
  const std::array<bool, 2> both{true, true};
  const std::array<double, 2> bulk{1.0, 0.0};
  CHECK(overtaking_boundary_rate(o, bulk, both, 0, 1).kind == BoundaryEvent::BulkJump);
}

TEST_CASE("microscopic_flux") {
  const auto s = sep();
  const std::array<int, 1> vacant{0};
  CHECK(microscopic_flux(s.misanthrope(), 1, vacant)(0) == 1.0);
  CHECK(microscopic_flux(s.misanthrope(), 0, vacant)(0) == 0.0);

  const Overtaking o{1, {{2.0, 1.0}, {}}};
  CHECK(microscopic_flux(o, {{1, 1, 0}, {1, 0, 0}})(0) == 2.0);
  CHECK(microscopic_flux(o, {{0, 0, 0}, {0, 0, 0}})(0) == 0.0);
  const Overtaking back{1, {{1.0}, {1.0}}};
  CHECK(microscopic_flux(back, {{1, 0}, {1, 1}})(0) == 1.0);
  CHECK(microscopic_flux(back, {{1, 0}, {1, 0}})(0) == 0.0);
}
