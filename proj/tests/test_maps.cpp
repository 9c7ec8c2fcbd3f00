#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "skewstab/branched_map.hpp"
#include "skewstab/fixtures.hpp"

using namespace skewstab;

TEST_CASE("branch_of locates Gauss atoms and rejects boundaries") {
  BranchedMap gauss = make_map("gauss", 40);
  CHECK(branch_of(gauss, 0.4) == 2);  // 0.4 in (1/3, 1/2)
  CHECK_FALSE(branch_of(gauss, 0.5).has_value());
  BranchedMap dbl = make_map("doubling");
  CHECK(branch_of(dbl, 0.25) == 1);
}

TEST_CASE("eval on the built-in fixtures") {
  BranchedMap gauss = make_map("gauss", 40);
  CHECK(eval(gauss, 0.4) == doctest::Approx(0.5).epsilon(1e-12));
  BranchedMap lur = make_map("luroth_dyadic", 40);
  CHECK(eval(lur, 0.75) == doctest::Approx(0.5).epsilon(1e-12));
  BranchedMap dbl = make_map("doubling");
  CHECK(eval(dbl, 0.25) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK_THROWS_AS(eval(gauss, 0.5), std::domain_error);
}

TEST_CASE("branch_inverse inverts eval and rejects out-of-image points") {
  BranchedMap gauss = make_map("gauss", 40);
  CHECK(branch_inverse(gauss, 2, 0.5) == doctest::Approx(0.4).epsilon(1e-12));
  BranchedMap dbl = make_map("doubling");
  CHECK(branch_inverse(dbl, 1, 0.5) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK_THROWS_AS(branch_inverse(gauss, 1, 1.5), std::out_of_range);
}

TEST_CASE("branch_inverse composed with eval is the identity on samples") {
  for (const char* name : {"gauss", "luroth_dyadic", "linear_2pow", "mixed_slopes", "doubling"}) {
    BranchedMap map = make_map(name, 20);
    for (const Branch& br : map.branches) {
      for (int j = 1; j < 16; ++j) {
        double x = br.a + (br.b - br.a) * j / 16.0;
        double g = br.forward(x);
        if (g < br.image_lo || g > br.image_hi) continue;
        CHECK(std::abs(branch_inverse(map, br.index, g) - x) <= 1e-10);
      }
    }
  }
}

TEST_CASE("pf_apply on the dyadic full-branch fixture reproduces the geometric sum") {
  const int N = 20;
  BranchedMap map = make_map("linear_2pow", N);
  DensityVector one = DensityVector::constant(256, 1.0);
  DensityVector out = pf_apply(map, one);
  const double expected = 1.0 - std::ldexp(1.0, -N);
  for (double v : out.values) CHECK(v == doctest::Approx(expected).epsilon(1e-12));

  DensityVector zero = DensityVector::zeros(256);
  for (double v : pf_apply(map, zero).values) CHECK(v == 0.0);
}

TEST_CASE("Gauss density is invariant up to the truncation defect") {
  const int n = 4096;
  BranchedMap gauss = make_map("gauss", 40);
  DensityVector h1(DensityVector::zeros(n));
  for (int j = 0; j < n; ++j)
    h1.values[j] = 1.0 / ((1.0 + (j + 0.5) / n) * std::log(2.0));
  DensityVector out = pf_apply(gauss, h1);
  // the truncated tail drains ~3.5% of the mass each step; compare after
  // renormalizing the image
  double mass = out.mass();
  CHECK(1.0 - mass <= gauss.tail() + 0.015);
  double dist = 0.0;
  for (int j = 0; j < n; ++j)
    dist += std::abs(out.values[j] / mass - h1.values[j]);
  CHECK(dist / n <= 0.01);
}

TEST_CASE("pf_apply preserves mass within the declared tail bound") {
  std::mt19937_64 rng(2);
  for (const char* name : {"gauss", "luroth_dyadic", "linear_2pow", "mixed_slopes", "doubling"}) {
    BranchedMap map = make_map(name, 40);
    for (int trial = 0; trial < 5; ++trial) {
      DensityVector h = oracles::random_step(512, 6, rng);
      for (double& v : h.values) v = std::abs(v);  // positive, sup <= 1
      DensityVector out = pf_apply(map, h);
      CHECK(out.mass() <= h.mass() + map.tail() + 1e-8);
      CHECK(out.mass() >= h.mass() - map.tail() - 1e-8);
      for (double v : out.values) CHECK(v >= 0.0);  // positivity
    }
  }
}

TEST_CASE("PF duality against the exact integral oracle") {
  std::mt19937_64 rng(9);
  const int n = 1024;
  for (const char* name : {"doubling", "linear_2pow", "luroth_dyadic"}) {
    BranchedMap map = make_map(name, 30);
    for (int trial = 0; trial < 10; ++trial) {
      DensityVector h1 = oracles::random_step(n, 8, rng);
      DensityVector h2 = oracles::random_step(n, 8, rng);
      double lhs = oracles::discrete_duality_lhs(map, h1, h2);
      double rhs = oracles::exact_duality_rhs(map, h1, h2);
      double sup1 = 0.0;
      for (double v : h1.values) sup1 = std::max(sup1, std::abs(v));
      CHECK(std::abs(lhs - rhs) <= 5.0 / n * (sup1 * h2.bv_norm() + 1.0));
    }
  }
}

TEST_CASE("check_map_class classifies the fixtures") {
  MapClassReport lin = check_map_class(make_map("linear_2pow", 30));
  CHECK(lin.expanding_ok);
  CHECK(lin.beta == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(lin.class_ok);

  MapClassReport mixed = check_map_class(make_map("mixed_slopes", 30));
  CHECK_FALSE(mixed.expanding_ok);  // the slope-1/2 branch
  CHECK(mixed.convex_class_ok);
  CHECK(mixed.class_ok);
  CHECK(mixed.left_slope_ok);

  MapClassReport gauss = check_map_class(make_map("gauss", 40));
  CHECK_FALSE(gauss.expanding_ok);  // 1/|f'| reaches 1 at the right endpoint
  CHECK(gauss.iterate_ok);          // inf (f^2)' >= 2
  CHECK(gauss.beta_n0 < 1.0);
  CHECK(gauss.class_ok);

  MapClassReport lur = check_map_class(make_map("luroth_dyadic", 30));
  CHECK(lur.expanding_ok);
  CHECK(lur.class_ok);
}

TEST_CASE("iterate_derivative composes the chain rule") {
  BranchedMap dbl = make_map("doubling");
  auto d = iterate_derivative(dbl, 0.3, 3);
  REQUIRE(d.has_value());
  CHECK(*d == doctest::Approx(8.0).epsilon(1e-12));
  CHECK_FALSE(iterate_derivative(dbl, 0.5, 1).has_value());
}

TEST_CASE("custom map from JSON matches the built-in doubling") {
  nlohmann::json spec = {
      {"branches",
       {{{"a", 0.0}, {"b", 0.5}, {"kind", "linear"}, {"params", {{"slope", 2.0}}}},
        {{"a", 0.5}, {"b", 1.0}, {"kind", "linear"}, {"params", {{"slope", 2.0}}}}}},
      {"tail_bound", {{"type", "geometric"}, {"ratio", 0.0}}}};
  BranchedMap map = map_from_json(spec);
  CHECK(eval(map, 0.25) == doctest::Approx(0.5));
  CHECK(map.tail() == 0.0);

  nlohmann::json gauss_branch = {
      {"branches",
       {{{"a", 0.5}, {"b", 1.0}, {"kind", "moebius"},
         {"params", {{"p", -1.0}, {"q", 1.0}, {"r", 1.0}, {"s", 0.0}}}}}},
      {"tail_bound", {{"type", "geometric"}, {"ratio", 0.5}}}};
  BranchedMap m2 = map_from_json(gauss_branch);
  CHECK(eval(m2, 0.8) == doctest::Approx(1.0 / 0.8 - 1.0).epsilon(1e-12));
  CHECK(m2.tail() == doctest::Approx(0.5));  // 0.5^2 / (1-0.5)
}

TEST_CASE("unknown fixture name lists the available fixtures") {
  try {
    make_map("nope");
    FAIL("expected invalid_argument");
  } catch (const std::invalid_argument& e) {
    std::string msg = e.what();
    CHECK(msg.find("gauss") != std::string::npos);
    CHECK(msg.find("doubling") != std::string::npos);
  }
}

TEST_CASE("serial and parallel pf_apply agree bitwise") {
  std::mt19937_64 rng(13);
  BranchedMap gauss = make_map("gauss", 40);
  DensityVector h = oracles::random_step(2048, 10, rng);
  DensityVector a = pf_apply(gauss, h, Exec::serial);
  DensityVector b = pf_apply(gauss, h, Exec::parallel);
  for (int j = 0; j < h.n_cells; ++j) CHECK(a.values[j] == b.values[j]);
}
