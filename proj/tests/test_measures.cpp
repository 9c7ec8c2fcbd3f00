#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "oracles.hpp"
#include "skewstab/measure.hpp"

using namespace skewstab;

TEST_CASE("w1 on two deltas equals the transport cost") {
  CHECK(w1(delta_atom(0.2), delta_atom(0.7)) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("w1 of identical measures is zero") {
  FiberAtoms a;
  a.pos = {{0.1, 0.4}, {0.9, 0.6}};
  CHECK(w1(a, a) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("W-norm of a probability is one") {
  CHECK(w_norm(delta_atom(0.5)) == doctest::Approx(1.0));
}

TEST_CASE("W-norm picks up the mass term through the sup-norm constraint") {
  CHECK(w_norm(delta_atom(0.0, 2.0)) == doctest::Approx(2.0));
}

TEST_CASE("w1 matches the brute-force LP oracle on random signed pairs") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 120; ++trial) {
    FiberAtoms a = oracles::random_atoms(2, rng, true);
    FiberAtoms b = oracles::random_atoms(1, rng, true);
    // keep the joint support small enough for vertex enumeration
    double mine = w1(a, b);
    double ref = oracles::lp_w1(a, b);
    CHECK(mine == doctest::Approx(ref).epsilon(1e-9));
  }
}

TEST_CASE("w1 equals the CDF integral for equal-mass positive pairs") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 60; ++trial) {
    FiberAtoms a = oracles::random_atoms(3, rng);
    FiberAtoms b = oracles::random_atoms(3, rng);
    if (a.pos.empty() || b.pos.empty()) continue;
    b.scale(a.pos_mass() / b.pos_mass());
    CHECK(w1(a, b) == doctest::Approx(oracles::cdf_w1(a, b)).epsilon(1e-9));
  }
}

TEST_CASE("w1 is a pseudometric: symmetry and triangle inequality") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 50; ++trial) {
    FiberAtoms a = oracles::random_atoms(3, rng, true);
    FiberAtoms b = oracles::random_atoms(3, rng, true);
    FiberAtoms c = oracles::random_atoms(3, rng, true);
    CHECK(w1(a, b) == doctest::Approx(w1(b, a)).epsilon(1e-12));
    CHECK(w1(a, c) <= w1(a, b) + w1(b, c) + 1e-12);
  }
}

TEST_CASE("norm_l1 of a probability equals one") {
  DiscretizedMeasure mu = product_measure(32, delta_atom(0.3));
  CHECK(norm_l1(mu) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(consistent(mu));
}

TEST_CASE("norm_l1 of the zero measure is zero") {
  DiscretizedMeasure mu;
  mu.n_cells = 16;
  mu.fibers.resize(16);
  mu.refresh_marginal();
  CHECK(norm_l1(mu) == 0.0);
}

TEST_CASE("norm_l1 of a product difference") {
  auto mu = subtract(product_measure(64, delta_atom(0.2)),
                     product_measure(64, delta_atom(0.7)));
  CHECK(norm_l1(mu) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("subtract of delta products at distance one saturates at the transport cost") {
  auto mu = subtract(product_measure(64, delta_atom(0.0)),
                     product_measure(64, delta_atom(1.0)));
  CHECK(norm_l1(mu) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("norm_s1 on m x delta_0") {
  DiscretizedMeasure mu = product_measure(64, delta_atom(0.0));
  NormReport rep = norm_s1(mu);
  CHECK(rep.bv_marginal == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(rep.l1 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(rep.s1 == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(rep.s1 == rep.bv_marginal + rep.l1);
}

TEST_CASE("norm_s1 of zero measure is zero") {
  DiscretizedMeasure mu;
  mu.n_cells = 16;
  mu.fibers.resize(16);
  mu.refresh_marginal();
  NormReport rep = norm_s1(mu);
  CHECK(rep.l1 == 0.0);
  CHECK(rep.s1 == 0.0);
  CHECK(rep.variation == 0.0);
}

TEST_CASE("norm_s1 of a half-interval indicator marginal") {
  const int n = 64;
  DiscretizedMeasure mu;
  mu.n_cells = n;
  mu.fibers.resize(n);
  for (int j = 0; j < n / 2; ++j) mu.fibers[j].pos.push_back({0.0, 1.0 / n});
  mu.refresh_marginal();
  NormReport rep = norm_s1(mu);
  CHECK(rep.bv_marginal == doctest::Approx(1.5).epsilon(1e-12));
}

TEST_CASE("variation of a product measure vanishes") {
  FiberAtoms nu2;
  nu2.pos = {{0.25, 0.5}, {0.75, 0.5}};
  CHECK(variation(product_measure(128, nu2)) == 0.0);
}

TEST_CASE("variation counts the single fiber jump at density scale") {
  const int n = 64;
  DiscretizedMeasure mu;
  mu.n_cells = n;
  mu.fibers.resize(n);
  for (int j = 0; j < n; ++j)
    mu.fibers[j].pos.push_back({j < n / 2 ? 0.0 : 1.0, 1.0 / n});
  mu.refresh_marginal();
  CHECK(variation(mu) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("product_measure rejects signed and non-probability inputs") {
  FiberAtoms signed_nu;
  signed_nu.pos = {{0.5, 1.0}};
  signed_nu.neg = {{0.2, 0.5}};
  CHECK_THROWS_AS(product_measure(16, signed_nu), std::invalid_argument);
  CHECK_THROWS_AS(product_measure(16, delta_atom(0.5, 0.4)), std::invalid_argument);
}

TEST_CASE("subtract demands matching grids and cancels exactly") {
  auto a = product_measure(32, delta_atom(0.3));
  auto b = product_measure(16, delta_atom(0.3));
  CHECK_THROWS_AS(subtract(a, b), std::invalid_argument);
  CHECK(norm_l1(subtract(a, a)) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("l1 norm never exceeds the S1 norm") {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 32;
    DiscretizedMeasure mu;
    mu.n_cells = n;
    mu.fibers.resize(n);
    for (int j = 0; j < n; ++j) mu.fibers[j] = oracles::random_atoms(2, rng, true);
    mu.refresh_marginal();
    NormReport rep = norm_s1(mu);
    CHECK(rep.l1 <= rep.s1 + 1e-12);
  }
}

TEST_CASE("coalesce merges nearby atoms and keeps mass") {
  FiberAtoms f;
  for (int i = 0; i < 200; ++i) f.pos.push_back({0.5 + i * 1e-9, 0.01});
  f.coalesce(1e-6);
  CHECK(f.pos.size() == 1);
  CHECK(f.pos[0].w == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(f.pos[0].y == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("coalesce caps the atom count by absorbing the smallest weights") {
  FiberAtoms f;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double mass = 0.0;
  for (int i = 0; i < 300; ++i) {
    double w = 0.01 + unif(rng);
    f.pos.push_back({unif(rng), w});
    mass += w;
  }
  double slack = f.coalesce(1e-9, 64);
  CHECK(f.pos.size() <= 64);
  CHECK(f.pos_mass() == doctest::Approx(mass).epsilon(1e-12));
  CHECK(slack >= 0.0);
  CHECK(slack <= mass);  // positions live in [0,1]
}

TEST_CASE("measure JSON round trip") {
  std::mt19937_64 rng(5);
  DiscretizedMeasure mu;
  mu.n_cells = 16;
  mu.fibers.resize(16);
  for (int j = 0; j < 16; ++j) mu.fibers[j] = oracles::random_atoms(2, rng, true);
  mu.refresh_marginal();
  DiscretizedMeasure back = measure_from_json(measure_to_json(mu));
  CHECK(back.n_cells == mu.n_cells);
  CHECK(norm_l1(subtract(back, mu)) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("serial and parallel norms agree bitwise") {
  std::mt19937_64 rng(17);
  DiscretizedMeasure mu;
  mu.n_cells = 64;
  mu.fibers.resize(64);
  for (int j = 0; j < 64; ++j) mu.fibers[j] = oracles::random_atoms(3, rng, true);
  mu.refresh_marginal();
  CHECK(norm_l1(mu, Exec::serial) == norm_l1(mu, Exec::parallel));
  CHECK(variation(mu, Exec::serial) == variation(mu, Exec::parallel));
}
