#pragma once

#include <random>
#include <vector>

#include "skewstab/branched_map.hpp"
#include "skewstab/fiber.hpp"
#include "skewstab/measure.hpp"

namespace skewstab {

// F(x,y) = (f(x), G(x,y)) with the verified iterate constants attached.
struct SkewProduct {
  BranchedMap base;
  FiberMap fiber;
  FiberConstants constants;
};

// Estimates the (H3) constants (first iterate k <= k_max with alpha4 < 1) and
// attaches them. Throws when no such iterate exists.
SkewProduct make_skew_product(BranchedMap base, FiberMap fiber, int k_max = 8);

// Leafwise transfer operator: for each target cell center c, sums over the
// branches whose image contains c the source-cell fiber atoms, positions
// mapped through G(f_i^{-1}(c), .) and weights scaled by 1/|f_i'|. The
// marginal is recomputed from the fiber masses and atoms are coalesced.
DiscretizedMeasure pushforward(const SkewProduct& F, const DiscretizedMeasure& mu,
                               Exec mode = Exec::parallel);

struct IterationRecord {
  int n = 0;
  double residual = 0.0;
  double l1 = 0.0;
  double s1 = 0.0;
  double variation = 0.0;
};

struct FixedPointResult {
  DiscretizedMeasure measure;
  int iterations = 0;
  double residual = 0.0;       // ||normalize(F_* mu) - mu||_1 at the last step
  double rate_estimate = 0.0;  // fitted per-step residual decay
  bool converged = false;
  double mass_defect = 0.0;    // 1 - mass(F_* mu) at the last step (tail leak)
  std::vector<IterationRecord> history;
};

// Power iteration of the mass-renormalized operator from a probability init
// (the truncated branch tail leaks mass, so the raw operator has no
// probability fixed point; the defect is reported per step).
FixedPointResult fixed_point(const SkewProduct& F, DiscretizedMeasure init,
                             double tol, int max_iter, Exec mode = Exec::parallel);
FixedPointResult fixed_point(const SkewProduct& F, int n_cells, double tol = 1e-8,
                             int max_iter = 10000, Exec mode = Exec::parallel);

struct RateReport {
  double rho2 = 0.0;          // geometric-mean per-step decay over trials
  double c2 = 0.0;            // sup_n ||F^n eta||_1 / (rho2^n ||eta||_{S1})
  bool decay_observed = false;
  int trials_used = 0;
  std::vector<double> per_trial;
};

// Empirical convergence-to-equilibrium rate: pushes random zero-mass test
// measures (random product probability minus the fixed point) and fits the
// log-norm decay after the transient window.
RateReport equilibrium_rate(const SkewProduct& F,
                            const DiscretizedMeasure& fixed_point_measure,
                            int trials, std::mt19937_64& rng, int n_max = 40,
                            Exec mode = Exec::parallel);

struct LyRow {
  int n = 0;
  double l1 = 0.0;
  double s1 = 0.0;
  double variation = 0.0;       // of the k-iterate orbit
  double variation_bound = 0.0; // alpha4^n V(mu) + U4/(1-alpha4) ||mu||_1
};

struct LyReport {
  std::vector<LyRow> rows;
  bool l1_non_increasing = false;
  bool variation_bounded = false;
  bool constant_marginal = false;  // precondition of the variation bound
  double r2_fit = 0.0;             // ||F^n mu||_{S1} <= R2 r2^n ||mu||_{S1} + (C2+1)||mu||_1
  double big_r2_fit = 0.0;
  double c2_fit = 0.0;
  FiberConstants constants;
};

LyReport lasota_yorke_check(const SkewProduct& F, const DiscretizedMeasure& mu,
                            int n_steps, Exec mode = Exec::parallel);

// Least-squares slope of log(values) over [first, last); used by the rate
// fits. Returns {slope, intercept}.
std::pair<double, double> log_linear_fit(const std::vector<double>& values,
                                         std::size_t first, std::size_t last);

}  // namespace skewstab
