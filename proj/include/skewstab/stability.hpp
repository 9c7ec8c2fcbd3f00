#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "skewstab/transfer.hpp"

namespace skewstab {

// One-parameter family of skew products F_delta with a declared perturbation
// modulus R(delta). at(0) is the reference system; all members share the base
// partition (and, for the built-in families, the branch images).
struct PerturbationFamily {
  std::string name = "custom";
  std::function<SkewProduct(double)> at;
  std::function<double(double)> r_of_delta;
  double delta0 = 1.0;
  bool shares_partition = true;
  bool shares_branch_images = true;
};

PerturbationFamily identity_family(SkewProduct base);
// slopes 2^i (1+delta) on the dyadic partition, fiber G = alpha y
PerturbationFamily linear2pow_slope_family(int branches, double fiber_alpha = 0.5);
// doubling base, G_delta(x,y) = alpha y + coeff * delta
PerturbationFamily fiber_shift_family(double alpha = 0.5, double coeff = 0.1);
// {"name": "identity"|"linear_2pow_slope"|"fiber_shift"|"custom", ...}
PerturbationFamily family_from_json(const nlohmann::json& spec, int branches);

struct UConditionRow {
  double delta = 0.0;
  double u21 = 0.0;          // sup_gamma sum_i |1/f_d'(g_di) - 1/f_0'(g_0i)|
  double u22 = 0.0;          // sup_gamma max_i |g_0i - g_di|
  double u23 = 0.0;          // sup |G_0 - G_delta|
  double r = 0.0;            // declared R(delta)
  double reciprocal_defect = 0.0;  // sup_gamma (1 - sum_i 1/|f_d'(g_di)|)
  bool ok = false;
};

struct UConditionReport {
  std::vector<UConditionRow> rows;
  bool modulus_ok = false;  // |R(delta) log delta| decreasing along delta -> 0
  bool all_ok = false;
};

UConditionReport verify_u_conditions(const PerturbationFamily& fam,
                                     const std::vector<double>& deltas,
                                     const SamplingSpec& spec = {});

struct AConditionRow {
  double delta = 0.0;
  double d_fit = 0.0;      // |P^n h|_v <= D lambda^n |h|_v + D |h|_1
  double lambda_fit = 0.0;
  double alpha4 = 0.0;
  double u4 = 0.0;
  bool ly_ok = false;
};

struct AConditionReport {
  std::vector<AConditionRow> rows;
  double sup_lambda = 0.0;
  double sup_d = 0.0;
  double sup_alpha4 = 0.0;
  double sup_u4 = 0.0;
  bool ok = false;
};

AConditionReport verify_a_conditions(const PerturbationFamily& fam,
                                     const std::vector<double>& deltas,
                                     int n_cells = 1024, int n_iter = 30,
                                     std::uint64_t seed = 0);

struct GapResult {
  double gap = 0.0;       // ||(F_0* - F_delta*) mu_delta||_1
  double c1_bound = 0.0;  // (|G_0|_lip + 3 B_u + 2) R(delta)
};

GapResult operator_gap(const PerturbationFamily& fam, double delta,
                       const DiscretizedMeasure& mu_delta, double b_u,
                       Exec mode = Exec::parallel);

struct BuBound {
  double empirical_max = 0.0;       // max_delta V(mu_delta)
  double ceiling = 0.0;             // sup U_4 / (1 - sup alpha_4)
  double slack = 0.0;               // 2 merge_eps n_cells
  bool within = false;
};

// Requires the fixed points for the given deltas (parallel arrays). Throws on
// empty input.
BuBound b_u_bound(const PerturbationFamily& fam, const std::vector<double>& deltas,
                  const std::vector<const DiscretizedMeasure*>& fixed_points);

struct SweepRow {
  double delta = 0.0;
  double diff_l1 = 0.0;
  double variation = 0.0;
  double gap = 0.0;
  double c1_bound = 0.0;
  double ratio = 0.0;          // diff_l1 / (R(delta) |log delta|)
  bool converged = false;
  double predicted_bound = 0.0;  // R C M2 N + 2 C2 M rho2^N diagnostic overlay
  bool u3_positive = false;      // both marginals strictly positive
};

struct StabilityReport {
  std::vector<SweepRow> rows;  // descending delta
  double b_u = 0.0;
  double c1 = 0.0;
  double rho2 = 0.0;
  double d1_surrogate = 0.0;   // max ratio
  bool ratio_bounded = false;  // max/min <= 10 over the last five rows
  bool no_increasing_trend = false;
  bool all_converged = false;
  bool pass = false;
};

StabilityReport stability_sweep(const PerturbationFamily& fam,
                                const std::vector<double>& deltas, int n_cells,
                                double tol, int max_iter = 10000,
                                int rate_trials = 6, std::uint64_t seed = 0,
                                Exec mode = Exec::parallel);

std::vector<double> geometric_deltas(double start, double ratio, int count);

}  // namespace skewstab
