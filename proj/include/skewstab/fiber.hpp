#pragma once

#include <functional>
#include <optional>
#include <string>

#include "skewstab/branched_map.hpp"

namespace skewstab {

// Fiber action G : [0,1] x [0,1] -> [0,1]. per_branch marks maps that may be
// discontinuous across branch boundaries of the base partition; horizontal
// difference quotients are then only ever taken within a branch.
struct FiberMap {
  std::function<double(double, double)> action;
  bool per_branch = false;
  std::optional<double> declared_alpha;
  std::optional<double> declared_lip;
  std::string name = "custom";
};

// G(x, y). Throws std::out_of_range when the action leaves [0,1].
double apply(const FiberMap& gm, double x, double y);

// Nested dyadic sample grids: level L contributes the points (j+0.5)/2^L, so
// refining never drops a sample and the estimated suprema are monotone in the
// refinement.
struct SamplingSpec {
  int x_levels = 6;  // 2^{L+1}-2 points >= 64 at L=6
  int y_levels = 6;
};

// Sampled vertical contraction rate (sup of d2-quotients along fibers).
double estimate_alpha(const FiberMap& gm, const SamplingSpec& spec = {});

// Sampled horizontal Lipschitz constant, sup over branches of within-branch
// quotients; never straddles a branch boundary.
double estimate_lip(const FiberMap& gm, const BranchedMap& map,
                    const SamplingSpec& spec = {});

struct FiberConstants {
  double alpha = 0.0;   // vertical contraction rate of G
  double g_lip = 0.0;   // horizontal Lipschitz constant of G
  double alpha4 = 0.0;  // alpha^k * sup 1/|(f^k)'|
  double u4 = 0.0;      // g_lip * sup 1/|(f^k)'| + variation of 1/|(f^k)'|
  int k = 1;
};

// Constants for the k-th iterate; the sup and the discrete variation of
// 1/|(f^k)'| are taken over per-branch sample grids with valid k-step orbits.
FiberConstants h3_constants(const FiberMap& gm, const BranchedMap& map, int k,
                            const SamplingSpec& spec = {});

// Smallest k <= k_max with alpha4 < 1. Throws std::runtime_error when no such
// iterate exists at the searched depths.
FiberConstants find_h3_constants(const FiberMap& gm, const BranchedMap& map,
                                 int k_max = 8, const SamplingSpec& spec = {});

}  // namespace skewstab
