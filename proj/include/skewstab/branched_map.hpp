#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "skewstab/parallel.hpp"

namespace skewstab {

// One monotone branch f_i of an interval map, defined on the open interval
// (a, b) and extended to its closure. forward/inverse/derivative must be
// consistent: inverse(forward(x)) == x and derivative is the derivative of
// forward. image_lo/image_hi is the closure of forward((a, b)).
struct Branch {
  int index = 0;  // 1-based
  double a = 0.0;
  double b = 0.0;
  std::function<double(double)> forward;
  std::function<double(double)> inverse;
  std::function<double(double)> derivative;
  double image_lo = 0.0;
  double image_hi = 1.0;

  bool contains(double x) const { return a < x && x < b; }
  bool image_contains(double gamma) const {
    return image_lo < gamma && gamma < image_hi;
  }
};

enum class MapKind { convex, expanding, pre };

// A piecewise monotone interval map with countably many branches, truncated
// to the first n_truncated. The discarded tail is summarized by tail_bound,
// a bound on sum_{i>N} sup_{I_i} 1/|f_i'| (which for all built-in fixtures
// also bounds the Lebesgue measure of the un-represented domain).
struct BranchedMap {
  std::vector<Branch> branches;  // ascending index, pairwise disjoint intervals
  int n_truncated = 0;
  std::function<double(int)> tail_bound;
  MapKind kind = MapKind::expanding;
  int n0 = 1;  // iterate at which the expanding/convex conditions hold (kind==pre)
  std::string name = "custom";

  double tail() const { return tail_bound ? tail_bound(n_truncated) : 0.0; }
  const Branch& branch(int index) const { return branches.at(index - 1); }
};

// Piecewise-constant density on n_cells uniform cells of [0,1];
// cell j = [j/n, (j+1)/n).
struct DensityVector {
  int n_cells = 0;
  std::vector<double> values;

  static DensityVector zeros(int n) { return {n, std::vector<double>(n, 0.0)}; }
  static DensityVector constant(int n, double v) {
    return {n, std::vector<double>(n, v)};
  }

  double cell_center(int j) const { return (j + 0.5) / n_cells; }
  int cell_of(double x) const;

  double l1() const;    // (1/n) sum |v_j|
  double mass() const;  // (1/n) sum v_j, signed
  double bv() const;    // sum |v_{j+1} - v_j|
  double bv_norm() const { return l1() + bv(); }  // |h|_v
};

// Locates the open branch interval containing x; boundary points and the
// truncated tail map to nullopt.
std::optional<int> branch_of(const BranchedMap& map, double x);

// f(x). Throws std::domain_error when x lies in no represented branch.
double eval(const BranchedMap& map, double x);

// f_i^{-1}(gamma). Throws std::out_of_range when gamma is outside the closed
// image of branch i.
double branch_inverse(const BranchedMap& map, int index, double gamma);

// Transfer (Frobenius-Perron) operator on densities, collocated at cell
// centers: (P h)(c) = sum_i h(f_i^{-1}(c)) / |f_i'(f_i^{-1}(c))| over the
// branches whose open image contains c.
DensityVector pf_apply(const BranchedMap& map, const DensityVector& h,
                       Exec mode = Exec::parallel);

// Derivative of f^k along the forward orbit of x; nullopt when the orbit
// leaves the represented branches (boundary, truncated tail, or outside
// [0,1]).
std::optional<double> iterate_derivative(const BranchedMap& map, double x,
                                         int k);

struct MapClassReport {
  bool monotone_ok = false;        // each branch strictly monotone on samples
  bool inverse_ok = false;         // inverse(forward(x)) == x within 1e-10
  bool derivative_nonzero = false;

  // expanding-map conditions at time one
  double beta = 0.0;  // sup of sampled 1/|f'| (closed per-branch grids)
  bool expanding_ok = false;

  // convex-map conditions
  bool endpoint_zero_ok = false;   // f_i(a_i) == 0
  bool convex_ok = false;          // second differences >= -1e-10
  double derivative_sum = 0.0;     // sum_i 1/f_i'(a_i), truncated
  double derivative_sum_with_tail = 0.0;
  bool summability_ok = false;
  bool left_slope_ok = false;      // f'(0) > 1 when a branch starts at 0
  bool zero_is_limit_point = false;
  bool convex_class_ok = false;

  // iterate check (kind == pre)
  int n0 = 1;
  double beta_n0 = 0.0;
  double iterate_coverage = 0.0;   // fraction of samples with a valid orbit
  bool iterate_ok = false;

  bool class_ok = false;  // the check matching map.kind
};

MapClassReport check_map_class(const BranchedMap& map);

}  // namespace skewstab
