#include "skewstab/branched_map.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace skewstab {

int DensityVector::cell_of(double x) const {
  int j = static_cast<int>(std::floor(x * n_cells));
  return std::clamp(j, 0, n_cells - 1);
}

double DensityVector::l1() const {
  double s = 0.0;
  for (double v : values) s += std::abs(v);
  return s / n_cells;
}

double DensityVector::mass() const {
  double s = 0.0;
  for (double v : values) s += v;
  return s / n_cells;
}

double DensityVector::bv() const {
  double s = 0.0;
  for (std::size_t j = 0; j + 1 < values.size(); ++j)
    s += std::abs(values[j + 1] - values[j]);
  return s;
}

std::optional<int> branch_of(const BranchedMap& map, double x) {
  for (const Branch& br : map.branches)
    if (br.contains(x)) return br.index;
  return std::nullopt;
}

double eval(const BranchedMap& map, double x) {
  auto i = branch_of(map, x);
  if (!i) throw std::domain_error("eval: x is not interior to any represented branch");
  return map.branch(*i).forward(x);
}

double branch_inverse(const BranchedMap& map, int index, double gamma) {
  const Branch& br = map.branch(index);
  if (gamma < br.image_lo || gamma > br.image_hi)
    throw std::out_of_range("branch_inverse: gamma outside the branch image");
  double x = br.inverse(gamma);
  return std::clamp(x, br.a, br.b);
}

DensityVector pf_apply(const BranchedMap& map, const DensityVector& h, Exec mode) {
  const int n = h.n_cells;
  DensityVector out = DensityVector::zeros(n);
  for_each_index(static_cast<std::size_t>(n), mode, [&](std::size_t t) {
    const double gamma = (static_cast<double>(t) + 0.5) / n;
    double acc = 0.0;
    for (const Branch& br : map.branches) {  // ascending branch order
      if (!br.image_contains(gamma)) continue;
      double x = std::clamp(br.inverse(gamma), br.a, br.b);
      double d = br.derivative(x);
      if (d == 0.0) continue;
      acc += h.values[h.cell_of(x)] / std::abs(d);
    }
    out.values[t] = acc;
  });
  return out;
}

std::optional<double> iterate_derivative(const BranchedMap& map, double x, int k) {
  double d = 1.0;
  for (int j = 0; j < k; ++j) {
    auto i = branch_of(map, x);
    if (!i) return std::nullopt;
    const Branch& br = map.branch(*i);
    d *= br.derivative(x);
    x = br.forward(x);
    if (!(x >= 0.0 && x <= 1.0)) return std::nullopt;
  }
  return d;
}

namespace {

constexpr int kGridPoints = 64;  // per-branch check grid

std::vector<double> closed_grid(double a, double b, int n) {
  std::vector<double> g(n);
  for (int j = 0; j < n; ++j) g[j] = a + (b - a) * j / (n - 1);
  return g;
}

}  // namespace

MapClassReport check_map_class(const BranchedMap& map) {
  MapClassReport rep;
  rep.monotone_ok = true;
  rep.inverse_ok = true;
  rep.derivative_nonzero = true;
  rep.endpoint_zero_ok = true;
  rep.convex_ok = true;
  rep.beta = 0.0;

  double a_min = 1.0;
  bool branch_at_zero = false;
  double slope_at_zero = 0.0;

  for (const Branch& br : map.branches) {
    auto grid = closed_grid(br.a, br.b, kGridPoints);
    std::vector<double> fx(grid.size());
    for (std::size_t j = 0; j < grid.size(); ++j) fx[j] = br.forward(grid[j]);

    const bool increasing = fx.back() > fx.front();
    for (std::size_t j = 0; j + 1 < grid.size(); ++j) {
      double diff = fx[j + 1] - fx[j];
      if ((increasing && diff <= 0.0) || (!increasing && diff >= 0.0))
        rep.monotone_ok = false;
    }
    // convexity via second differences; the tolerance admits linear branches
    // and scales with the derivative so the cancellation noise of steep
    // branches (slope ~ 2^i) is not flagged
    for (std::size_t j = 0; j + 2 < grid.size(); ++j) {
      double tol = 1e-10 + 8e-16 * std::abs(br.derivative(grid[j + 1]));
      if (fx[j + 2] - 2.0 * fx[j + 1] + fx[j] < -tol) rep.convex_ok = false;
    }
    for (std::size_t j = 1; j + 1 < grid.size(); ++j) {
      double x = grid[j];
      if (std::abs(br.inverse(br.forward(x)) - x) > 1e-10) rep.inverse_ok = false;
      double d = br.derivative(x);
      if (d == 0.0) rep.derivative_nonzero = false;
    }
    for (double x : grid) {
      double d = br.derivative(x);
      if (d != 0.0) rep.beta = std::max(rep.beta, 1.0 / std::abs(d));
    }

    if (increasing && std::abs(br.forward(br.a)) > 1e-8) rep.endpoint_zero_ok = false;
    if (!increasing) rep.endpoint_zero_ok = false;  // def. asks for increasing branches

    double da = br.derivative(br.a);
    if (da != 0.0) rep.derivative_sum += 1.0 / std::abs(da);

    if (br.a <= 1e-12) {
      branch_at_zero = true;
      slope_at_zero = std::abs(br.derivative(br.a));
    }
    a_min = std::min(a_min, br.a);
  }

  rep.derivative_sum_with_tail = rep.derivative_sum + map.tail();
  rep.summability_ok = std::isfinite(rep.derivative_sum_with_tail);
  rep.expanding_ok = rep.monotone_ok && rep.inverse_ok && rep.beta < 1.0 - 1e-9;

  rep.zero_is_limit_point = !branch_at_zero;
  rep.left_slope_ok = rep.zero_is_limit_point || slope_at_zero > 1.0;
  rep.convex_class_ok = rep.monotone_ok && rep.endpoint_zero_ok && rep.convex_ok &&
                        rep.summability_ok && rep.left_slope_ok;

  rep.n0 = map.n0;
  if (map.kind == MapKind::pre && map.n0 > 1) {
    double beta_k = 0.0;
    int valid = 0, total = 0;
    for (const Branch& br : map.branches) {
      for (double x : closed_grid(br.a, br.b, kGridPoints)) {
        ++total;
        if (auto d = iterate_derivative(map, x, map.n0)) {
          ++valid;
          if (*d != 0.0) beta_k = std::max(beta_k, 1.0 / std::abs(*d));
        }
      }
    }
    rep.beta_n0 = beta_k;
    rep.iterate_coverage = total ? static_cast<double>(valid) / total : 0.0;
    rep.iterate_ok = valid > 0 && beta_k < 1.0 - 1e-9;
  } else {
    rep.beta_n0 = rep.beta;
    rep.iterate_coverage = 1.0;
    rep.iterate_ok = rep.expanding_ok;
  }

  switch (map.kind) {
    case MapKind::expanding: rep.class_ok = rep.expanding_ok; break;
    case MapKind::convex: rep.class_ok = rep.convex_class_ok; break;
    case MapKind::pre: rep.class_ok = rep.iterate_ok; break;
  }
  return rep;
}

}  // namespace skewstab
