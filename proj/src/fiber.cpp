#include "skewstab/fiber.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace skewstab {

double apply(const FiberMap& gm, double x, double y) {
  double v = gm.action(x, y);
  if (!(v >= 0.0 && v <= 1.0))
    throw std::out_of_range("fiber action left [0,1]");
  return v;
}

namespace {

// union of midpoint grids at levels 1..L, mapped into (lo, hi)
std::vector<double> dyadic_points(double lo, double hi, int levels) {
  std::vector<double> pts;
  for (int l = 1; l <= levels; ++l) {
    int m = 1 << l;
    for (int j = 0; j < m; ++j)
      pts.push_back(lo + (hi - lo) * (j + 0.5) / m);
  }
  std::sort(pts.begin(), pts.end());
  return pts;
}

struct YPair {
  double y1, y2;
};

std::vector<YPair> dyadic_pairs(int levels) {
  std::vector<YPair> pairs;
  for (int l = 1; l <= levels; ++l) {
    int m = 1 << l;
    for (int k = 0; k < m; ++k)
      pairs.push_back({static_cast<double>(k) / m, static_cast<double>(k + 1) / m});
  }
  return pairs;
}

}  // namespace

double estimate_alpha(const FiberMap& gm, const SamplingSpec& spec) {
  const auto xs = dyadic_points(0.0, 1.0, spec.x_levels);
  const auto pairs = dyadic_pairs(spec.y_levels);
  double sup = 0.0;
  for (double x : xs) {
    for (const auto& p : pairs) {
      double q = std::abs(gm.action(x, p.y1) - gm.action(x, p.y2)) / (p.y2 - p.y1);
      sup = std::max(sup, q);
    }
  }
  return sup;
}

double estimate_lip(const FiberMap& gm, const BranchedMap& map,
                    const SamplingSpec& spec) {
  const auto ys = dyadic_points(0.0, 1.0, spec.y_levels);
  double sup = 0.0;
  for (const Branch& br : map.branches) {
    const auto xs = dyadic_points(br.a, br.b, spec.x_levels);
    for (double y : ys) {
      for (std::size_t j = 0; j + 1 < xs.size(); ++j) {
        double dx = xs[j + 1] - xs[j];
        if (dx <= 0.0) continue;
        double q = std::abs(gm.action(xs[j + 1], y) - gm.action(xs[j], y)) / dx;
        sup = std::max(sup, q);
      }
    }
  }
  return sup;
}

FiberConstants h3_constants(const FiberMap& gm, const BranchedMap& map, int k,
                            const SamplingSpec& spec) {
  if (k < 1) throw std::invalid_argument("h3_constants: k must be >= 1");
  FiberConstants c;
  c.k = k;
  c.alpha = estimate_alpha(gm, spec);
  c.g_lip = estimate_lip(gm, map, spec);

  // g_k(x) = 1/|(f^k)'(x)| over the global sorted sample grid
  std::vector<std::pair<double, double>> samples;  // (x, g_k)
  for (const Branch& br : map.branches) {
    for (double x : dyadic_points(br.a, br.b, spec.x_levels + 1)) {
      if (auto d = iterate_derivative(map, x, k); d && *d != 0.0)
        samples.emplace_back(x, 1.0 / std::abs(*d));
    }
  }
  std::sort(samples.begin(), samples.end());

  double sup_gk = 0.0, var_gk = 0.0;
  for (std::size_t j = 0; j < samples.size(); ++j) {
    sup_gk = std::max(sup_gk, samples[j].second);
    if (j > 0) var_gk += std::abs(samples[j].second - samples[j - 1].second);
  }

  c.alpha4 = std::pow(c.alpha, k) * sup_gk;
  c.u4 = c.g_lip * sup_gk + var_gk;
  return c;
}

FiberConstants find_h3_constants(const FiberMap& gm, const BranchedMap& map,
                                 int k_max, const SamplingSpec& spec) {
  for (int k = 1; k <= k_max; ++k) {
    FiberConstants c = h3_constants(gm, map, k, spec);
    if (c.alpha4 < 1.0) return c;
  }
  throw std::runtime_error("no iterate k <= k_max verifies the fiber contraction (alpha4 >= 1)");
}

}  // namespace skewstab
