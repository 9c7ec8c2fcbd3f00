// Test-only oracles, independent of the production code paths they check.
#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "skewstab/branched_map.hpp"
#include "skewstab/measure.hpp"

namespace oracles {

// Brute-force LP solver for the bounded-Lipschitz dual problem
//   max sum c_k h_k   s.t.  |h_k| <= 1,  |h_{k+1} - h_k| <= y_{k+1} - y_k
// by enumerating candidate vertices (every subset of m active constraints).
// Exact for small supports; used against the production chain solver.
inline double lp_dual_norm_bruteforce(
    std::vector<std::pair<double, double>> support) {
  std::sort(support.begin(), support.end());
  // merge duplicate positions
  std::vector<std::pair<double, double>> nodes;
  for (const auto& [y, c] : support) {
    if (!nodes.empty() && nodes.back().first == y)
      nodes.back().second += c;
    else
      nodes.emplace_back(y, c);
  }
  const int m = static_cast<int>(nodes.size());
  if (m == 0) return 0.0;
  if (m == 1) return std::abs(nodes[0].second);

  // constraint rows: a . h <= b
  std::vector<std::vector<double>> A;
  std::vector<double> b;
  for (int k = 0; k < m; ++k) {
    std::vector<double> r1(m, 0.0), r2(m, 0.0);
    r1[k] = 1.0;
    r2[k] = -1.0;
    A.push_back(r1);
    b.push_back(1.0);
    A.push_back(r2);
    b.push_back(1.0);
  }
  for (int k = 0; k + 1 < m; ++k) {
    double d = nodes[k + 1].first - nodes[k].first;
    std::vector<double> r1(m, 0.0), r2(m, 0.0);
    r1[k + 1] = 1.0;
    r1[k] = -1.0;
    r2[k + 1] = -1.0;
    r2[k] = 1.0;
    A.push_back(r1);
    b.push_back(d);
    A.push_back(r2);
    b.push_back(d);
  }
  const int nc = static_cast<int>(A.size());

  double best = 0.0;  // h = 0 is feasible
  std::vector<int> pick(m);
  std::vector<std::vector<double>> M(m, std::vector<double>(m + 1));

  // iterate over all m-subsets of constraints
  std::vector<int> idx(m);
  for (int i = 0; i < m; ++i) idx[i] = i;
  while (true) {
    // solve A[idx] h = b[idx]
    for (int r = 0; r < m; ++r) {
      for (int c = 0; c < m; ++c) M[r][c] = A[idx[r]][c];
      M[r][m] = b[idx[r]];
    }
    bool singular = false;
    for (int col = 0; col < m && !singular; ++col) {
      int piv = -1;
      double pv = 1e-9;
      for (int r = col; r < m; ++r)
        if (std::abs(M[r][col]) > pv) {
          pv = std::abs(M[r][col]);
          piv = r;
        }
      if (piv < 0) {
        singular = true;
        break;
      }
      std::swap(M[col], M[piv]);
      for (int r = 0; r < m; ++r) {
        if (r == col) continue;
        double f = M[r][col] / M[col][col];
        if (f == 0.0) continue;
        for (int c = col; c <= m; ++c) M[r][c] -= f * M[col][c];
      }
    }
    if (!singular) {
      std::vector<double> h(m);
      for (int r = 0; r < m; ++r) h[r] = M[r][m] / M[r][r];
      bool feasible = true;
      for (int r = 0; r < nc && feasible; ++r) {
        double dot = 0.0;
        for (int c = 0; c < m; ++c) dot += A[r][c] * h[c];
        if (dot > b[r] + 1e-9) feasible = false;
      }
      if (feasible) {
        double obj = 0.0;
        for (int c = 0; c < m; ++c) obj += nodes[c].second * h[c];
        best = std::max(best, obj);
      }
    }

    // next combination
    int i = m - 1;
    while (i >= 0 && idx[i] == nc - m + i) --i;
    if (i < 0) break;
    ++idx[i];
    for (int j = i + 1; j < m; ++j) idx[j] = idx[j - 1] + 1;
  }
  return best;
}

inline double lp_w1(const skewstab::FiberAtoms& a, const skewstab::FiberAtoms& b) {
  std::vector<std::pair<double, double>> support;
  for (const auto& at : a.pos) support.emplace_back(at.y, at.w);
  for (const auto& at : a.neg) support.emplace_back(at.y, -at.w);
  for (const auto& at : b.pos) support.emplace_back(at.y, -at.w);
  for (const auto& at : b.neg) support.emplace_back(at.y, at.w);
  return lp_dual_norm_bruteforce(std::move(support));
}

// CDF route for equal-mass positive atom lists on [0,1]: integral of
// |CDF_a - CDF_b|.
inline double cdf_w1(const skewstab::FiberAtoms& a, const skewstab::FiberAtoms& b) {
  std::vector<std::pair<double, double>> events;  // (y, signed jump)
  for (const auto& at : a.pos) events.emplace_back(at.y, at.w);
  for (const auto& at : b.pos) events.emplace_back(at.y, -at.w);
  std::sort(events.begin(), events.end());
  double integral = 0.0, cdf = 0.0, prev = 0.0;
  for (const auto& [y, jump] : events) {
    integral += std::abs(cdf) * (y - prev);
    cdf += jump;
    prev = y;
  }
  integral += std::abs(cdf) * (1.0 - prev);
  return integral;
}

// Exact integral of (h1 o f) h2 dm for piecewise-linear branches and
// piecewise-constant h1, h2 on the same uniform grid: per source cell the
// image under a linear branch is an interval, and the integral of h1 over an
// interval is exact from prefix sums.
inline double exact_duality_rhs(const skewstab::BranchedMap& map,
                                const skewstab::DensityVector& h1,
                                const skewstab::DensityVector& h2) {
  const int n = h1.n_cells;
  std::vector<double> prefix(n + 1, 0.0);  // integral of h1 over [0, j/n]
  for (int j = 0; j < n; ++j) prefix[j + 1] = prefix[j] + h1.values[j] / n;
  auto int_h1 = [&](double lo, double hi) {
    auto at = [&](double x) {
      x = std::clamp(x, 0.0, 1.0);
      double t = x * n;
      int j = std::min(static_cast<int>(t), n - 1);
      return prefix[j] + (t - j) * h1.values[j] / n;
    };
    return at(hi) - at(lo);
  };

  double total = 0.0;
  for (const skewstab::Branch& br : map.branches) {
    int j_lo = static_cast<int>(std::floor(br.a * n));
    int j_hi = static_cast<int>(std::ceil(br.b * n));
    for (int j = std::max(0, j_lo); j < std::min(n, j_hi); ++j) {
      double lo = std::max(br.a, static_cast<double>(j) / n);
      double hi = std::min(br.b, static_cast<double>(j + 1) / n);
      if (hi <= lo) continue;
      double flo = br.forward(lo), fhi = br.forward(hi);
      double slope = std::abs(br.derivative(0.5 * (lo + hi)));
      double seg = int_h1(std::min(flo, fhi), std::max(flo, fhi)) / slope;
      total += h2.values[j] * seg;
    }
  }
  return total;
}

// (1/n) sum_t h1(c_t) (P h2)(c_t): the discrete inner product used by the
// production route.
inline double discrete_duality_lhs(const skewstab::BranchedMap& map,
                                   const skewstab::DensityVector& h1,
                                   const skewstab::DensityVector& h2) {
  skewstab::DensityVector ph2 = skewstab::pf_apply(map, h2);
  double s = 0.0;
  for (int j = 0; j < h1.n_cells; ++j) s += h1.values[j] * ph2.values[j];
  return s / h1.n_cells;
}

inline skewstab::DensityVector random_step(int n_cells, int max_blocks,
                                           std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  std::uniform_int_distribution<int> nb(1, max_blocks);
  int blocks = nb(rng);
  std::vector<double> level(blocks);
  for (double& v : level) v = unif(rng);
  skewstab::DensityVector h = skewstab::DensityVector::zeros(n_cells);
  for (int j = 0; j < n_cells; ++j) h.values[j] = level[(j * blocks) / n_cells];
  return h;
}

inline skewstab::FiberAtoms random_atoms(int max_atoms, std::mt19937_64& rng,
                                         bool signed_atoms = false) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::uniform_int_distribution<int> na(0, max_atoms);
  skewstab::FiberAtoms f;
  int np = na(rng);
  for (int i = 0; i < np; ++i) f.pos.push_back({unif(rng), 0.05 + unif(rng)});
  if (signed_atoms) {
    int nn = na(rng);
    for (int i = 0; i < nn; ++i) f.neg.push_back({unif(rng), 0.05 + unif(rng)});
  }
  return f;
}

}  // namespace oracles
