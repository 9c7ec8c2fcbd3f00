#include "skewstab/transfer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace skewstab {

SkewProduct make_skew_product(BranchedMap base, FiberMap fiber, int k_max) {
  FiberConstants c = find_h3_constants(fiber, base, k_max);
  return SkewProduct{std::move(base), std::move(fiber), c};
}

DiscretizedMeasure pushforward(const SkewProduct& F, const DiscretizedMeasure& mu,
                               Exec mode) {
  const int n = mu.n_cells;
  DiscretizedMeasure out;
  out.n_cells = n;
  out.merge_eps = mu.merge_eps;
  out.fibers.resize(n);
  std::vector<double> slack(n, 0.0);

  for_each_index(static_cast<std::size_t>(n), mode, [&](std::size_t t) {
    const double gamma = (static_cast<double>(t) + 0.5) / n;
    FiberAtoms& cell = out.fibers[t];
    cell.merge_eps = mu.merge_eps;
    for (const Branch& br : F.base.branches) {  // ascending branch order
      if (!br.image_contains(gamma)) continue;
      const double x = std::clamp(br.inverse(gamma), br.a, br.b);
      const double d = br.derivative(x);
      if (d == 0.0) continue;
      const double g = 1.0 / std::abs(d);
      const FiberAtoms& src = mu.fibers[mu.marginal.cell_of(x)];
      for (const auto& a : src.pos)
        cell.pos.push_back({F.fiber.action(x, a.y), a.w * g});
      for (const auto& a : src.neg)
        cell.neg.push_back({F.fiber.action(x, a.y), a.w * g});
    }
    slack[t] = cell.coalesce(mu.merge_eps);
  });

  out.refresh_marginal();
  out.coalesce_slack = mu.coalesce_slack;
  for (double s : slack) out.coalesce_slack += s;
  return out;
}

FixedPointResult fixed_point(const SkewProduct& F, int n_cells, double tol,
                             int max_iter, Exec mode) {
  return fixed_point(F, product_measure(n_cells, delta_atom(0.5)), tol,
                     max_iter, mode);
}

FixedPointResult fixed_point(const SkewProduct& F, DiscretizedMeasure init,
                             double tol, int max_iter, Exec mode) {
  if (!(tol > 0.0)) throw std::invalid_argument("fixed_point: tol must be > 0");
  if (std::abs(init.total_mass() - 1.0) > 1e-8)
    throw std::invalid_argument("fixed_point: init must be a probability");

  FixedPointResult res;
  res.measure = std::move(init);
  std::vector<double> residuals;
  for (int it = 1; it <= max_iter; ++it) {
    DiscretizedMeasure next = pushforward(F, res.measure, mode);
    res.mass_defect = 1.0 - next.total_mass();
    normalize_probability(next);
    double r = norm_l1(subtract(next, res.measure), mode);
    NormReport norms = norm_s1(next, mode);
    res.history.push_back({it, r, norms.l1, norms.s1, norms.variation});
    residuals.push_back(r);
    res.measure = std::move(next);
    res.iterations = it;
    res.residual = r;
    if (r <= tol) {
      res.converged = true;
      break;
    }
  }

  // rate fit on log residuals, transient discarded
  std::size_t first = residuals.size() > 8 ? 5 : 0;
  std::size_t last = residuals.size();
  while (last > first && residuals[last - 1] <= 0.0) --last;
  if (last - first >= 3) {
    res.rate_estimate = std::exp(log_linear_fit(residuals, first, last).first);
  }
  return res;
}

std::pair<double, double> log_linear_fit(const std::vector<double>& values,
                                         std::size_t first, std::size_t last) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t n = 0;
  for (std::size_t i = first; i < last; ++i) {
    if (!(values[i] > 0.0)) continue;
    double x = static_cast<double>(i);
    double y = std::log(values[i]);
    sx += x; sy += y; sxx += x * x; sxy += x * y;
    ++n;
  }
  if (n < 2) return {0.0, 0.0};
  double denom = n * sxx - sx * sx;
  if (denom == 0.0) return {0.0, sy / n};
  double slope = (n * sxy - sx * sy) / denom;
  double intercept = (sy - slope * sx) / n;
  return {slope, intercept};
}

namespace {

// window start: first index where successive slopes of the log-norm sequence
// differ by less than 5%
std::size_t transient_end(const std::vector<double>& norms) {
  std::vector<double> slopes;
  for (std::size_t i = 0; i + 1 < norms.size(); ++i) {
    if (norms[i] <= 0.0 || norms[i + 1] <= 0.0) break;
    slopes.push_back(std::log(norms[i + 1]) - std::log(norms[i]));
  }
  for (std::size_t i = 0; i + 1 < slopes.size(); ++i) {
    if (std::abs(slopes[i + 1] - slopes[i]) < 0.05 * std::abs(slopes[i]))
      return i;
  }
  return slopes.size() > 4 ? slopes.size() / 2 : 0;
}

DiscretizedMeasure random_product_probability(int n_cells, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::uniform_int_distribution<int> natoms(1, 3);
  FiberAtoms nu2;
  int k = natoms(rng);
  double total = 0.0;
  for (int i = 0; i < k; ++i) {
    double w = 0.1 + unif(rng);
    nu2.pos.push_back({unif(rng), w});
    total += w;
  }
  nu2.scale(1.0 / total);
  DiscretizedMeasure nu = product_measure(n_cells, nu2);

  // random marginal: step blocks plus a linear tilt; dyadic steps alone die
  // in finitely many iterations of the dyadic fixtures, the tilt keeps a
  // component along the slowest mode of the base dynamics
  int blocks = 4;
  std::vector<double> level(blocks);
  for (int b = 0; b < blocks; ++b) level[b] = 0.25 + unif(rng);
  double tilt = 0.8 * (unif(rng) - 0.5);
  for (int j = 0; j < n_cells; ++j) {
    double x = (j + 0.5) / n_cells;
    double f = level[(j * blocks) / n_cells] * (1.0 + tilt * (x - 0.5));
    for (auto& a : nu.fibers[j].pos) a.w *= f;
  }
  nu.refresh_marginal();
  normalize_probability(nu);
  return nu;
}

}  // namespace

RateReport equilibrium_rate(const SkewProduct& F,
                            const DiscretizedMeasure& fixed_point_measure,
                            int trials, std::mt19937_64& rng, int n_max,
                            Exec mode) {
  if (trials < 1) throw std::invalid_argument("equilibrium_rate: trials < 1");
  RateReport rep;
  double log_rate_sum = 0.0;
  std::vector<std::vector<double>> trial_norms;

  for (int t = 0; t < trials; ++t) {
    DiscretizedMeasure nu = random_product_probability(fixed_point_measure.n_cells, rng);
    DiscretizedMeasure eta = subtract(nu, fixed_point_measure);
    std::vector<double> norms{norm_l1(eta, mode)};
    if (norms[0] < 1e-12) continue;  // test measure coincides with the fixed point
    for (int n = 1; n <= n_max; ++n) {
      eta = pushforward(F, eta, mode);
      double r = norm_l1(eta, mode);
      norms.push_back(r);
      if (r < 1e-13 * std::max(1.0, norms[0])) break;
    }
    std::size_t w0 = transient_end(norms);
    auto [slope, intercept] = log_linear_fit(norms, w0, norms.size());
    (void)intercept;
    if (slope >= 0.0) {
      rep.decay_observed = false;
      rep.per_trial.push_back(std::exp(slope));
      ++rep.trials_used;
      trial_norms.push_back(std::move(norms));
      continue;
    }
    rep.per_trial.push_back(std::exp(slope));
    log_rate_sum += slope;
    ++rep.trials_used;
    trial_norms.push_back(std::move(norms));
  }

  if (rep.trials_used == 0) {
    rep.decay_observed = false;
    return rep;
  }
  int decaying = 0;
  double sum = 0.0;
  for (double r : rep.per_trial)
    if (r < 1.0) { sum += std::log(r); ++decaying; }
  rep.decay_observed = decaying == rep.trials_used && decaying > 0;
  rep.rho2 = decaying > 0 ? std::exp(sum / decaying) : 1.0;

  // C2 surrogate for the convergence-to-equilibrium inequality
  for (std::size_t t = 0; t < trial_norms.size(); ++t) {
    const auto& norms = trial_norms[t];
    double s1_0 = norms[0];  // ||eta||_1 <= ||eta||_{S1}; conservative scale
    for (std::size_t n = 0; n < norms.size(); ++n) {
      double bound = std::pow(rep.rho2, static_cast<double>(n)) * s1_0;
      if (bound > 0.0) rep.c2 = std::max(rep.c2, norms[n] / bound);
    }
  }
  return rep;
}

LyReport lasota_yorke_check(const SkewProduct& F, const DiscretizedMeasure& mu,
                            int n_steps, Exec mode) {
  LyReport rep;
  rep.constants = F.constants;

  double lo = mu.marginal.values.empty() ? 0.0 : mu.marginal.values[0];
  double hi = lo;
  for (double v : mu.marginal.values) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  rep.constant_marginal = (hi - lo) <= 1e-9 * std::max(1.0, std::abs(hi));

  const double mu_l1 = norm_l1(mu, mode);
  const double v0 = variation(mu, mode);
  const double slack =
      2.0 * mu.merge_eps * mu.n_cells + F.base.tail() * std::max(1.0, v0) + 1e-9;

  // orbit of F itself: weak norm and S1 norm
  std::vector<double> s1_seq;
  {
    DiscretizedMeasure nu = mu;
    double prev_l1 = mu_l1;
    rep.l1_non_increasing = true;
    NormReport norms0 = norm_s1(nu, mode);
    s1_seq.push_back(norms0.s1);
    rep.rows.push_back({0, norms0.l1, norms0.s1, v0,
                        v0 + F.constants.u4 / (1.0 - F.constants.alpha4) * mu_l1});
    for (int n = 1; n <= n_steps; ++n) {
      nu = pushforward(F, nu, mode);
      NormReport norms = norm_s1(nu, mode);
      s1_seq.push_back(norms.s1);
      if (norms.l1 > prev_l1 + F.base.tail() + 1e-6) rep.l1_non_increasing = false;
      prev_l1 = norms.l1;
      rep.rows.push_back({n, norms.l1, norms.s1, 0.0, 0.0});
    }
  }

  // orbit of the k-th iterate: variation against the contraction bound
  rep.variation_bounded = true;
  {
    DiscretizedMeasure nu = mu;
    const double a4 = F.constants.alpha4;
    const double tail_term = F.constants.u4 / (1.0 - a4) * mu_l1;
    double a4n = 1.0;
    for (int n = 1; n <= n_steps; ++n) {
      for (int j = 0; j < F.constants.k; ++j) nu = pushforward(F, nu, mode);
      a4n *= a4;
      double vn = variation(nu, mode);
      double bound = a4n * v0 + tail_term;
      rep.rows[n].variation = vn;
      rep.rows[n].variation_bound = bound;
      if (rep.constant_marginal && vn > bound + slack) rep.variation_bounded = false;
    }
  }

  // fitted surrogates for the strong-norm inequality
  double c_inf = s1_seq.back();
  for (std::size_t i = s1_seq.size() >= 3 ? s1_seq.size() - 3 : 0;
       i < s1_seq.size(); ++i)
    c_inf = std::min(c_inf, s1_seq[i]);
  std::vector<double> excess;
  for (double s : s1_seq) excess.push_back(std::max(s - c_inf, 0.0));
  std::size_t last = excess.size();
  while (last > 0 && excess[last - 1] <= 1e-12 * std::max(1.0, s1_seq[0])) --last;
  if (last >= 3) {
    auto [slope, intercept] = log_linear_fit(excess, 0, last);
    rep.r2_fit = std::exp(slope);
    rep.big_r2_fit = s1_seq[0] > 0.0 ? std::exp(intercept) / s1_seq[0] : 0.0;
  }
  rep.c2_fit = mu_l1 > 0.0 ? std::max(0.0, c_inf / mu_l1 - 1.0) : 0.0;
  return rep;
}

}  // namespace skewstab
