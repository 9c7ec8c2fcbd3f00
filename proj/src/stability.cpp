#include "skewstab/stability.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>

#include "skewstab/fixtures.hpp"

namespace skewstab {

std::vector<double> geometric_deltas(double start, double ratio, int count) {
  if (!(start > 0.0 && ratio > 0.0 && ratio < 1.0 && count >= 1))
    throw std::invalid_argument("geometric_deltas: need start > 0, 0 < ratio < 1, count >= 1");
  std::vector<double> d(count);
  double v = start;
  for (int i = 0; i < count; ++i, v *= ratio) d[i] = v;
  return d;
}

PerturbationFamily identity_family(SkewProduct base) {
  PerturbationFamily fam;
  fam.name = "identity";
  auto shared = std::make_shared<SkewProduct>(std::move(base));
  fam.at = [shared](double) { return *shared; };
  fam.r_of_delta = [](double delta) { return delta; };
  return fam;
}

PerturbationFamily linear2pow_slope_family(int branches, double fiber_alpha) {
  PerturbationFamily fam;
  fam.name = "linear_2pow_slope";
  fam.at = [branches, fiber_alpha](double delta) {
    BranchedMap base = make_map("linear_2pow", branches);
    if (delta != 0.0) {
      // same partition, slopes scaled by (1+delta); the overshoot past 1 maps
      // out of the space, so images stay (0,1) and mass leaks uniformly
      for (Branch& br : base.branches) {
        double a = br.a;
        double slope = std::ldexp(1.0, br.index) * (1.0 + delta);
        br.forward = [a, slope](double x) { return slope * (x - a); };
        br.inverse = [a, slope](double g) { return a + g / slope; };
        br.derivative = [slope](double) { return slope; };
        br.image_lo = 0.0;
        br.image_hi = 1.0;
      }
      double scale = 1.0 / (1.0 + delta);
      base.tail_bound = [scale](int N) { return scale * std::ldexp(1.0, -N); };
    }
    FiberMap g = make_fiber("linear_y", {{"alpha", fiber_alpha}}, base);
    return make_skew_product(std::move(base), std::move(g));
  };
  fam.r_of_delta = [](double delta) { return delta; };
  return fam;
}

PerturbationFamily fiber_shift_family(double alpha, double coeff) {
  PerturbationFamily fam;
  fam.name = "fiber_shift";
  fam.at = [alpha, coeff](double delta) {
    BranchedMap base = make_map("doubling");
    FiberMap g = make_fiber(
        "linear_y", {{"alpha", alpha}, {"shift", coeff * delta}}, base);
    return make_skew_product(std::move(base), std::move(g));
  };
  fam.r_of_delta = [coeff](double delta) { return coeff * delta; };
  return fam;
}

PerturbationFamily family_from_json(const nlohmann::json& spec, int branches) {
  std::string name = spec.is_string() ? spec.get<std::string>()
                                      : spec.at("name").get<std::string>();
  const nlohmann::json params =
      spec.is_object() ? spec.value("params", nlohmann::json::object())
                       : nlohmann::json::object();
  if (name == "identity") {
    BranchedMap base = params.contains("map")
                           ? (params.at("map").is_string()
                                  ? make_map(params.at("map").get<std::string>(), branches)
                                  : map_from_json(params.at("map")))
                           : make_map("doubling");
    nlohmann::json fiber_spec = params.value(
        "fiber", nlohmann::json{{"type", "linear_y"}, {"params", {{"alpha", 0.5}}}});
    FiberMap g = fiber_from_json(fiber_spec, base);
    return identity_family(make_skew_product(std::move(base), std::move(g)));
  }
  if (name == "linear_2pow_slope")
    return linear2pow_slope_family(branches, params.value("alpha", 0.5));
  if (name == "fiber_shift")
    return fiber_shift_family(params.value("alpha", 0.5), params.value("coeff", 0.1));
  throw std::invalid_argument(
      "unknown family \"" + name +
      "\"; available: identity linear_2pow_slope fiber_shift");
}

namespace {

std::vector<double> dyadic_grid(int levels) {
  std::vector<double> pts;
  for (int l = 1; l <= levels; ++l) {
    int m = 1 << l;
    for (int j = 0; j < m; ++j) pts.push_back((j + 0.5) / m);
  }
  std::sort(pts.begin(), pts.end());
  return pts;
}

}  // namespace

UConditionReport verify_u_conditions(const PerturbationFamily& fam,
                                     const std::vector<double>& deltas,
                                     const SamplingSpec& spec) {
  UConditionReport rep;
  SkewProduct F0 = fam.at(0.0);
  const auto grid = dyadic_grid(spec.x_levels);

  for (double delta : deltas) {
    SkewProduct Fd = fam.at(delta);
    UConditionRow row;
    row.delta = delta;
    row.r = fam.r_of_delta(delta);

    for (double gamma : grid) {
      double sum_diff = 0.0, sum_recip = 0.0;
      for (std::size_t i = 0; i < F0.base.branches.size() &&
                              i < Fd.base.branches.size(); ++i) {
        const Branch& b0 = F0.base.branches[i];
        const Branch& bd = Fd.base.branches[i];
        bool in0 = b0.image_contains(gamma);
        bool ind = bd.image_contains(gamma);
        if (!in0 || !ind) continue;  // shared branch images for all built-ins
        double x0 = std::clamp(b0.inverse(gamma), b0.a, b0.b);
        double xd = std::clamp(bd.inverse(gamma), bd.a, bd.b);
        double g0 = 1.0 / std::abs(b0.derivative(x0));
        double gd = 1.0 / std::abs(bd.derivative(xd));
        sum_diff += std::abs(gd - g0);
        sum_recip += gd;
        row.u22 = std::max(row.u22, std::abs(x0 - xd));
      }
      row.u21 = std::max(row.u21, sum_diff);
      row.reciprocal_defect = std::max(row.reciprocal_defect, 1.0 - sum_recip);
    }

    const auto ys = dyadic_grid(spec.y_levels);
    for (double x : grid)
      for (double y : ys)
        row.u23 = std::max(
            row.u23, std::abs(F0.fiber.action(x, y) - Fd.fiber.action(x, y)));

    row.ok = row.u21 <= row.r + 1e-12 && row.u22 <= row.r + 1e-12 &&
             row.u23 <= row.r + 1e-12;
    rep.rows.push_back(row);
  }

  // (U2) modulus: |R(delta) log delta| decreasing along delta = 2^-k
  rep.modulus_ok = true;
  double prev = 0.0;
  for (int k = 3; k <= 20; ++k) {
    double d = std::ldexp(1.0, -k);
    double v = std::abs(fam.r_of_delta(d) * std::log(d));
    if (k > 3 && v > prev + 1e-12) rep.modulus_ok = false;
    prev = v;
  }

  rep.all_ok = rep.modulus_ok;
  for (const auto& row : rep.rows) rep.all_ok = rep.all_ok && row.ok;
  return rep;
}

namespace {

DensityVector random_step_density(int n_cells, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  std::uniform_int_distribution<int> nblocks(2, 6);
  int blocks = nblocks(rng);
  DensityVector h = DensityVector::zeros(n_cells);
  std::vector<double> level(blocks);
  for (double& v : level) v = unif(rng);
  for (int j = 0; j < n_cells; ++j) h.values[j] = level[(j * blocks) / n_cells];
  return h;
}

}  // namespace

AConditionReport verify_a_conditions(const PerturbationFamily& fam,
                                     const std::vector<double>& deltas,
                                     int n_cells, int n_iter, std::uint64_t seed) {
  AConditionReport rep;
  std::mt19937_64 rng(seed);
  std::vector<DensityVector> tests;
  for (int t = 0; t < 3; ++t) tests.push_back(random_step_density(n_cells, rng));

  for (double delta : deltas) {
    SkewProduct Fd = fam.at(delta);
    AConditionRow row;
    row.delta = delta;
    row.alpha4 = Fd.constants.alpha4;
    row.u4 = Fd.constants.u4;

    double lambda_max = 0.0, d_max = 0.0;
    for (const DensityVector& h0 : tests) {
      std::vector<double> v_seq{h0.bv_norm()};
      DensityVector h = h0;
      for (int n = 1; n <= n_iter; ++n) {
        h = pf_apply(Fd.base, h);
        v_seq.push_back(h.bv_norm());
      }
      // decompose into a decaying transient over a plateau
      double v_inf = v_seq.back();
      for (std::size_t i = v_seq.size() >= 5 ? v_seq.size() - 5 : 0;
           i < v_seq.size(); ++i)
        v_inf = std::min(v_inf, v_seq[i]);
      std::vector<double> excess;
      for (double v : v_seq) excess.push_back(std::max(v - v_inf, 0.0));
      std::size_t last = excess.size();
      while (last > 0 && excess[last - 1] <= 1e-12 * std::max(1.0, v_seq[0])) --last;
      double lambda = 0.0;
      if (last >= 3) lambda = std::exp(log_linear_fit(excess, 0, last).first);
      lambda_max = std::max(lambda_max, lambda);

      const double h_l1 = h0.l1();
      double lam = std::max(lambda, 1e-6);
      for (std::size_t n = 0; n < v_seq.size(); ++n) {
        double denom = std::pow(lam, static_cast<double>(n)) * v_seq[0] + h_l1;
        if (denom > 0.0) d_max = std::max(d_max, v_seq[n] / denom);
      }
    }
    row.lambda_fit = lambda_max;
    row.d_fit = d_max;
    row.ly_ok = lambda_max < 1.0 - 1e-6 && std::isfinite(d_max);
    rep.rows.push_back(row);

    rep.sup_lambda = std::max(rep.sup_lambda, row.lambda_fit);
    rep.sup_d = std::max(rep.sup_d, row.d_fit);
    rep.sup_alpha4 = std::max(rep.sup_alpha4, row.alpha4);
    rep.sup_u4 = std::max(rep.sup_u4, row.u4);
  }

  rep.ok = rep.sup_alpha4 < 1.0;
  for (const auto& row : rep.rows) rep.ok = rep.ok && row.ly_ok;
  return rep;
}

GapResult operator_gap(const PerturbationFamily& fam, double delta,
                       const DiscretizedMeasure& mu_delta, double b_u, Exec mode) {
  SkewProduct F0 = fam.at(0.0);
  SkewProduct Fd = fam.at(delta);
  GapResult res;
  res.gap = norm_l1(
      subtract(pushforward(F0, mu_delta, mode), pushforward(Fd, mu_delta, mode)),
      mode);
  double lip0 = estimate_lip(F0.fiber, F0.base);
  res.c1_bound = (lip0 + 3.0 * b_u + 2.0) * fam.r_of_delta(delta);
  return res;
}

BuBound b_u_bound(const PerturbationFamily& fam, const std::vector<double>& deltas,
                  const std::vector<const DiscretizedMeasure*>& fixed_points) {
  if (deltas.empty() || fixed_points.size() != deltas.size())
    throw std::invalid_argument("b_u_bound: need matching non-empty deltas and fixed points");
  BuBound res;
  double sup_alpha4 = 0.0, sup_u4 = 0.0;
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    res.empirical_max = std::max(res.empirical_max, variation(*fixed_points[i]));
    SkewProduct Fd = fam.at(deltas[i]);
    sup_alpha4 = std::max(sup_alpha4, Fd.constants.alpha4);
    sup_u4 = std::max(sup_u4, Fd.constants.u4);
  }
  res.ceiling = sup_u4 / (1.0 - sup_alpha4);
  res.slack = 2.0 * fixed_points.front()->merge_eps * fixed_points.front()->n_cells;
  res.within = res.empirical_max <= res.ceiling + res.slack;
  return res;
}

StabilityReport stability_sweep(const PerturbationFamily& fam,
                                const std::vector<double>& deltas, int n_cells,
                                double tol, int max_iter, int rate_trials,
                                std::uint64_t seed, Exec mode) {
  StabilityReport rep;
  SkewProduct F0 = fam.at(0.0);
  FixedPointResult fp0 = fixed_point(F0, n_cells, tol, max_iter, mode);

  std::mt19937_64 rng(seed);
  RateReport rate = equilibrium_rate(F0, fp0.measure, rate_trials, rng, 40, mode);
  rep.rho2 = rate.rho2;

  std::vector<double> sorted = deltas;
  std::sort(sorted.begin(), sorted.end(), std::greater<>());

  struct PerDelta {
    FixedPointResult fp;
    double delta;
  };
  std::vector<PerDelta> runs;
  double mu0_min = *std::min_element(fp0.measure.marginal.values.begin(),
                                     fp0.measure.marginal.values.end());
  for (double delta : sorted) {
    SkewProduct Fd = fam.at(delta);
    runs.push_back({fixed_point(Fd, n_cells, tol, max_iter, mode), delta});
  }

  rep.b_u = variation(fp0.measure, mode);
  for (const auto& run : runs)
    rep.b_u = std::max(rep.b_u, variation(run.fp.measure, mode));
  double lip0 = estimate_lip(F0.fiber, F0.base);
  rep.c1 = lip0 + 3.0 * rep.b_u + 2.0;

  double s1_max = norm_s1(fp0.measure, mode).s1;
  for (const auto& run : runs)
    s1_max = std::max(s1_max, norm_s1(run.fp.measure, mode).s1);

  double c_surrogate = 0.0;
  rep.all_converged = fp0.converged;
  for (const auto& run : runs) {
    SweepRow row;
    row.delta = run.delta;
    row.converged = run.fp.converged;
    row.diff_l1 = norm_l1(subtract(run.fp.measure, fp0.measure), mode);
    row.variation = variation(run.fp.measure, mode);
    GapResult gap = operator_gap(fam, run.delta, run.fp.measure, rep.b_u, mode);
    row.gap = gap.gap;
    row.c1_bound = gap.c1_bound;
    double r = fam.r_of_delta(run.delta);
    double denom = r * std::abs(std::log(run.delta));
    row.ratio = denom > 0.0 ? row.diff_l1 / denom : 0.0;
    if (r > 0.0) c_surrogate = std::max(c_surrogate, row.gap / r);
    double mu_min = *std::min_element(run.fp.measure.marginal.values.begin(),
                                      run.fp.measure.marginal.values.end());
    row.u3_positive = mu_min > 0.0 && mu0_min > 0.0;
    rep.rows.push_back(row);
    rep.all_converged = rep.all_converged && row.converged;
  }

  // diagnostic overlay from the operator-gap/rate surrogates
  if (rep.rho2 > 0.0 && rep.rho2 < 1.0) {
    for (auto& row : rep.rows) {
      double N = std::floor(std::log(row.delta) / std::log(rep.rho2));
      row.predicted_bound =
          fam.r_of_delta(row.delta) * c_surrogate * N +
          2.0 * rate.c2 * s1_max * std::pow(rep.rho2, N);
    }
  }

  for (const auto& row : rep.rows)
    rep.d1_surrogate = std::max(rep.d1_surrogate, row.ratio);

  // boundedness of the ratio over the last five points; ratios at the
  // residual floor are treated as exact zeros
  const double zero_ratio = 100.0 * tol;
  std::size_t first = rep.rows.size() > 5 ? rep.rows.size() - 5 : 0;
  double rmin = 0.0, rmax = 0.0;
  bool any_nonzero = false;
  for (std::size_t i = first; i < rep.rows.size(); ++i) {
    double r = rep.rows[i].ratio;
    if (r <= zero_ratio) continue;
    if (!any_nonzero) { rmin = rmax = r; any_nonzero = true; }
    rmin = std::min(rmin, r);
    rmax = std::max(rmax, r);
  }
  rep.ratio_bounded = !any_nonzero || rmax / rmin <= 10.0;

  rep.no_increasing_trend = true;
  if (any_nonzero && rep.rows.size() >= 2) {
    std::size_t lo = first;
    double mean = 0.0;
    int cnt = 0;
    for (std::size_t i = lo; i < rep.rows.size(); ++i) { mean += rep.rows[i].ratio; ++cnt; }
    mean /= cnt;
    // least-squares slope over the last window (index = row position)
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = lo; i < rep.rows.size(); ++i) {
      double x = static_cast<double>(i - lo), y = rep.rows[i].ratio;
      sx += x; sy += y; sxx += x * x; sxy += x * y;
    }
    double denom = cnt * sxx - sx * sx;
    double slope = denom != 0.0 ? (cnt * sxy - sx * sy) / denom : 0.0;
    rep.no_increasing_trend = slope <= 0.05 * std::max(mean, zero_ratio);
  }

  rep.pass = rep.ratio_bounded && rep.no_increasing_trend;
  return rep;
}

}  // namespace skewstab
