#include "skewstab/measure.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace skewstab {

namespace {

// Convex piecewise-linear function of one variable, exact breakpoint
// representation: values v[i] at breakpoints x[i] (ascending), slope s_left
// before x[0] and s_right after x.back(). Interpolated linearly in between.
struct ConvexPL {
  std::vector<double> x;
  std::vector<double> v;
  double s_left = 0.0;
  double s_right = 0.0;

  static ConvexPL zero() { return {{0.0}, {0.0}, 0.0, 0.0}; }

  double eval(double t) const {
    if (t <= x.front()) return v.front() + s_left * (t - x.front());
    if (t >= x.back()) return v.back() + s_right * (t - x.back());
    auto it = std::upper_bound(x.begin(), x.end(), t);
    std::size_t i = static_cast<std::size_t>(it - x.begin());
    double slope = (v[i] - v[i - 1]) / (x[i] - x[i - 1]);
    return v[i - 1] + slope * (t - x[i - 1]);
  }

  // J += w * |t - c|
  void add_abs(double c, double w) {
    if (std::find(x.begin(), x.end(), c) == x.end()) {
      double vc = eval(c);
      auto it = std::upper_bound(x.begin(), x.end(), c);
      std::size_t i = static_cast<std::size_t>(it - x.begin());
      x.insert(x.begin() + i, c);
      v.insert(v.begin() + i, vc);
    }
    for (std::size_t i = 0; i < x.size(); ++i) v[i] += w * std::abs(x[i] - c);
    s_left -= w;
    s_right += w;
  }

  void shift(double dc) {
    for (double& xi : x) xi += dc;
  }

  // In-place inf-convolution with |.|: replaces the regions of subgradient
  // outside [-1, 1] by rays of slope -1 / +1 (Lipschitz envelope). Values on
  // the untouched middle region are preserved exactly.
  void infconv_abs() {
    const std::size_t m = x.size();
    // outgoing slope after breakpoint i
    auto out_slope = [&](std::size_t i) {
      return i + 1 < m ? (v[i + 1] - v[i]) / (x[i + 1] - x[i]) : s_right;
    };
    auto in_slope = [&](std::size_t i) {
      return i > 0 ? (v[i] - v[i - 1]) / (x[i] - x[i - 1]) : s_left;
    };

    std::size_t lo = 0;
    if (s_left < -1.0) {
      while (lo < m && out_slope(lo) <= -1.0) ++lo;
      assert(lo < m && "function decreasing with slope < -1 everywhere");
    }
    std::size_t hi = m - 1;
    if (s_right > 1.0) {
      while (hi > lo && in_slope(hi) >= 1.0) --hi;
    }
    if (lo > 0 || hi + 1 < m) {
      x = std::vector<double>(x.begin() + lo, x.begin() + hi + 1);
      v = std::vector<double>(v.begin() + lo, v.begin() + hi + 1);
    }
    s_left = std::max(s_left, -1.0);
    s_right = std::min(s_right, 1.0);
  }
};

}  // namespace

double dual_norm(std::vector<std::pair<double, double>> support) {
  // merge identical positions, drop empty
  std::sort(support.begin(), support.end());
  std::vector<std::pair<double, double>> nodes;
  for (const auto& [y, c] : support) {
    if (!nodes.empty() && nodes.back().first == y)
      nodes.back().second += c;
    else
      nodes.emplace_back(y, c);
  }
  const std::size_t m = nodes.size();
  if (m == 0) return 0.0;
  if (m == 1) return std::abs(nodes[0].second);

  // Chain program over edge flows g_k (k = 0..m-2):
  //   minimize sum_k |c_k + g_{k-1} - g_k| + sum_k d_k |g_k|
  // with g_{-1} = g_{m-1} = 0; this is the LP dual of the bounded-Lipschitz
  // test-function problem, so its optimum equals sup over admissible h.
  ConvexPL J = ConvexPL::zero();
  J.add_abs(nodes[0].second, 1.0);
  J.add_abs(0.0, nodes[1].first - nodes[0].first);
  for (std::size_t k = 1; k + 1 < m; ++k) {
    J.infconv_abs();
    J.shift(nodes[k].second);
    J.add_abs(0.0, nodes[k + 1].first - nodes[k].first);
  }
  J.infconv_abs();
  return J.eval(-nodes[m - 1].second);
}

double FiberAtoms::pos_mass() const {
  double s = 0.0;
  for (const auto& a : pos) s += a.w;
  return s;
}

double FiberAtoms::neg_mass() const {
  double s = 0.0;
  for (const auto& a : neg) s += a.w;
  return s;
}

void FiberAtoms::scale(double factor) {
  assert(factor > 0.0);
  for (auto& a : pos) a.w *= factor;
  for (auto& a : neg) a.w *= factor;
}

namespace {

double coalesce_list(std::vector<WeightedAtom>& atoms, double eps, int cap) {
  atoms.erase(std::remove_if(atoms.begin(), atoms.end(),
                             [](const WeightedAtom& a) { return a.w <= 0.0; }),
              atoms.end());
  if (atoms.empty()) return 0.0;
  std::sort(atoms.begin(), atoms.end(),
            [](const WeightedAtom& a, const WeightedAtom& b) { return a.y < b.y; });

  // merge runs of atoms with consecutive gaps <= eps
  std::vector<WeightedAtom> merged;
  double run_w = atoms[0].w, run_wy = atoms[0].w * atoms[0].y;
  double last_y = atoms[0].y;
  for (std::size_t i = 1; i < atoms.size(); ++i) {
    if (atoms[i].y - last_y <= eps) {
      run_w += atoms[i].w;
      run_wy += atoms[i].w * atoms[i].y;
    } else {
      merged.push_back({run_wy / run_w, run_w});
      run_w = atoms[i].w;
      run_wy = atoms[i].w * atoms[i].y;
    }
    last_y = atoms[i].y;
  }
  merged.push_back({run_wy / run_w, run_w});

  double slack = 0.0;
  if (static_cast<int>(merged.size()) > cap) {
    // keep the heaviest, absorb the rest into the nearest kept atom
    std::vector<std::size_t> order(merged.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return merged[a].w > merged[b].w;
    });
    std::vector<char> keep(merged.size(), 0);
    for (int i = 0; i < cap; ++i) keep[order[i]] = 1;

    std::vector<double> ky, kw, kwy;
    std::vector<std::size_t> kidx;
    for (std::size_t i = 0; i < merged.size(); ++i)
      if (keep[i]) {
        kidx.push_back(i);
        ky.push_back(merged[i].y);
        kw.push_back(merged[i].w);
        kwy.push_back(merged[i].w * merged[i].y);
      }
    for (std::size_t i = 0; i < merged.size(); ++i) {
      if (keep[i]) continue;
      auto it = std::lower_bound(ky.begin(), ky.end(), merged[i].y);
      std::size_t j = static_cast<std::size_t>(it - ky.begin());
      if (j == ky.size() ||
          (j > 0 && merged[i].y - ky[j - 1] < ky[j] - merged[i].y))
        --j;
      slack += merged[i].w * std::abs(merged[i].y - ky[j]);
      kw[j] += merged[i].w;
      kwy[j] += merged[i].w * merged[i].y;
    }
    merged.clear();
    for (std::size_t j = 0; j < kidx.size(); ++j)
      merged.push_back({kwy[j] / kw[j], kw[j]});
    std::sort(merged.begin(), merged.end(),
              [](const WeightedAtom& a, const WeightedAtom& b) { return a.y < b.y; });
  }
  atoms = std::move(merged);
  return slack;
}

}  // namespace

double FiberAtoms::coalesce(double eps, int cap) {
  return coalesce_list(pos, eps, cap) + coalesce_list(neg, eps, cap);
}

FiberAtoms delta_atom(double y, double w) {
  FiberAtoms a;
  a.pos.push_back({y, w});
  return a;
}

namespace {

void append_signed(std::vector<std::pair<double, double>>& support,
                   const FiberAtoms& f, double sign) {
  for (const auto& a : f.pos) support.emplace_back(a.y, sign * a.w);
  for (const auto& a : f.neg) support.emplace_back(a.y, -sign * a.w);
}

}  // namespace

double w1(const FiberAtoms& a, const FiberAtoms& b) {
  std::vector<std::pair<double, double>> support;
  support.reserve(a.pos.size() + a.neg.size() + b.pos.size() + b.neg.size());
  append_signed(support, a, +1.0);
  append_signed(support, b, -1.0);
  return dual_norm(std::move(support));
}

double w_norm(const FiberAtoms& a) { return w1(a, FiberAtoms{}); }

void DiscretizedMeasure::refresh_marginal() {
  marginal.n_cells = n_cells;
  marginal.values.resize(n_cells);
  for (int j = 0; j < n_cells; ++j)
    marginal.values[j] = fibers[j].signed_mass() * n_cells;
}

void DiscretizedMeasure::scale(double factor) {
  assert(factor > 0.0);
  for (auto& f : fibers) f.scale(factor);
  for (auto& v : marginal.values) v *= factor;
}

double norm_l1(const DiscretizedMeasure& mu, Exec mode) {
  std::vector<double> cell(mu.n_cells);
  for_each_index(static_cast<std::size_t>(mu.n_cells), mode, [&](std::size_t j) {
    std::vector<std::pair<double, double>> support;
    append_signed(support, mu.fibers[j], +1.0);
    cell[j] = dual_norm(std::move(support));
  });
  double s = 0.0;
  for (double c : cell) s += c;  // ascending cell order for reproducibility
  return s;
}

double variation(const DiscretizedMeasure& mu, Exec mode) {
  if (mu.n_cells < 2) return 0.0;
  std::vector<double> jump(mu.n_cells - 1);
  for_each_index(static_cast<std::size_t>(mu.n_cells - 1), mode,
                 [&](std::size_t j) {
                   std::vector<std::pair<double, double>> support;
                   append_signed(support, mu.fibers[j + 1], +1.0);
                   append_signed(support, mu.fibers[j], -1.0);
                   jump[j] = dual_norm(std::move(support));
                 });
  double s = 0.0;
  for (double c : jump) s += c;
  return s * mu.n_cells;  // restrictions live at density scale
}

NormReport norm_s1(const DiscretizedMeasure& mu, Exec mode) {
  NormReport rep;
  rep.l1 = norm_l1(mu, mode);
  rep.bv_marginal = mu.marginal.bv_norm();
  rep.s1 = rep.bv_marginal + rep.l1;
  rep.variation = variation(mu, mode);
  return rep;
}

DiscretizedMeasure product_measure(int n_cells, const FiberAtoms& nu2) {
  if (!nu2.neg.empty())
    throw std::invalid_argument("product_measure: nu2 must be positive");
  for (const auto& a : nu2.pos)
    if (a.w <= 0.0)
      throw std::invalid_argument("product_measure: nu2 has nonpositive weights");
  if (std::abs(nu2.pos_mass() - 1.0) > 1e-9)
    throw std::invalid_argument("product_measure: nu2 must be a probability");

  DiscretizedMeasure mu;
  mu.n_cells = n_cells;
  mu.fibers.resize(n_cells);
  FiberAtoms cell = nu2;
  cell.scale(1.0 / n_cells);
  for (auto& f : mu.fibers) f = cell;
  mu.refresh_marginal();
  return mu;
}

DiscretizedMeasure subtract(const DiscretizedMeasure& a,
                            const DiscretizedMeasure& b) {
  if (a.n_cells != b.n_cells)
    throw std::invalid_argument("subtract: mismatched n_cells");
  DiscretizedMeasure out;
  out.n_cells = a.n_cells;
  out.merge_eps = a.merge_eps;
  out.coalesce_slack = a.coalesce_slack + b.coalesce_slack;
  out.fibers.resize(a.n_cells);
  for (int j = 0; j < a.n_cells; ++j) {
    FiberAtoms& f = out.fibers[j];
    f.merge_eps = a.merge_eps;
    f.pos = a.fibers[j].pos;
    f.pos.insert(f.pos.end(), b.fibers[j].neg.begin(), b.fibers[j].neg.end());
    f.neg = a.fibers[j].neg;
    f.neg.insert(f.neg.end(), b.fibers[j].pos.begin(), b.fibers[j].pos.end());
  }
  out.refresh_marginal();
  return out;
}

void normalize_probability(DiscretizedMeasure& mu) {
  double mass = mu.total_mass();
  if (!(mass > 1e-12))
    throw std::runtime_error("normalize_probability: total mass is not positive");
  mu.scale(1.0 / mass);
}

bool consistent(const DiscretizedMeasure& mu, double tol) {
  if (mu.marginal.n_cells != mu.n_cells ||
      static_cast<int>(mu.fibers.size()) != mu.n_cells)
    return false;
  for (int j = 0; j < mu.n_cells; ++j) {
    double diff =
        mu.fibers[j].signed_mass() - mu.marginal.values[j] / mu.n_cells;
    if (std::abs(diff) > tol || !std::isfinite(mu.marginal.values[j]))
      return false;
  }
  return true;
}

std::string measure_to_json(const DiscretizedMeasure& mu) {
  nlohmann::json j;
  j["n_cells"] = mu.n_cells;
  j["merge_eps"] = mu.merge_eps;
  j["marginal"] = mu.marginal.values;
  nlohmann::json fibers = nlohmann::json::array();
  for (const auto& f : mu.fibers) {
    nlohmann::json pos = nlohmann::json::array();
    nlohmann::json neg = nlohmann::json::array();
    for (const auto& a : f.pos) pos.push_back({a.y, a.w});
    for (const auto& a : f.neg) neg.push_back({a.y, a.w});
    fibers.push_back({{"pos", pos}, {"neg", neg}});
  }
  j["fibers"] = std::move(fibers);
  return j.dump();
}

DiscretizedMeasure measure_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  DiscretizedMeasure mu;
  mu.n_cells = j.at("n_cells").get<int>();
  mu.merge_eps = j.value("merge_eps", 1e-6);
  mu.marginal.n_cells = mu.n_cells;
  mu.marginal.values = j.at("marginal").get<std::vector<double>>();
  const auto& fibers = j.at("fibers");
  if (static_cast<int>(fibers.size()) != mu.n_cells ||
      static_cast<int>(mu.marginal.values.size()) != mu.n_cells)
    throw std::invalid_argument("measure_from_json: inconsistent sizes");
  mu.fibers.resize(mu.n_cells);
  for (int c = 0; c < mu.n_cells; ++c) {
    mu.fibers[c].merge_eps = mu.merge_eps;
    for (const auto& a : fibers[c].at("pos"))
      mu.fibers[c].pos.push_back({a.at(0).get<double>(), a.at(1).get<double>()});
    for (const auto& a : fibers[c].at("neg"))
      mu.fibers[c].neg.push_back({a.at(0).get<double>(), a.at(1).get<double>()});
  }
  return mu;
}

void write_measure_csv(const DiscretizedMeasure& mu, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "cell,x,marginal,fiber_mass,fiber_mean,w1_to_delta0\r\n";
  char buf[512];
  for (int j = 0; j < mu.n_cells; ++j) {
    const FiberAtoms& f = mu.fibers[j];
    double mass = f.signed_mass() * mu.n_cells;
    double pw = f.pos_mass();
    double mean = 0.0;
    if (pw > 0.0) {
      for (const auto& a : f.pos) mean += a.w * a.y;
      mean /= pw;
    }
    std::vector<std::pair<double, double>> support;
    append_signed(support, f, +1.0);
    support.emplace_back(0.0, -f.signed_mass());
    double dist0 = dual_norm(std::move(support)) * mu.n_cells;
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g,%.17g\r\n", j,
                  (j + 0.5) / mu.n_cells, mu.marginal.values[j], mass, mean,
                  dist0);
    out << buf;
  }
}

}  // namespace skewstab
