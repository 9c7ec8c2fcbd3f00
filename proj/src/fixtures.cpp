#include "skewstab/fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace skewstab {

namespace {

Branch linear_branch(int index, double a, double b, double slope,
                     double value_at_a = 0.0) {
  Branch br;
  br.index = index;
  br.a = a;
  br.b = b;
  br.forward = [a, slope, value_at_a](double x) {
    return value_at_a + slope * (x - a);
  };
  br.inverse = [a, slope, value_at_a](double g) {
    return a + (g - value_at_a) / slope;
  };
  br.derivative = [slope](double) { return slope; };
  double fa = value_at_a;
  double fb = value_at_a + slope * (b - a);
  br.image_lo = std::clamp(std::min(fa, fb), 0.0, 1.0);
  br.image_hi = std::clamp(std::max(fa, fb), 0.0, 1.0);
  return br;
}

// f(x) = (p x + q) / (r x + s)
Branch moebius_branch(int index, double a, double b, double p, double q,
                      double r, double s) {
  Branch br;
  br.index = index;
  br.a = a;
  br.b = b;
  const double det = p * s - q * r;
  br.forward = [p, q, r, s](double x) { return (p * x + q) / (r * x + s); };
  br.inverse = [p, q, r, s](double g) { return (s * g - q) / (-r * g + p); };
  br.derivative = [det, r, s](double x) {
    double den = r * x + s;
    return det / (den * den);
  };
  double fa = br.forward(a);
  double fb = br.forward(b);
  br.image_lo = std::clamp(std::min(fa, fb), 0.0, 1.0);
  br.image_hi = std::clamp(std::max(fa, fb), 0.0, 1.0);
  return br;
}

BranchedMap make_doubling() {
  BranchedMap m;
  m.name = "doubling";
  m.kind = MapKind::expanding;
  m.branches.push_back(linear_branch(1, 0.0, 0.5, 2.0));
  m.branches.push_back(linear_branch(2, 0.5, 1.0, 2.0));
  m.n_truncated = 2;
  m.tail_bound = [](int) { return 0.0; };
  return m;
}

BranchedMap make_linear_2pow(int n) {
  BranchedMap m;
  m.name = "linear_2pow";
  m.kind = MapKind::expanding;
  for (int i = 1; i <= n; ++i) {
    double a = 1.0 - std::ldexp(1.0, 1 - i);
    double b = 1.0 - std::ldexp(1.0, -i);
    m.branches.push_back(linear_branch(i, a, b, std::ldexp(1.0, i)));
  }
  m.n_truncated = n;
  m.tail_bound = [](int N) { return std::ldexp(1.0, -N); };
  return m;
}

BranchedMap make_mixed_slopes(int n) {
  BranchedMap m;
  m.name = "mixed_slopes";
  m.kind = MapKind::convex;
  m.branches.push_back(linear_branch(1, 0.0, 0.5, 2.0));
  m.branches.push_back(linear_branch(2, 0.5, 0.75, 0.5));  // slow branch
  for (int i = 3; i <= n; ++i) {
    double a = 1.0 - std::ldexp(1.0, 1 - i);
    double b = 1.0 - std::ldexp(1.0, -i);
    m.branches.push_back(linear_branch(i, a, b, std::ldexp(1.0, i)));
  }
  m.n_truncated = n;
  m.tail_bound = [](int N) { return std::ldexp(1.0, -N); };
  return m;
}

BranchedMap make_gauss(int n) {
  BranchedMap m;
  m.name = "gauss";
  m.kind = MapKind::pre;
  m.n0 = 2;
  for (int i = 1; i <= n; ++i) {
    // f(x) = 1/x - i on (1/(i+1), 1/i)
    m.branches.push_back(moebius_branch(i, 1.0 / (i + 1), 1.0 / i,
                                        -static_cast<double>(i), 1.0, 1.0, 0.0));
  }
  m.n_truncated = n;
  // sum_{i>N} sup x^2 = sum_{i>N} 1/i^2 < 1/N; also bounds the tail length
  m.tail_bound = [](int N) { return 1.0 / N; };
  return m;
}

BranchedMap make_luroth_dyadic(int n) {
  BranchedMap m;
  m.name = "luroth_dyadic";
  m.kind = MapKind::expanding;
  for (int i = 1; i <= n; ++i) {
    // I_i = (2^-i, 2^{1-i}), f(x) = (t_i - x)/a_i = 2 - 2^i x, decreasing
    double a = std::ldexp(1.0, -i);
    double b = std::ldexp(1.0, 1 - i);
    m.branches.push_back(linear_branch(i, a, b, -std::ldexp(1.0, i), 1.0));
  }
  m.n_truncated = n;
  m.tail_bound = [](int N) { return std::ldexp(1.0, -N); };
  return m;
}

[[noreturn]] void unknown_name(const std::string& what, const std::string& name,
                               const std::vector<std::string>& available) {
  std::ostringstream os;
  os << "unknown " << what << " fixture \"" << name << "\"; available:";
  for (const auto& a : available) os << " " << a;
  throw std::invalid_argument(os.str());
}

}  // namespace

std::vector<std::string> map_fixture_names() {
  return {"gauss", "luroth_dyadic", "linear_2pow", "mixed_slopes", "doubling"};
}

BranchedMap make_map(const std::string& name, int n_branches) {
  if (n_branches < 1) throw std::invalid_argument("make_map: n_branches < 1");
  if (name == "doubling") return make_doubling();
  if (name == "linear_2pow") return make_linear_2pow(n_branches);
  if (name == "mixed_slopes") return make_mixed_slopes(std::max(n_branches, 3));
  if (name == "gauss") return make_gauss(n_branches);
  if (name == "luroth_dyadic") return make_luroth_dyadic(n_branches);
  unknown_name("map", name, map_fixture_names());
}

BranchedMap map_from_json(const nlohmann::json& spec) {
  BranchedMap m;
  m.name = spec.value("name", std::string("custom"));
  int index = 0;
  for (const auto& bs : spec.at("branches")) {
    ++index;
    double a = bs.at("a").get<double>();
    double b = bs.at("b").get<double>();
    if (!(0.0 <= a && a < b && b <= 1.0))
      throw std::invalid_argument("map_from_json: branch interval invalid");
    std::string kind = bs.at("kind").get<std::string>();
    const auto& p = bs.at("params");
    if (kind == "linear") {
      m.branches.push_back(linear_branch(index, a, b, p.at("slope").get<double>(),
                                         p.value("offset", 0.0)));
    } else if (kind == "moebius") {
      m.branches.push_back(moebius_branch(index, a, b, p.at("p").get<double>(),
                                          p.at("q").get<double>(),
                                          p.at("r").get<double>(),
                                          p.at("s").get<double>()));
    } else {
      throw std::invalid_argument("map_from_json: branch kind must be linear or moebius");
    }
  }
  if (m.branches.empty())
    throw std::invalid_argument("map_from_json: no branches");
  m.n_truncated = index;

  if (spec.contains("tail_bound")) {
    const auto& tb = spec.at("tail_bound");
    if (tb.at("type").get<std::string>() != "geometric")
      throw std::invalid_argument("map_from_json: tail_bound.type must be geometric");
    double ratio = tb.at("ratio").get<double>();
    double coeff = tb.value("coeff", 1.0);
    if (!(ratio >= 0.0 && ratio < 1.0))
      throw std::invalid_argument("map_from_json: tail_bound.ratio must be in [0,1)");
    m.tail_bound = [ratio, coeff](int N) {
      return ratio == 0.0 ? 0.0 : coeff * std::pow(ratio, N + 1) / (1.0 - ratio);
    };
  } else {
    m.tail_bound = [](int) { return 0.0; };
  }

  std::string kind = spec.value("kind", std::string("expanding"));
  if (kind == "expanding") m.kind = MapKind::expanding;
  else if (kind == "convex") m.kind = MapKind::convex;
  else if (kind == "pre") m.kind = MapKind::pre;
  else throw std::invalid_argument("map_from_json: kind must be expanding|convex|pre");
  m.n0 = spec.value("n0", 1);
  return m;
}

namespace {

// shared branch-interval table for per-branch fiber families
struct BranchTable {
  std::vector<double> a, b;
  int find(double x) const {
    for (std::size_t i = 0; i < a.size(); ++i)
      if (a[i] < x && x < b[i]) return static_cast<int>(i);
    // boundary / tail: snap to the nearest interval so the action stays total
    for (std::size_t i = 0; i < a.size(); ++i)
      if (a[i] <= x && x <= b[i]) return static_cast<int>(i);
    return static_cast<int>(a.size()) - 1;
  }
};

std::shared_ptr<BranchTable> table_of(const BranchedMap& map) {
  auto t = std::make_shared<BranchTable>();
  for (const Branch& br : map.branches) {
    t->a.push_back(br.a);
    t->b.push_back(br.b);
  }
  return t;
}

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

}  // namespace

std::vector<std::string> fiber_fixture_names() {
  return {"alpha_const", "lip_coeff", "linear_y"};
}

FiberMap make_fiber(const std::string& type, const nlohmann::json& params,
                    const BranchedMap& map) {
  FiberMap g;
  g.name = type;
  if (type == "alpha_const") {
    auto alphas = params.at("alphas").get<std::vector<double>>();
    if (alphas.empty()) throw std::invalid_argument("alpha_const: empty alphas");
    for (double a : alphas)
      if (!(a >= 0.0 && a < 1.0))
        throw std::invalid_argument("alpha_const: alphas must lie in [0,1)");
    auto table = table_of(map);
    auto rate = [alphas, table](double x) {
      int i = table->find(x);
      return alphas[std::min<std::size_t>(i, alphas.size() - 1)];
    };
    g.action = [rate](double x, double y) { return rate(x) * y; };
    g.per_branch = true;
    g.declared_alpha = *std::max_element(alphas.begin(), alphas.end());
    g.declared_lip = 0.0;
  } else if (type == "lip_coeff") {
    std::vector<std::pair<double, double>> coeffs;
    for (const auto& cd : params.at("coeffs"))
      coeffs.emplace_back(cd.at(0).get<double>(), cd.at(1).get<double>());
    if (coeffs.empty()) throw std::invalid_argument("lip_coeff: empty coeffs");
    double alpha_max = params.value("alpha_max", 0.9);
    if (!(alpha_max >= 0.0 && alpha_max < 1.0))
      throw std::invalid_argument("lip_coeff: alpha_max must lie in [0,1)");
    auto table = table_of(map);
    g.action = [coeffs, table, alpha_max](double x, double y) {
      int i = table->find(x);
      const auto& [c, d] = coeffs[std::min<std::size_t>(i, coeffs.size() - 1)];
      double h = std::clamp(c + d * (x - table->a[i]), 0.0, alpha_max);
      return h * y;
    };
    g.per_branch = true;
    g.declared_alpha = alpha_max;
    double lip = 0.0;
    for (const auto& [c, d] : coeffs) lip = std::max(lip, std::abs(d));
    g.declared_lip = lip;
  } else if (type == "linear_y") {
    double alpha = params.at("alpha").get<double>();
    double c = params.value("c", 0.0);
    double shift = params.value("shift", 0.0);
    if (!(alpha >= 0.0 && alpha < 1.0))
      throw std::invalid_argument("linear_y: alpha must lie in [0,1)");
    g.action = [alpha, c, shift](double x, double y) {
      return clamp01(alpha * y + c * x + shift);
    };
    g.per_branch = false;
    g.declared_alpha = alpha;
    g.declared_lip = std::abs(c);
  } else {
    unknown_name("fiber", type, fiber_fixture_names());
  }
  return g;
}

FiberMap fiber_from_json(const nlohmann::json& spec, const BranchedMap& map) {
  return make_fiber(spec.at("type").get<std::string>(),
                    spec.value("params", nlohmann::json::object()), map);
}

}  // namespace skewstab
