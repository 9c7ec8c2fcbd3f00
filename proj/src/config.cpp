#include "skewstab/config.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "skewstab/fixtures.hpp"
#include "skewstab/parallel.hpp"
#include "skewstab/stability.hpp"
#include "skewstab/transfer.hpp"

namespace skewstab {

namespace fs = std::filesystem;

std::string command_name(Command c) {
  switch (c) {
    case Command::invariant: return "invariant";
    case Command::norms: return "norms";
    case Command::sweep: return "sweep";
    case Command::verify: return "verify";
    case Command::rate: return "rate";
  }
  return "?";
}

namespace {

Command parse_command(const std::string& s) {
  if (s == "invariant") return Command::invariant;
  if (s == "norms") return Command::norms;
  if (s == "sweep") return Command::sweep;
  if (s == "verify") return Command::verify;
  if (s == "rate") return Command::rate;
  throw ConfigError("command",
                    "must be one of invariant|norms|sweep|verify|rate");
}

bool power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

}  // namespace

RunConfig parse_config(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("<document>", e.what());
  }
  return parse_config(doc);
}

RunConfig parse_config(const nlohmann::json& doc) {
  RunConfig cfg;
  if (!doc.is_object()) throw ConfigError("<document>", "must be a JSON object");
  if (!doc.contains("command")) throw ConfigError("command", "missing");
  cfg.command = parse_command(doc.at("command").get<std::string>());

  if (doc.contains("numerics")) {
    const auto& num = doc.at("numerics");
    cfg.numerics.n_cells = num.value("n_cells", cfg.numerics.n_cells);
    cfg.numerics.branches = num.value("branches", cfg.numerics.branches);
    cfg.numerics.tol = num.value("tol", cfg.numerics.tol);
    cfg.numerics.max_iter = num.value("max_iter", cfg.numerics.max_iter);
    cfg.numerics.merge_eps = num.value("merge_eps", cfg.numerics.merge_eps);
  }
  if (cfg.numerics.n_cells < 16 || !power_of_two(cfg.numerics.n_cells))
    throw ConfigError("numerics.n_cells", "must be >= 16 and a power of two");
  if (!(cfg.numerics.tol > 0.0)) throw ConfigError("numerics.tol", "must be > 0");
  if (cfg.numerics.branches < 1)
    throw ConfigError("numerics.branches", "must be >= 1");
  if (cfg.numerics.max_iter < 1)
    throw ConfigError("numerics.max_iter", "must be >= 1");

  const bool needs_system = cfg.command == Command::invariant ||
                            cfg.command == Command::norms ||
                            cfg.command == Command::rate;
  if (doc.contains("system")) {
    const auto& sys = doc.at("system");
    if (sys.contains("map")) cfg.map = sys.at("map");
    if (sys.contains("fiber")) cfg.fiber = sys.at("fiber");
    if (sys.contains("measure"))
      cfg.measure_path = sys.at("measure").get<std::string>();
  }
  if (needs_system && cfg.map.is_null() && !cfg.measure_path)
    throw ConfigError("system.map", "missing (required by command " +
                                        command_name(cfg.command) + ")");
  if (cfg.fiber.is_null())
    cfg.fiber = {{"type", "linear_y"}, {"params", {{"alpha", 0.5}}}};

  // validate fixture names eagerly so errors carry the field path
  if (cfg.map.is_string()) {
    const auto names = map_fixture_names();
    std::string name = cfg.map.get<std::string>();
    if (std::find(names.begin(), names.end(), name) == names.end()) {
      std::ostringstream os;
      os << "unknown fixture \"" << name << "\"; available:";
      for (const auto& n : names) os << " " << n;
      throw ConfigError("system.map", os.str());
    }
  }

  const bool needs_sweep =
      cfg.command == Command::sweep || cfg.command == Command::verify;
  if (doc.contains("sweep")) {
    SweepSpec sw;
    const auto& j = doc.at("sweep");
    if (!j.contains("family")) throw ConfigError("sweep.family", "missing");
    sw.family = j.at("family");
    if (j.contains("deltas")) {
      const auto& d = j.at("deltas");
      sw.deltas.start = d.value("start", sw.deltas.start);
      sw.deltas.ratio = d.value("ratio", sw.deltas.ratio);
      sw.deltas.count = d.value("count", sw.deltas.count);
    }
    if (!(sw.deltas.start > 0.0 && sw.deltas.start < 1.0))
      throw ConfigError("sweep.deltas.start", "must be in (0,1)");
    if (!(sw.deltas.ratio > 0.0 && sw.deltas.ratio < 1.0))
      throw ConfigError("sweep.deltas.ratio", "must be in (0,1)");
    if (sw.deltas.count < 1) throw ConfigError("sweep.deltas.count", "must be >= 1");
    cfg.sweep = std::move(sw);
  } else if (needs_sweep) {
    throw ConfigError("sweep", "missing (required by command " +
                                   command_name(cfg.command) + ")");
  }

  cfg.output_dir = doc.value("output_dir", cfg.output_dir);
  cfg.seed = doc.value("seed", cfg.seed);
  cfg.rate_trials = doc.value("rate_trials", cfg.rate_trials);
  return cfg;
}

nlohmann::json RunConfig::to_json() const {
  nlohmann::json j;
  j["command"] = command_name(command);
  nlohmann::json sys;
  if (!map.is_null()) sys["map"] = map;
  sys["fiber"] = fiber;
  if (measure_path) sys["measure"] = *measure_path;
  j["system"] = sys;
  j["numerics"] = {{"n_cells", numerics.n_cells},
                   {"branches", numerics.branches},
                   {"tol", numerics.tol},
                   {"max_iter", numerics.max_iter},
                   {"merge_eps", numerics.merge_eps}};
  if (sweep) {
    j["sweep"] = {{"family", sweep->family},
                  {"deltas",
                   {{"start", sweep->deltas.start},
                    {"ratio", sweep->deltas.ratio},
                    {"count", sweep->deltas.count}}}};
  }
  j["output_dir"] = output_dir;
  j["seed"] = seed;
  j["rate_trials"] = rate_trials;
  return j;
}

void export_csv(const std::vector<std::string>& header,
                const std::vector<std::vector<double>>& rows,
                const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  for (std::size_t i = 0; i < header.size(); ++i)
    out << (i ? "," : "") << header[i];
  out << "\r\n";
  char buf[64];
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", row[i]);
      out << (i ? "," : "") << buf;
    }
    out << "\r\n";
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

namespace {

struct System {
  BranchedMap map;
  FiberMap fiber;
};

System build_system(const RunConfig& cfg) {
  System sys;
  if (cfg.map.is_string())
    sys.map = make_map(cfg.map.get<std::string>(), cfg.numerics.branches);
  else
    sys.map = map_from_json(cfg.map);
  sys.fiber = fiber_from_json(cfg.fiber, sys.map);
  return sys;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path);
}

void write_history_csv(const std::vector<IterationRecord>& history,
                       const std::string& path) {
  std::vector<std::vector<double>> rows;
  for (const auto& rec : history)
    rows.push_back({static_cast<double>(rec.n), rec.residual, rec.l1, rec.s1,
                    rec.variation});
  export_csv({"n", "residual", "l1", "s1", "variation"}, rows, path);
}

// L1 distance of the computed marginal to a known invariant density, when the
// fixture has one
std::optional<double> reference_density_error(const std::string& map_name,
                                              const DensityVector& marginal) {
  const int n = marginal.n_cells;
  auto dist = [&](auto&& ref) {
    double s = 0.0;
    for (int j = 0; j < n; ++j)
      s += std::abs(marginal.values[j] - ref((j + 0.5) / n));
    return s / n;
  };
  if (map_name == "gauss")
    return dist([](double x) { return 1.0 / ((1.0 + x) * std::log(2.0)); });
  if (map_name == "doubling" || map_name == "linear_2pow" ||
      map_name == "luroth_dyadic")
    return dist([](double) { return 1.0; });
  return std::nullopt;
}

int run_invariant(const RunConfig& cfg, const fs::path& out) {
  System sys = build_system(cfg);
  std::string map_name = cfg.map.is_string() ? cfg.map.get<std::string>() : "custom";
  SkewProduct F = make_skew_product(sys.map, sys.fiber);
  FixedPointResult fp = fixed_point(F, cfg.numerics.n_cells, cfg.numerics.tol,
                                    cfg.numerics.max_iter);
  NormReport norms = norm_s1(fp.measure);

  nlohmann::json rep;
  rep["command"] = "invariant";
  rep["map"] = map_name;
  rep["fiber"] = sys.fiber.name;
  rep["converged"] = fp.converged;
  rep["iterations"] = fp.iterations;
  rep["residual"] = fp.residual;
  rep["rate_estimate"] = fp.rate_estimate;
  rep["mass_defect"] = fp.mass_defect;
  rep["tail_bound"] = F.base.tail();
  rep["norms"] = {{"l1", norms.l1},
                  {"s1", norms.s1},
                  {"bv_marginal", norms.bv_marginal},
                  {"variation", norms.variation}};
  auto ref_err = reference_density_error(map_name, fp.measure.marginal);
  if (ref_err) rep["marginal_l1_error_vs_reference"] = *ref_err;

  std::vector<std::vector<double>> marg;
  for (int j = 0; j < fp.measure.n_cells; ++j)
    marg.push_back({(j + 0.5) / fp.measure.n_cells, fp.measure.marginal.values[j]});
  export_csv({"x", "density"}, marg, (out / "marginal.csv").string());
  write_history_csv(fp.history, (out / "residuals.csv").string());
  write_text((out / "measure.json").string(), measure_to_json(fp.measure));
  write_text((out / "report.json").string(), rep.dump(2));

  std::ostringstream line;
  line << "invariant " << map_name << ": residual=" << fp.residual
       << " iterations=" << fp.iterations;
  if (ref_err) line << " l1_error_vs_reference=" << *ref_err;
  std::cout << line.str() << "\n";
  return fp.converged ? 0 : 2;
}

int run_norms(const RunConfig& cfg, const fs::path& out) {
  DiscretizedMeasure mu;
  std::string source;
  int status = 0;
  if (cfg.measure_path) {
    std::ifstream in(*cfg.measure_path);
    if (!in) throw std::runtime_error("cannot open " + *cfg.measure_path);
    std::stringstream ss;
    ss << in.rdbuf();
    mu = measure_from_json(ss.str());
    source = *cfg.measure_path;
  } else {
    System sys = build_system(cfg);
    SkewProduct F = make_skew_product(sys.map, sys.fiber);
    FixedPointResult fp = fixed_point(F, cfg.numerics.n_cells, cfg.numerics.tol,
                                      cfg.numerics.max_iter);
    mu = std::move(fp.measure);
    source = "invariant measure";
    if (!fp.converged) status = 2;
  }
  NormReport norms = norm_s1(mu);
  nlohmann::json rep;
  rep["command"] = "norms";
  rep["source"] = source;
  rep["norms"] = {{"l1", norms.l1},
                  {"s1", norms.s1},
                  {"bv_marginal", norms.bv_marginal},
                  {"variation", norms.variation}};
  rep["consistent"] = consistent(mu);
  write_text((out / "report.json").string(), rep.dump(2));
  write_measure_csv(mu, (out / "measure.csv").string());
  write_text((out / "measure.json").string(), measure_to_json(mu));
  std::cout << "norms: l1=" << norms.l1 << " s1=" << norms.s1
            << " variation=" << norms.variation << "\n";
  return status;
}

int run_rate(const RunConfig& cfg, const fs::path& out) {
  System sys = build_system(cfg);
  SkewProduct F = make_skew_product(sys.map, sys.fiber);
  FixedPointResult fp = fixed_point(F, cfg.numerics.n_cells, cfg.numerics.tol,
                                    cfg.numerics.max_iter);
  std::mt19937_64 rng(cfg.seed);
  RateReport rate = equilibrium_rate(F, fp.measure, cfg.rate_trials, rng);

  nlohmann::json rep;
  rep["command"] = "rate";
  rep["converged"] = fp.converged;
  rep["rho2"] = rate.rho2;
  rep["c2"] = rate.c2;
  rep["decay_observed"] = rate.decay_observed;
  rep["trials_used"] = rate.trials_used;
  rep["per_trial"] = rate.per_trial;
  if (!rate.decay_observed) rep["diagnostic"] = "spectral-gap violation: no decay fitted";
  write_history_csv(fp.history, (out / "residuals.csv").string());
  write_text((out / "report.json").string(), rep.dump(2));
  std::cout << "rate: rho2=" << rate.rho2
            << (rate.decay_observed ? "" : " (decay not observed)") << "\n";
  return fp.converged && rate.decay_observed ? 0 : 2;
}

int run_verify(const RunConfig& cfg, const fs::path& out) {
  PerturbationFamily fam =
      family_from_json(cfg.sweep->family, cfg.numerics.branches);
  auto deltas = geometric_deltas(cfg.sweep->deltas.start, cfg.sweep->deltas.ratio,
                                 cfg.sweep->deltas.count);
  UConditionReport u = verify_u_conditions(fam, deltas);
  AConditionReport a = verify_a_conditions(fam, deltas, cfg.numerics.n_cells,
                                           30, cfg.seed);

  nlohmann::json rep;
  rep["command"] = "verify";
  rep["family"] = fam.name;
  rep["u"] = {{"modulus_ok", u.modulus_ok}, {"all_ok", u.all_ok}};
  nlohmann::json urows = nlohmann::json::array();
  for (const auto& row : u.rows)
    urows.push_back({{"delta", row.delta},
                     {"u21", row.u21},
                     {"u22", row.u22},
                     {"u23", row.u23},
                     {"r", row.r},
                     {"reciprocal_defect", row.reciprocal_defect},
                     {"ok", row.ok}});
  rep["u"]["rows"] = urows;
  rep["a"] = {{"sup_lambda", a.sup_lambda},
              {"sup_d", a.sup_d},
              {"sup_alpha4", a.sup_alpha4},
              {"sup_u4", a.sup_u4},
              {"ok", a.ok}};
  nlohmann::json arows = nlohmann::json::array();
  for (const auto& row : a.rows)
    arows.push_back({{"delta", row.delta},
                     {"lambda_fit", row.lambda_fit},
                     {"d_fit", row.d_fit},
                     {"alpha4", row.alpha4},
                     {"u4", row.u4},
                     {"ly_ok", row.ly_ok}});
  rep["a"]["rows"] = arows;
  write_text((out / "report.json").string(), rep.dump(2));
  std::cout << "verify " << fam.name << ": U=" << (u.all_ok ? "pass" : "fail")
            << " A=" << (a.ok ? "pass" : "fail") << "\n";
  return 0;
}

int run_sweep(const RunConfig& cfg, const fs::path& out) {
  PerturbationFamily fam =
      family_from_json(cfg.sweep->family, cfg.numerics.branches);
  auto deltas = geometric_deltas(cfg.sweep->deltas.start, cfg.sweep->deltas.ratio,
                                 cfg.sweep->deltas.count);
  StabilityReport rep = stability_sweep(fam, deltas, cfg.numerics.n_cells,
                                        cfg.numerics.tol, cfg.numerics.max_iter,
                                        cfg.rate_trials, cfg.seed);

  std::vector<std::vector<double>> rows;
  for (const auto& r : rep.rows)
    rows.push_back({r.delta, r.diff_l1, r.variation, r.gap, r.c1_bound, r.ratio,
                    r.converged ? 1.0 : 0.0});
  export_csv({"delta", "diff_l1", "variation", "gap", "c1_bound", "ratio",
              "converged"},
             rows, (out / "sweep.csv").string());

  nlohmann::json j;
  j["command"] = "sweep";
  j["family"] = fam.name;
  j["pass"] = rep.pass;
  j["ratio_bounded"] = rep.ratio_bounded;
  j["no_increasing_trend"] = rep.no_increasing_trend;
  j["all_converged"] = rep.all_converged;
  j["b_u"] = rep.b_u;
  j["c1"] = rep.c1;
  j["rho2"] = rep.rho2;
  j["d1_surrogate"] = rep.d1_surrogate;
  nlohmann::json jrows = nlohmann::json::array();
  for (const auto& r : rep.rows)
    jrows.push_back({{"delta", r.delta},
                     {"diff_l1", r.diff_l1},
                     {"variation", r.variation},
                     {"gap", r.gap},
                     {"c1_bound", r.c1_bound},
                     {"ratio", r.ratio},
                     {"converged", r.converged},
                     {"predicted_bound", r.predicted_bound},
                     {"u3_positive", r.u3_positive}});
  j["rows"] = jrows;
  write_text((out / "report.json").string(), j.dump(2));

  std::cout << "sweep " << fam.name << ": " << (rep.pass ? "PASS" : "FAIL")
            << " max_ratio=" << rep.d1_surrogate << " b_u=" << rep.b_u
            << " rho2=" << rep.rho2 << "\n";
  return rep.all_converged ? 0 : 2;
}

}  // namespace

int run(const RunConfig& config) {
  apply_thread_cap();
  fs::path out(config.output_dir);
  std::error_code ec;
  fs::create_directories(out, ec);
  switch (config.command) {
    case Command::invariant: return run_invariant(config, out);
    case Command::norms: return run_norms(config, out);
    case Command::rate: return run_rate(config, out);
    case Command::verify: return run_verify(config, out);
    case Command::sweep: return run_sweep(config, out);
  }
  return 1;
}

}  // namespace skewstab
