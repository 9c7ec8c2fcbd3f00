#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace skewstab {

enum class Command { invariant, norms, sweep, verify, rate };

std::string command_name(Command c);

struct NumericsConfig {
  int n_cells = 4096;
  int branches = 40;
  double tol = 1e-8;
  int max_iter = 10000;
  double merge_eps = 1e-6;
};

struct DeltaSpec {
  double start = 0.125;  // 2^-3
  double ratio = 0.5;
  int count = 8;
};

struct SweepSpec {
  nlohmann::json family;  // name string or {"name", "params"}
  DeltaSpec deltas;
};

struct RunConfig {
  Command command = Command::invariant;
  nlohmann::json map;    // fixture name string or custom map object
  nlohmann::json fiber;  // {"type", "params"}
  std::optional<std::string> measure_path;  // norms: analyze a stored measure
  NumericsConfig numerics;
  std::optional<SweepSpec> sweep;
  std::string output_dir = ".";
  std::uint64_t seed = 0;
  int rate_trials = 6;

  nlohmann::json to_json() const;
};

// Configuration error carrying the offending field path.
struct ConfigError : std::runtime_error {
  std::string field;
  ConfigError(std::string field_, const std::string& what)
      : std::runtime_error("config field \"" + field_ + "\": " + what),
        field(std::move(field_)) {}
};

RunConfig parse_config(const nlohmann::json& doc);
RunConfig parse_config(const std::string& text);

// Dispatches the command and writes report.json plus the command-specific
// CSV artifacts under config.output_dir. Returns the process exit status:
// 0 success, 2 numeric non-convergence (1 = config/IO errors, raised as
// exceptions by the caller).
int run(const RunConfig& config);

// RFC-4180 CSV with a header row and 17 significant digits.
void export_csv(const std::vector<std::string>& header,
                const std::vector<std::vector<double>>& rows,
                const std::string& path);

}  // namespace skewstab
