#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "skewstab/config.hpp"

namespace {

int dispatch(const std::string& command, const std::string& config_path,
             const std::string& out_dir) {
  std::ifstream in(config_path);
  if (!in) {
    std::cerr << "error: cannot open config file " << config_path << "\n";
    return 1;
  }
  std::stringstream ss;
  ss << in.rdbuf();

  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(ss.str());
  } catch (const nlohmann::json::parse_error& e) {
    std::cerr << "error: config is not valid JSON: " << e.what() << "\n";
    return 1;
  }
  if (doc.contains("command")) {
    if (doc.at("command").get<std::string>() != command) {
      std::cerr << "error: config command \"" << doc.at("command").get<std::string>()
                << "\" does not match subcommand \"" << command << "\"\n";
      return 1;
    }
  } else {
    doc["command"] = command;
  }
  if (!out_dir.empty()) doc["output_dir"] = out_dir;

  try {
    skewstab::RunConfig cfg = skewstab::parse_config(doc);
    return skewstab::run(cfg);
  } catch (const skewstab::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"skewstab: invariant measures and statistical stability of "
               "skew products over branched interval maps"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  const char* names[] = {"invariant", "norms", "sweep", "verify", "rate"};
  const char* descs[] = {
      "compute the invariant measure of the configured system",
      "norms and path variation of a measure (stored or computed)",
      "quantitative stability sweep over a perturbation family",
      "check the perturbation-family conditions numerically",
      "estimate the convergence-to-equilibrium rate"};
  for (int i = 0; i < 5; ++i) {
    auto* sub = app.add_subcommand(names[i], descs[i]);
    sub->add_option("--config", config_path, "JSON configuration file")
        ->required();
    sub->add_option("--out", out_dir, "output directory (overrides config)");
  }

  CLI11_PARSE(app, argc, argv);
  return dispatch(app.get_subcommands().front()->get_name(), config_path, out_dir);
}
