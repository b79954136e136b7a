// fedad: federated anomaly-detection experiment driver.
//
// Usage: fedad <train|sweep-rho|compare-comm|eval> --config <path>
//        [--seed N] [--out DIR] [--rho R] [--no-compress]

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "fedad/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Federated time-series anomaly detection with Top-k gradient "
               "compression"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<double> rho;
  bool no_compress = false;

  for (const char* mode : {"train", "sweep-rho", "compare-comm", "eval"}) {
    auto* sub = app.add_subcommand(mode);
    sub->add_option("--config", config_path, "JSON experiment config")
        ->required();
    sub->add_option("--seed", seed, "override config seed");
    sub->add_option("--out", out_dir, "override output directory");
    sub->add_option("--rho", rho, "override compression percentage (0,100]");
    sub->add_flag("--no-compress", no_compress,
                  "disable compression (rho = 100)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    auto cfg = fedad::load_config(config_path);
    cfg.mode = app.get_subcommands().front()->get_name();
    if (seed) {
      cfg.seed = *seed;
      cfg.federation.seed = *seed;
    }
    if (out_dir) cfg.out_dir = *out_dir;
    if (rho) cfg.federation.compressor.rho = *rho;
    if (no_compress) cfg.federation.compressor.rho = 100.0;
    if (cfg.federation.compressor.rho <= 0.0 ||
        cfg.federation.compressor.rho > 100.0)
      throw fedad::ConfigError("--rho must be in (0, 100]");
    return fedad::run_experiment(cfg);
  } catch (const fedad::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
