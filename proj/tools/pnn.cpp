#include <cstdint>
#include <exception>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "pnn/harness.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Stationary distributions of bounded-memory Poisson neuron networks"};
  app.require_subcommand(1, 1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  bool quiet = false;

  for (const char* name : {"simulate", "couple", "chain", "analytic", "verify"}) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "override run.seed");
    sub->add_option("--out", out_dir, "output directory (default: output.dir of the config)");
    sub->add_flag("--quiet", quiet, "do not echo the resolved config");
  }
  CLI11_PARSE(app, argc, argv);
  const std::string suite_text = app.get_subcommands().front()->get_name();

  try {
    pnn::ExperimentConfig cfg = pnn::load_config(config_path);
    if (seed) cfg.run.seed = *seed;
    if (!out_dir.empty()) cfg.output_dir = out_dir;
    if (!quiet) std::cout << pnn::config_to_text(cfg);

    auto suite = pnn::parse_suite(suite_text);
    auto result = pnn::run_suite(cfg, suite, cfg.output_dir);
    if (!quiet)
      for (const auto& f : result.files) std::cout << "wrote " << f.string() << '\n';
    if (suite == pnn::Suite::verify) {
      std::cout << std::left << std::setw(58) << "check" << std::setw(14) << "value" << std::setw(4) << ""
                << std::setw(14) << "limit" << "result\n";
      for (const auto& c : result.checks)
        std::cout << std::left << std::setw(58) << c.name << std::setw(14) << std::setprecision(6) << c.value
                  << std::setw(4) << c.relation << std::setw(14) << c.limit << (c.passed ? "PASS" : "FAIL") << '\n';
      std::cout << (result.passed() ? "all checks passed" : "some checks FAILED") << '\n';
      return result.passed() ? 0 : 1;
    }
    return 0;
  } catch (const pnn::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
}
