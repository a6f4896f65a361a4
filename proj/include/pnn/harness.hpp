#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pnn/analytic.hpp"
#include "pnn/network.hpp"
#include "pnn/sim.hpp"

namespace pnn {

inline constexpr int schema_version = 1;

struct RunBlock {
  double horizon = 1e4;
  double burn_in = 50.0;
  double stride = 0.0;  // 0 selects theta / 4
  std::uint64_t seed = 1;
  std::size_t batches = 32;
  std::size_t histogram_bins = 20;
  std::size_t replications = 400;        // coupled pairs for the merge curve
  double diagnostic_horizon = 40.0;      // in units of theta
  std::size_t coupling_blocks = 20000;   // theta-blocks per truncation level
  std::vector<std::size_t> truncation_levels{2, 3, 4, 5};
  bool operator==(const RunBlock&) const = default;
};

struct ChainBlock {
  std::vector<std::size_t> q{4, 8, 16};
  std::size_t state_cap = 2'000'000;
  double tolerance = 1e-13;
  std::size_t max_iterations = 1'000'000;
  std::size_t dense_limit = 2000;  // largest chain also solved directly
  bool operator==(const ChainBlock&) const = default;
};

struct ShotNoiseBlock {
  Activation activation = ConstantActivation{1.0};
  double background = 0.0;
  double weight = 0.0;
  double horizon = 1e6;
  double burn_in = 50.0;
  double stride = 10.0;
  bool operator==(const ShotNoiseBlock&) const = default;
};

struct AnalyticBlock {
  double grid_step = 1e-3;
  std::size_t n_max = 12;
  std::optional<ShotNoiseBlock> shotnoise;
  bool operator==(const AnalyticBlock&) const = default;
};

struct ExperimentConfig {
  NetworkConfig network;
  std::vector<PlasticSynapse> plasticity;
  Truncation truncation;
  RunBlock run;
  ChainBlock chain;
  AnalyticBlock analytic;
  std::string output_dir = "out";

  bool operator==(const ExperimentConfig&) const = default;
};

// Structured-text (JSON) form with every default filled in.
std::string config_to_text(const ExperimentConfig& cfg);
// Throws ConfigError naming the offending field path.
ExperimentConfig config_from_text(const std::string& text);

ExperimentConfig load_config(const std::filesystem::path& path);
void save_config(const ExperimentConfig& cfg, const std::filesystem::path& path);

// FNV-1a 64 of the canonical text form.
std::uint64_t config_hash(const ExperimentConfig& cfg);
std::string hash_hex(std::uint64_t hash);

enum class Suite { simulate, couple, chain, analytic, verify };
Suite parse_suite(const std::string& name);
std::string suite_name(Suite suite);

struct Check {
  std::string name;
  double value = 0.0;
  double limit = 0.0;
  std::string relation;  // how value is compared with limit
  bool passed = false;
};

struct SuiteResult {
  Suite suite = Suite::simulate;
  std::vector<std::filesystem::path> files;
  std::vector<Check> checks;  // only filled by verify
  bool passed() const;
};

// Runs one suite and writes its artifacts into `out_dir` (created if needed);
// every file starts with the config hash and seed.  Module errors are
// rethrown as std::runtime_error with the suite name prefixed.
SuiteResult run_suite(const ExperimentConfig& cfg, Suite suite, const std::filesystem::path& out_dir);

}  // namespace pnn
