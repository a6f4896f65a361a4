#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include "pnn/core.hpp"
#include "pnn/stats.hpp"

namespace pnn {

// firing_rate, silenced once the neuron holds `level` spikes in its window.
double truncated_rate(const WindowState& state, const NetworkConfig& cfg, std::size_t neuron, std::size_t level,
                      Plasticity plastic = {});

struct CouplingStats {
  std::size_t level = 0;   // truncation level n
  std::size_t blocks = 0;  // K, number of theta-blocks simulated
  double horizon = 0.0;    // theta * K
  // Maximal intervals on which the full and truncated processes differ.
  std::vector<std::pair<double, double>> split_intervals;
  double mismatch_length = 0.0;  // |T_K|
  Estimate probability;          // |T_K| / (theta K) with batch-means error
  std::size_t splits = 0;        // agree -> differ transitions
  std::size_t merges = 0;        // differ -> agree transitions
};

// Runs the full process and its neuron-truncated version from a common empty
// start, driven by the same candidate stream, and measures exactly how long
// they disagree.  Throws std::invalid_argument for level == 0 or blocks == 0.
CouplingStats simulate_coupled(const NetworkConfig& cfg, std::size_t level, std::size_t blocks, std::uint64_t seed,
                               std::size_t batches = 32);

// C n^{-(n+1)/2} e^{alpha n} with C = (2N / sqrt(pi)) exp(theta (sum of source
// rates + sum of rate bounds)) and alpha = (1 + ln(theta * max rate bound)) / 2.
double truncation_bound(const NetworkConfig& cfg, std::size_t level);

// Upper bound on the stationary density of the component with window counts
// `component` (sources first): prod rate_k^{m_k} prod bound_i^{n_i} exp(-theta sum of source rates).
double density_bound(const NetworkConfig& cfg, const std::vector<std::size_t>& component);

}  // namespace pnn
