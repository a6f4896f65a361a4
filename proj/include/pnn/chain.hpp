#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <unordered_map>
#include <utility>
#include <vector>

#include "pnn/network.hpp"
#include "pnn/sim.hpp"

namespace pnn {

// Discrete-time chain on the grid h = 1/q (theta normalised to 1).  A unit's
// window is a bit set: bit k-1 is set when a spike of age k*h is visible,
// k = 1..q, so the most recent spike is the highest set bit.
using GridMask = std::uint64_t;

inline constexpr std::size_t max_grid_resolution = 64;

// (xi - h)^+ : every age drops by h, age h expires.
inline GridMask grid_shift(GridMask mask) { return mask >> 1; }

// U xi = (1, (xi_1 - h)^+, ...): shift and add a spike of age 1.
inline GridMask grid_spike(GridMask mask, std::size_t q) { return (mask >> 1) | (GridMask{1} << (q - 1)); }

inline bool grid_head_is_one(GridMask mask, std::size_t q) { return (mask >> (q - 1)) & 1U; }

// Ages (fractions of theta) of a unit's spikes, most recent first.
std::vector<double> grid_ages(GridMask mask, std::size_t q);
// Inverse of grid_ages; throws std::invalid_argument for off-grid or unordered ages.
GridMask grid_mask(const std::vector<double>& ages, std::size_t q);

struct GridState {
  std::vector<GridMask> masks;  // one per unit, sources first
  bool operator==(const GridState&) const = default;
};

struct GridStateHash {
  std::size_t operator()(const GridState& s) const;
};

// Continuous window state F(zeta) with ages scaled back by theta.
WindowState embed_state(const GridState& s, std::size_t q, double theta);
Component component_of(const GridState& s);

class ChainSizeError : public std::runtime_error {
 public:
  ChainSizeError(std::size_t reached, std::size_t cap);
  std::size_t reached() const { return reached_; }

 private:
  std::size_t reached_;
};

struct ChainOptions {
  std::size_t q = 8;
  Truncation truncation;
  std::size_t state_cap = 2'000'000;
};

// Throws ConfigError naming the first unit whose per-step spike probability
// bound h * theta * rate exceeds 1, or an invalid resolution.
void check_grid_resolution(const NetworkConfig& cfg, std::size_t q);

// Per-unit spike probabilities out of `s`.
std::vector<double> spike_probabilities(const GridState& s, const NetworkConfig& cfg, const ChainOptions& options);

// Successors of `s` with their probabilities; units spike independently.
std::vector<std::pair<GridState, double>> transition_row(const GridState& s, const NetworkConfig& cfg,
                                                         const ChainOptions& options);

// All states V with V -> s possible under some spike pattern, one per
// (alpha_hat, alpha) in {0,1}^{M+N}.
std::vector<GridState> precursors(const GridState& s, std::size_t q);

// Probability of stepping from `from` to `to` computed directly from the
// per-unit two-outcome kernels (0 if `to` is not a successor).
double transition_probability(const GridState& from, const GridState& to, const NetworkConfig& cfg,
                              const ChainOptions& options);

class GridChain {
 public:
  std::size_t q() const { return options_.q; }
  const ChainOptions& options() const { return options_; }
  const NetworkConfig& network() const { return cfg_; }
  std::size_t size() const { return states_.size(); }
  const GridState& state(std::size_t i) const { return states_[i]; }
  // Index of `s`, or -1 when it is not reachable.
  std::ptrdiff_t index_of(const GridState& s) const;

  // Sparse rows: entries [row_start[i], row_start[i+1]) of (cols, values).
  const std::vector<std::size_t>& row_start() const { return row_start_; }
  const std::vector<std::uint32_t>& cols() const { return cols_; }
  const std::vector<double>& values() const { return values_; }

  // y = x P
  std::vector<double> left_multiply(const std::vector<double>& x) const;

 private:
  friend GridChain enumerate_states(const NetworkConfig& cfg, const ChainOptions& options);

  NetworkConfig cfg_;
  ChainOptions options_;
  std::vector<GridState> states_;
  std::unordered_map<GridState, std::uint32_t, GridStateHash> index_;
  std::vector<std::size_t> row_start_;
  std::vector<std::uint32_t> cols_;
  std::vector<double> values_;
};

// Breadth-first closure of the empty state under the transition support.
// Throws ChainSizeError once more than options.state_cap states are found.
GridChain enumerate_states(const NetworkConfig& cfg, const ChainOptions& options);

struct StationaryOptions {
  double tolerance = 1e-13;  // on successive iterates, sup norm
  std::size_t max_iterations = 1'000'000;
};

struct StationaryResult {
  std::vector<double> pi;
  std::size_t iterations = 0;
  double fixed_point_residual = 0.0;  // ||pi P - pi||_inf
  double balance_residual = 0.0;      // max over states of the precursor-form balance defect
};

class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Damped power iteration pi <- (pi + pi P) / 2.
StationaryResult stationary(const GridChain& chain, const StationaryOptions& options = {});

// Largest |pi(s) - sum_V pi(V) p(s | V)| over all states, summing over the
// precursors of each state.
double balance_residual(const GridChain& chain, const std::vector<double>& pi);

// Dense LU solve of pi (P - I) = 0, sum pi = 1; intended for small chains.
std::vector<double> dense_stationary(const GridChain& chain, std::size_t max_states = 4000);

struct EmbeddedCell {
  std::size_t index = 0;  // chain state index
  Component component;
  std::vector<std::vector<double>> ages;  // continuous ages, theta units
  double mass = 0.0;
  double density = 0.0;  // mass / (h theta)^dimension
  bool boundary = false;  // cube meets a face x_j = x_{j+1} of its simplex
};

struct Embedding {
  std::size_t q = 0;
  double theta = 1.0;
  std::map<Component, double> masses;
  std::vector<EmbeddedCell> cells;
  double boundary_mass = 0.0;
  double total_mass = 0.0;

  double mass(const Component& c) const {
    auto it = masses.find(c);
    return it == masses.end() ? 0.0 : it->second;
  }
  double mean_total_count() const;
};

Embedding embed(const GridChain& chain, const std::vector<double>& pi);

// Sparse triplets "row col value" followed by nothing else.
void write_chain_triplets(std::ostream& out, const GridChain& chain);
// "index<TAB>ages of unit 0<TAB>..." with comma-separated ages.
void write_chain_legend(std::ostream& out, const GridChain& chain);

}  // namespace pnn
