#include "pnn/trunc.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "pnn/sim.hpp"

namespace pnn {

double truncated_rate(const WindowState& state, const NetworkConfig& cfg, std::size_t neuron, std::size_t level,
                      Plasticity plastic) {
  if (level == 0) throw std::invalid_argument("truncated_rate: level must be >= 1");
  if (state.count(cfg.neuron_unit(neuron)) >= level) return 0.0;
  return firing_rate(state, cfg, neuron, plastic);
}

CouplingStats simulate_coupled(const NetworkConfig& cfg, std::size_t level, std::size_t blocks, std::uint64_t seed,
                               std::size_t batches) {
  if (level == 0) throw std::invalid_argument("simulate_coupled: level must be >= 1");
  if (blocks == 0) throw std::invalid_argument("simulate_coupled: need at least one block");
  batches = std::clamp<std::size_t>(batches, 1, blocks);

  CouplingStats stats;
  stats.level = level;
  stats.blocks = blocks;
  stats.horizon = cfg.theta() * static_cast<double>(blocks);
  const double end = stats.horizon;

  const auto empty = WindowState::empty(cfg.theta(), cfg.num_units());
  Simulator full(cfg, empty);
  Simulator truncated(cfg, empty, Truncation{level, std::nullopt});
  CandidateStream stream(cfg.total_candidate_rate(), seed);

  bool open = false;
  double opened_at = 0;
  auto close = [&](double t) {
    stats.split_intervals.emplace_back(opened_at, t);
    stats.mismatch_length += t - opened_at;
    ++stats.merges;
    open = false;
  };

  double now = 0;
  while (true) {
    double h = disagreement_horizon(full.state(), truncated.state());
    double next = std::min(stream.peek().time, end);
    if (h > 0 && !open) {
      open = true;
      opened_at = now;
      ++stats.splits;
    }
    if (open && now + h <= next) close(std::min(now + h, end));
    if (stream.peek().time > end) break;
    Candidate c = stream.next();
    full.offer(c);
    truncated.offer(c);
    now = c.time;
  }
  if (open) {
    // Still split at the horizon: count the tail but not as a merge.
    stats.split_intervals.emplace_back(opened_at, end);
    stats.mismatch_length += end - opened_at;
  }

  // Per-batch mismatch fractions for the error bar.
  std::vector<double> fraction(batches, 0.0);
  const double span = end / static_cast<double>(batches);
  for (auto [a, b] : stats.split_intervals) {
    for (auto k = static_cast<std::size_t>(a / span); k < batches && static_cast<double>(k) * span < b; ++k) {
      double lo = std::max(a, static_cast<double>(k) * span);
      double hi = std::min(b, static_cast<double>(k + 1) * span);
      if (hi > lo) fraction[k] += (hi - lo) / span;
    }
  }
  stats.probability = from_batches(fraction);
  stats.probability.mean = stats.mismatch_length / end;
  return stats;
}

double truncation_bound(const NetworkConfig& cfg, std::size_t level) {
  if (level == 0) throw std::invalid_argument("truncation_bound: level must be >= 1");
  const double n = static_cast<double>(level);
  const double theta = cfg.theta();
  const double c = 2.0 * static_cast<double>(cfg.num_neurons()) / std::sqrt(std::numbers::pi) *
                   std::exp(theta * (cfg.source_rate_sum() + cfg.rate_bound_sum()));
  if (c == 0) return 0.0;
  const double alpha = (1.0 + std::log(theta * cfg.max_rate_bound())) / 2.0;
  return c * std::exp(-(n + 1) / 2 * std::log(n) + alpha * n);
}

double density_bound(const NetworkConfig& cfg, const std::vector<std::size_t>& component) {
  if (component.size() != cfg.num_units()) throw std::invalid_argument("density_bound: component size mismatch");
  double log_bound = -cfg.theta() * cfg.source_rate_sum();
  double factor = 1.0;
  for (std::size_t u = 0; u < component.size(); ++u) {
    if (component[u] == 0) continue;
    double rate = cfg.is_source(u) ? cfg.sources()[u].rate
                                   : upper_bound(cfg.neurons()[u - cfg.num_sources()].activation);
    factor *= std::pow(rate, static_cast<double>(component[u]));
  }
  return factor * std::exp(log_bound);
}

}  // namespace pnn
