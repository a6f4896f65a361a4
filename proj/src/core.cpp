#include "pnn/core.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace pnn {

double synaptic_influx(const WindowState& state, const NetworkConfig& cfg, std::size_t neuron, Plasticity plastic) {
  if (neuron >= cfg.num_neurons())
    throw std::out_of_range("synaptic_influx: neuron index " + std::to_string(neuron) + " out of range");
  const double theta = cfg.theta();
  double influx = cfg.neurons()[neuron].background;
  for (std::size_t s : cfg.incoming(neuron)) {
    const auto& syn = cfg.synapses()[s];
    auto ages = state.ages(syn.pre);
    if (ages.empty()) continue;
    double sum = 0;
    for (double x : ages) sum += evaluate(syn.kernel, theta - x, theta);
    influx += synapse_weight(cfg, s, plastic.config, plastic.state) * sum;
  }
  return influx;
}

double firing_rate(const WindowState& state, const NetworkConfig& cfg, std::size_t neuron, Plasticity plastic) {
  double j = synaptic_influx(state, cfg, neuron, plastic);
  const auto& spec = cfg.neurons()[neuron];
  std::size_t unit = cfg.neuron_unit(neuron);
  double since = state.count(unit) == 0 ? cfg.theta() : cfg.theta() - state.latest(unit);
  return evaluate(spec.activation, j) * evaluate(spec.refractory, since);
}

WindowState advance(WindowState state, double dt) {
  if (!(dt >= 0) || !std::isfinite(dt)) throw std::invalid_argument("advance: dt must be finite and >= 0");
  if (dt == 0) return state;
  for (auto& ages : state.ages_) {
    for (double& a : ages) a -= dt;
    while (!ages.empty() && ages.back() <= 0) ages.pop_back();
  }
  return state;
}

WindowState apply_spike(WindowState state, std::size_t unit) {
  auto& ages = state.ages_.at(unit);
  ages.insert(ages.begin(), state.theta_);
  return state;
}

std::optional<double> stdp_lag(const WindowState& state, const NetworkConfig& cfg, std::size_t synapse,
                               std::size_t firing_unit) {
  const auto& syn = cfg.synapses()[synapse];
  std::size_t post_unit = cfg.neuron_unit(syn.post);
  if (post_unit == syn.pre) return std::nullopt;
  const double theta = cfg.theta();
  if (firing_unit == post_unit) {
    if (state.count(syn.pre) == 0) return std::nullopt;
    return -(theta - state.latest(syn.pre));
  }
  if (firing_unit == syn.pre) {
    if (state.count(post_unit) == 0) return std::nullopt;
    return theta - state.latest(post_unit);
  }
  return std::nullopt;
}

PlasticState stdp_update(PlasticState plastic, const PlasticityConfig& pcfg, const NetworkConfig& cfg,
                         const WindowState& state, std::size_t firing_unit) {
  if (pcfg.empty()) return plastic;
  for (std::size_t s : cfg.incident(firing_unit)) {
    int p = pcfg.plastic_index(s);
    if (p < 0) continue;
    auto lag = stdp_lag(state, cfg, s, firing_unit);
    if (!lag) continue;
    auto& level = plastic.levels[static_cast<std::size_t>(p)];
    for (const auto& rule : pcfg.synapses()[static_cast<std::size_t>(p)].rules) {
      if (rule.level == level && *lag > rule.lag_lower && *lag <= rule.lag_upper) {
        level = rule.target;
        break;
      }
    }
  }
  return plastic;
}

}  // namespace pnn
