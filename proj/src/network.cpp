#include "pnn/network.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace pnn {

namespace {

bool finite(double x) { return std::isfinite(x); }

std::string neuron_path(std::size_t i) { return "neurons[" + std::to_string(i) + "]"; }

void validate_kernel(const Kernel& k, const std::string& path) {
  if (const auto* c = std::get_if<ConstantKernel>(&k); c && !(finite(c->value) && c->value >= 0))
    throw ConfigError(path + ": constant kernel value must be finite and >= 0");
  if (const auto* c = std::get_if<LinearKernel>(&k); c && !(finite(c->slope) && c->slope >= 0))
    throw ConfigError(path + ": linear kernel slope must be finite and >= 0");
  if (const auto* c = std::get_if<TriangularKernel>(&k)) {
    if (!(finite(c->height) && c->height >= 0))
      throw ConfigError(path + ": triangular kernel height must be finite and >= 0");
    if (!(c->peak >= 0 && c->peak <= 1))
      throw ConfigError(path + ": triangular kernel peak must lie in [0, 1]");
  }
  if (const auto* c = std::get_if<AlphaBumpKernel>(&k); c && !(finite(c->amplitude) && c->amplitude >= 0))
    throw ConfigError(path + ": alpha_bump amplitude must be finite and >= 0");
}

}  // namespace

NetworkConfig::NetworkConfig(double theta, std::vector<SourceSpec> sources, std::vector<NeuronSpec> neurons,
                             std::vector<Synapse> synapses)
    : theta_(theta), sources_(std::move(sources)), neurons_(std::move(neurons)), synapses_(std::move(synapses)) {
  validate();
  incoming_.resize(neurons_.size());
  incident_.resize(num_units());
  for (std::size_t s = 0; s < synapses_.size(); ++s) {
    const auto& syn = synapses_[s];
    incoming_[syn.post].push_back(s);
    std::size_t post_unit = neuron_unit(syn.post);
    incident_[post_unit].push_back(s);
    if (syn.pre != post_unit) incident_[syn.pre].push_back(s);
  }
}

void NetworkConfig::validate() const {
  if (!(finite(theta_) && theta_ > 0)) throw ConfigError("theta: must be finite and > 0");
  for (std::size_t k = 0; k < sources_.size(); ++k) {
    if (!(finite(sources_[k].rate) && sources_[k].rate >= 0))
      throw ConfigError("sources[" + std::to_string(k) + "].rate: must be finite and >= 0");
  }
  for (std::size_t i = 0; i < neurons_.size(); ++i) {
    const auto& n = neurons_[i];
    double lo = lower_bound(n.activation);
    double hi = upper_bound(n.activation);
    if (!(finite(lo) && finite(hi) && lo > 0 && lo <= hi))
      throw ConfigError(neuron_path(i) + ".activation: bounds must satisfy 0 < lower <= upper < inf");
    if (const auto* lg = std::get_if<LogisticActivation>(&n.activation); lg && !(finite(lg->gain) && finite(lg->midpoint)))
      throw ConfigError(neuron_path(i) + ".activation: gain and midpoint must be finite");
    if (const auto* lc = std::get_if<LinearClippedActivation>(&n.activation);
        lc && !(finite(lc->slope) && finite(lc->intercept)))
      throw ConfigError(neuron_path(i) + ".activation: slope and intercept must be finite");
    // Sampled check that the declared bounds hold.
    for (int j = -400; j <= 400; ++j) {
      double x = j * 0.25;
      double y = evaluate(n.activation, x);
      if (!(y >= lo && y <= hi))
        throw ConfigError(neuron_path(i) + ".activation: value at influx " + std::to_string(x) +
                          " leaves the declared bounds");
    }
    if (!finite(n.background)) throw ConfigError(neuron_path(i) + ".background: must be finite");
    if (const auto* h = std::get_if<HardRefractory>(&n.refractory); h && !(h->period > 0 && h->period < theta_))
      throw ConfigError(neuron_path(i) + ".refractory.period: must lie in (0, theta) so that r(s) = 1 for s >= theta");
  }
  for (std::size_t s = 0; s < synapses_.size(); ++s) {
    const auto& syn = synapses_[s];
    std::string path = "synapses[" + std::to_string(s) + "]";
    if (syn.post >= neurons_.size()) throw ConfigError(path + ".post: neuron index out of range");
    if (syn.pre >= num_units()) throw ConfigError(path + ".pre: unit index out of range");
    if (!finite(syn.weight)) throw ConfigError(path + ".weight: must be finite");
    validate_kernel(syn.kernel, path + ".kernel");
  }
}

double NetworkConfig::source_rate_sum() const {
  double s = 0;
  for (const auto& src : sources_) s += src.rate;
  return s;
}

double NetworkConfig::rate_bound_sum() const {
  double s = 0;
  for (const auto& n : neurons_) s += upper_bound(n.activation);
  return s;
}

double NetworkConfig::total_candidate_rate() const { return source_rate_sum() + rate_bound_sum(); }

double NetworkConfig::max_rate_bound() const {
  double m = 0;
  for (const auto& n : neurons_) m = std::max(m, upper_bound(n.activation));
  return m;
}

double NetworkConfig::max_rate() const {
  double m = max_rate_bound();
  for (const auto& src : sources_) m = std::max(m, src.rate);
  return m;
}

PlasticityConfig::PlasticityConfig(const NetworkConfig& network, std::vector<PlasticSynapse> synapses)
    : synapses_(std::move(synapses)), index_(network.synapses().size(), -1) {
  for (std::size_t p = 0; p < synapses_.size(); ++p) {
    const auto& ps = synapses_[p];
    std::string path = "plasticity[" + std::to_string(p) + "]";
    if (ps.synapse >= network.synapses().size()) throw ConfigError(path + ".synapse: index out of range");
    if (index_[ps.synapse] != -1) throw ConfigError(path + ".synapse: configured twice");
    index_[ps.synapse] = static_cast<int>(p);
    if (ps.levels.empty()) throw ConfigError(path + ".levels: must not be empty");
    if (!std::is_sorted(ps.levels.begin(), ps.levels.end()))
      throw ConfigError(path + ".levels: must be non-decreasing");
    for (double g : ps.levels)
      if (!finite(g)) throw ConfigError(path + ".levels: must be finite");
    int count = static_cast<int>(ps.levels.size());
    if (ps.initial_level < 1 || ps.initial_level > count)
      throw ConfigError(path + ".initial_level: must lie in 1.." + std::to_string(count));
    for (std::size_t r = 0; r < ps.rules.size(); ++r) {
      const auto& rule = ps.rules[r];
      std::string rpath = path + ".rules[" + std::to_string(r) + "]";
      if (rule.level < 1 || rule.level > count) throw ConfigError(rpath + ".level: out of range");
      if (rule.target < 1 || rule.target > count) throw ConfigError(rpath + ".target: out of range");
      if (!(finite(rule.lag_lower) && finite(rule.lag_upper) && rule.lag_lower < rule.lag_upper))
        throw ConfigError(rpath + ": need finite lag_lower < lag_upper");
      learning_window_ = std::max({learning_window_, std::abs(rule.lag_lower), std::abs(rule.lag_upper)});
      for (std::size_t o = 0; o < r; ++o) {
        const auto& other = ps.rules[o];
        if (other.level != rule.level) continue;
        if (rule.lag_lower < other.lag_upper && other.lag_lower < rule.lag_upper)
          throw ConfigError(rpath + ": lag interval overlaps rules[" + std::to_string(o) + "] for the same level");
      }
    }
  }
  if (!(learning_window_ < network.theta()))
    throw ConfigError("plasticity: learning window " + std::to_string(learning_window_) + " must be < theta");
}

PlasticState initial_plastic_state(const PlasticityConfig& config) {
  PlasticState s;
  for (const auto& ps : config.synapses()) s.levels.push_back(ps.initial_level);
  return s;
}

double synapse_weight(const NetworkConfig& network, std::size_t synapse, const PlasticityConfig* plasticity,
                      const PlasticState* plastic) {
  if (plasticity && plastic) {
    int p = plasticity->plastic_index(synapse);
    if (p >= 0) {
      const auto& ps = plasticity->synapses()[static_cast<std::size_t>(p)];
      return ps.levels[static_cast<std::size_t>(plastic->levels[static_cast<std::size_t>(p)] - 1)];
    }
  }
  return network.synapses()[synapse].weight;
}

}  // namespace pnn
