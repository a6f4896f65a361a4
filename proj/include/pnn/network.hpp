#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "pnn/functions.hpp"

namespace pnn {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct SourceSpec {
  double rate = 1.0;
  bool operator==(const SourceSpec&) const = default;
};

struct NeuronSpec {
  Activation activation = ConstantActivation{};
  double background = 0.0;
  Refractory refractory = NoRefractory{};
  bool operator==(const NeuronSpec&) const = default;
};

// Connection from unit `pre` (global unit index) onto neuron `post`.
struct Synapse {
  std::size_t post = 0;
  std::size_t pre = 0;
  double weight = 0.0;
  Kernel kernel = ZeroKernel{};
  bool operator==(const Synapse&) const = default;
};

// Units are numbered globally: sources occupy [0, M), neurons [M, M + N).
class NetworkConfig {
 public:
  NetworkConfig() = default;
  NetworkConfig(double theta, std::vector<SourceSpec> sources, std::vector<NeuronSpec> neurons,
                std::vector<Synapse> synapses = {});

  double theta() const { return theta_; }
  std::size_t num_sources() const { return sources_.size(); }
  std::size_t num_neurons() const { return neurons_.size(); }
  std::size_t num_units() const { return sources_.size() + neurons_.size(); }

  std::size_t source_unit(std::size_t k) const { return k; }
  std::size_t neuron_unit(std::size_t i) const { return sources_.size() + i; }
  bool is_source(std::size_t unit) const { return unit < sources_.size(); }

  const std::vector<SourceSpec>& sources() const { return sources_; }
  const std::vector<NeuronSpec>& neurons() const { return neurons_; }
  const std::vector<Synapse>& synapses() const { return synapses_; }

  // Synapse indices whose post-synaptic neuron is `neuron`.
  const std::vector<std::size_t>& incoming(std::size_t neuron) const { return incoming_[neuron]; }
  // Synapse indices touching `unit` at either end.
  const std::vector<std::size_t>& incident(std::size_t unit) const { return incident_[unit]; }

  double source_rate_sum() const;
  double rate_bound_sum() const;       // sum of neuron upper bounds
  double total_candidate_rate() const;  // source_rate_sum + rate_bound_sum
  double max_rate_bound() const;        // max over neuron upper bounds (0 if none)
  double max_rate() const;              // max of all source rates and neuron upper bounds

  bool operator==(const NetworkConfig& other) const {
    return theta_ == other.theta_ && sources_ == other.sources_ && neurons_ == other.neurons_ &&
           synapses_ == other.synapses_;
  }

 private:
  void validate() const;

  double theta_ = 1.0;
  std::vector<SourceSpec> sources_;
  std::vector<NeuronSpec> neurons_;
  std::vector<Synapse> synapses_;
  std::vector<std::vector<std::size_t>> incoming_;
  std::vector<std::vector<std::size_t>> incident_;
};

// A lag rule for one current level: when the signed lag
// (pre spike time - post spike time) lies in (lag_lower, lag_upper],
// the level becomes `target`.  Levels are 1-based.
struct LagRule {
  int level = 1;
  double lag_lower = 0.0;
  double lag_upper = 0.0;
  int target = 1;
  bool operator==(const LagRule&) const = default;
};

struct PlasticSynapse {
  std::size_t synapse = 0;
  std::vector<double> levels;  // non-decreasing weight values g(1) <= ... <= g(L)
  int initial_level = 1;
  std::vector<LagRule> rules;
  bool operator==(const PlasticSynapse&) const = default;
};

class PlasticityConfig {
 public:
  PlasticityConfig() = default;
  PlasticityConfig(const NetworkConfig& network, std::vector<PlasticSynapse> synapses);

  const std::vector<PlasticSynapse>& synapses() const { return synapses_; }
  bool empty() const { return synapses_.empty(); }
  // Position of `synapse` in synapses(), or -1 for a static synapse.
  int plastic_index(std::size_t synapse) const {
    return synapse < index_.size() ? index_[synapse] : -1;
  }
  // Largest |lag| bound over all rules.
  double learning_window() const { return learning_window_; }

  bool operator==(const PlasticityConfig& other) const { return synapses_ == other.synapses_; }

 private:
  std::vector<PlasticSynapse> synapses_;
  std::vector<int> index_;
  double learning_window_ = 0.0;
};

// Current level of every plastic synapse, aligned with PlasticityConfig::synapses().
struct PlasticState {
  std::vector<int> levels;
  bool operator==(const PlasticState&) const = default;
};

PlasticState initial_plastic_state(const PlasticityConfig& config);

// Weight of `synapse` under the given plasticity (static weight when not plastic
// or when no plasticity is supplied).
double synapse_weight(const NetworkConfig& network, std::size_t synapse,
                      const PlasticityConfig* plasticity, const PlasticState* plastic);

}  // namespace pnn
