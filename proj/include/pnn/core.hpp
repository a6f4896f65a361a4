#pragma once

#include <cstddef>
#include <optional>

#include "pnn/network.hpp"
#include "pnn/window_state.hpp"

namespace pnn {

// Weights for Model II runs; a null Plasticity means static weights.
struct Plasticity {
  const PlasticityConfig* config = nullptr;
  const PlasticState* state = nullptr;
};

// v_i plus weighted kernel contributions of every spike in the window.
// Throws std::out_of_range for an invalid neuron index.
double synaptic_influx(const WindowState& state, const NetworkConfig& cfg, std::size_t neuron,
                       Plasticity plastic = {});

// activation(influx) * r(theta - age of own last spike); r(theta) = 1 when silent.
double firing_rate(const WindowState& state, const NetworkConfig& cfg, std::size_t neuron, Plasticity plastic = {});

// Drift every age down by dt and drop spikes whose age reaches 0.
// Throws std::invalid_argument for negative or non-finite dt.
WindowState advance(WindowState state, double dt);

// Prepend a fresh spike (age theta) to `unit`.
WindowState apply_spike(WindowState state, std::size_t unit);

// Signed lag (pre spike time - post spike time) for a spike of `firing_unit`
// now against the latest spike of the other end of `synapse`; empty when
// the counterpart has no spike in the window or the synapse is an autapse.
std::optional<double> stdp_lag(const WindowState& state, const NetworkConfig& cfg, std::size_t synapse,
                               std::size_t firing_unit);

// Level update for every plastic synapse incident to `firing_unit`.  Must be
// called with the pre-spike state.
PlasticState stdp_update(PlasticState plastic, const PlasticityConfig& pcfg, const NetworkConfig& cfg,
                         const WindowState& state, std::size_t firing_unit);

}  // namespace pnn
