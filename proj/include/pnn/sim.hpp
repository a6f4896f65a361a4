#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <vector>

#include "pnn/core.hpp"
#include "pnn/rng.hpp"
#include "pnn/stats.hpp"

namespace pnn {

enum class SpikeKind { source, neuron };

struct Event {
  double time = 0.0;
  std::size_t unit = 0;
  SpikeKind kind = SpikeKind::source;
  bool operator==(const Event&) const = default;
};

struct EventLog {
  std::vector<Event> events;
  std::uint64_t seed = 0;
  double horizon = 0.0;
  bool operator==(const EventLog&) const = default;
};

// Per-unit caps on window spike counts: a neuron (source) holding `neuron`
// (`source`) spikes in its window is silenced.
struct Truncation {
  std::optional<std::size_t> neuron;
  std::optional<std::size_t> source;
  bool operator==(const Truncation&) const = default;
};

// A point of the dominating Poisson field: `position` is uniform on
// [0, total candidate rate) and selects a unit interval (sources first,
// then neurons with widths equal to their rate bounds).
struct Candidate {
  std::uint64_t index = 0;
  double time = 0.0;
  double position = 0.0;
};

class CandidateStream {
 public:
  CandidateStream(double total_rate, std::uint64_t seed) : total_rate_(total_rate), rng_(seed) {}

  // Candidate times are strictly increasing; an empty network yields +inf.
  Candidate next();
  const Candidate& peek();

 private:
  double total_rate_;
  KeyedRandom rng_;
  std::uint64_t counter_ = 0;
  double time_ = 0.0;
  std::optional<Candidate> pending_;
};

struct PlasticSetup {
  const PlasticityConfig* config = nullptr;
  PlasticState initial;
};

// Exact simulation of the window process by thinning the candidate stream.
// The simulator itself draws no randomness; it reacts to candidates so that
// several processes can be driven by one stream.
class Simulator {
 public:
  Simulator(const NetworkConfig& cfg, WindowState initial, Truncation truncation = {}, PlasticSetup plastic = {});

  double time() const { return time_; }
  const WindowState& state() const { return state_; }
  const PlasticState& plastic() const { return plastic_; }

  // Deterministic drift to time t >= time().
  void advance_to(double t);

  // Drift to the candidate time, then accept or reject it.
  std::optional<Event> offer(const Candidate& c);

  // Current intensity of `unit` including truncation.
  double intensity(std::size_t unit) const;

 private:
  const NetworkConfig* cfg_;
  Truncation truncation_;
  const PlasticityConfig* pcfg_;
  PlasticState plastic_;
  WindowState state_;
  double time_ = 0.0;
};

struct SimulationOptions {
  Truncation truncation;
  PlasticSetup plastic;
};

// Throws ConfigError when the state does not match the network or T < 0.
EventLog simulate(const NetworkConfig& cfg, const WindowState& initial, double horizon, std::uint64_t seed,
                  const SimulationOptions& options = {});

void write_events(std::ostream& out, const EventLog& log);

// Window count per unit.
using Component = std::vector<std::size_t>;

struct SamplingOptions {
  double horizon = 1e4;
  double burn_in = 50.0;
  double stride = 0.25;  // 0 selects theta / 4
  std::uint64_t seed = 1;
  std::size_t batches = 32;
  SimulationOptions simulation;
};

inline constexpr std::size_t component_cap = 64;

struct ComponentMassEstimate {
  std::map<Component, Estimate> masses;
  Estimate overflow;  // components with more than component_cap spikes in total
  std::size_t samples = 0;
  double burn_in = 0.0;
  double stride = 0.0;

  double mass(const Component& c) const {
    auto it = masses.find(c);
    return it == masses.end() ? 0.0 : it->second.mean;
  }
  Estimate estimate(const Component& c) const {
    auto it = masses.find(c);
    return it == masses.end() ? Estimate{} : it->second;
  }
  double total() const;
};

// Throws std::invalid_argument for burn_in >= horizon or a degenerate grid.
ComponentMassEstimate estimate_component_masses(const NetworkConfig& cfg, const SamplingOptions& options);

struct DensityHistogram {
  std::size_t unit = 0;
  std::vector<double> edges;       // bin edges on [0, theta]
  std::vector<Estimate> conditional;  // density of the age given the component
  std::vector<Estimate> joint;        // stationary density on the component
  Estimate component_mass;
  std::size_t samples = 0;
  std::size_t hits = 0;
};

// `component` must have total count 1.  Throws std::invalid_argument when no
// sample falls in the component.
DensityHistogram estimate_density_1d(const NetworkConfig& cfg, const Component& component, std::size_t bins,
                                     const SamplingOptions& options);

// Time after which two states on a common clock agree, assuming no further
// spikes: the largest age found in one state but not the other (0 if equal).
double disagreement_horizon(const WindowState& a, const WindowState& b);

struct MergeCurve {
  std::vector<double> times;
  std::vector<double> unmerged;  // fraction of replications not merged by each time
  std::vector<double> sigma;
  std::size_t replications = 0;
};

// Coupled runs from `a` and `b` driven by the same candidate stream; the
// unmerged fraction bounds the total-variation distance between the laws.
MergeCurve ergodicity_diagnostic(const NetworkConfig& cfg, const WindowState& a, const WindowState& b,
                                 const std::vector<double>& times, std::size_t replications, std::uint64_t seed,
                                 const Truncation& truncation = {});

// Densest window state consistent with the network: hard-refractory neurons
// hold as many spikes as their period allows, other units `spikes_per_unit`.
WindowState saturated_state(const NetworkConfig& cfg, std::size_t spikes_per_unit);

}  // namespace pnn
