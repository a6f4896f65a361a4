#include "pnn/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "pnn/trunc.hpp"

namespace pnn {

namespace {

constexpr std::uint32_t kTimeLane = 0;
constexpr std::uint32_t kPositionLane = 1;

void check_shape(const NetworkConfig& cfg, const WindowState& s) {
  if (s.num_units() != cfg.num_units())
    throw ConfigError("initial state has " + std::to_string(s.num_units()) + " units, network has " +
                      std::to_string(cfg.num_units()));
  if (s.theta() != cfg.theta()) throw ConfigError("initial state theta differs from network theta");
}

// Locate the unit whose interval contains `position` and the offset inside it.
std::pair<std::size_t, double> locate(const NetworkConfig& cfg, double position) {
  double lo = 0;
  for (std::size_t k = 0; k < cfg.num_sources(); ++k) {
    double hi = lo + cfg.sources()[k].rate;
    if (position < hi) return {cfg.source_unit(k), position - lo};
    lo = hi;
  }
  for (std::size_t i = 0; i < cfg.num_neurons(); ++i) {
    double hi = lo + upper_bound(cfg.neurons()[i].activation);
    if (position < hi) return {cfg.neuron_unit(i), position - lo};
    lo = hi;
  }
  // Rounding at the very top of the range: attribute to the last unit with positive width.
  for (std::size_t u = cfg.num_units(); u-- > 0;) {
    double width = cfg.is_source(u) ? cfg.sources()[u].rate
                                    : upper_bound(cfg.neurons()[u - cfg.num_sources()].activation);
    if (width > 0) return {u, width};
  }
  return {0, std::numeric_limits<double>::infinity()};
}

}  // namespace

Candidate CandidateStream::next() {
  Candidate c = peek();
  pending_.reset();
  return c;
}

const Candidate& CandidateStream::peek() {
  if (!pending_) {
    Candidate c;
    c.index = counter_;
    if (total_rate_ > 0) {
      time_ += rng_.exponential(counter_, kTimeLane, total_rate_);
      c.time = time_;
      c.position = rng_.uniform(counter_, kPositionLane) * total_rate_;
    } else {
      c.time = std::numeric_limits<double>::infinity();
    }
    ++counter_;
    pending_ = c;
  }
  return *pending_;
}

Simulator::Simulator(const NetworkConfig& cfg, WindowState initial, Truncation truncation, PlasticSetup plastic)
    : cfg_(&cfg), truncation_(truncation), pcfg_(plastic.config), plastic_(std::move(plastic.initial)),
      state_(std::move(initial)) {
  check_shape(cfg, state_);
  if (pcfg_ && plastic_.levels.size() != pcfg_->synapses().size())
    throw ConfigError("plastic state does not match the plasticity configuration");
  if (truncation_.neuron && *truncation_.neuron == 0) throw ConfigError("neuron truncation level must be >= 1");
  if (truncation_.source && *truncation_.source == 0) throw ConfigError("source truncation level must be >= 1");
}

void Simulator::advance_to(double t) {
  if (t < time_) throw std::invalid_argument("Simulator::advance_to: time must not decrease");
  state_ = advance(std::move(state_), t - time_);
  time_ = t;
}

double Simulator::intensity(std::size_t unit) const {
  if (cfg_->is_source(unit)) {
    if (truncation_.source && state_.count(unit) >= *truncation_.source) return 0.0;
    return cfg_->sources()[unit].rate;
  }
  std::size_t neuron = unit - cfg_->num_sources();
  Plasticity weights{pcfg_, pcfg_ ? &plastic_ : nullptr};
  if (truncation_.neuron) return truncated_rate(state_, *cfg_, neuron, *truncation_.neuron, weights);
  return firing_rate(state_, *cfg_, neuron, weights);
}

std::optional<Event> Simulator::offer(const Candidate& c) {
  advance_to(c.time);
  auto [unit, offset] = locate(*cfg_, c.position);
  double rate = intensity(unit);
  if (!std::isfinite(rate)) throw std::runtime_error("non-finite firing rate");
  if (!(offset < rate)) return std::nullopt;
  if (pcfg_) plastic_ = stdp_update(std::move(plastic_), *pcfg_, *cfg_, state_, unit);
  state_ = apply_spike(std::move(state_), unit);
  return Event{c.time, unit, cfg_->is_source(unit) ? SpikeKind::source : SpikeKind::neuron};
}

EventLog simulate(const NetworkConfig& cfg, const WindowState& initial, double horizon, std::uint64_t seed,
                  const SimulationOptions& options) {
  if (!(horizon >= 0) || !std::isfinite(horizon)) throw ConfigError("simulate: horizon must be finite and >= 0");
  double total = cfg.total_candidate_rate();
  if (!std::isfinite(total)) throw ConfigError("simulate: non-finite total candidate rate");
  EventLog log;
  log.seed = seed;
  log.horizon = horizon;
  Simulator sim(cfg, initial, options.truncation, options.plastic);
  CandidateStream stream(total, seed);
  while (stream.peek().time <= horizon) {
    if (auto e = sim.offer(stream.next())) log.events.push_back(*e);
  }
  return log;
}

void write_events(std::ostream& out, const EventLog& log) {
  auto precision = out.precision(17);
  out << "time\tunit\tkind\n";
  for (const auto& e : log.events)
    out << e.time << '\t' << e.unit << '\t' << (e.kind == SpikeKind::source ? "source" : "neuron") << '\n';
  out.precision(precision);
}

double ComponentMassEstimate::total() const {
  double s = overflow.mean;
  for (const auto& [c, e] : masses) s += e.mean;
  return s;
}

namespace {

struct SampleGrid {
  double first;
  double stride;
  std::size_t count;
};

SampleGrid make_grid(const NetworkConfig& cfg, const SamplingOptions& o) {
  double stride = o.stride > 0 ? o.stride : cfg.theta() / 4;
  if (!(o.burn_in >= 0 && o.burn_in < o.horizon)) throw std::invalid_argument("sampling: need 0 <= burn_in < horizon");
  if (!std::isfinite(stride) || !std::isfinite(o.horizon)) throw std::invalid_argument("sampling: degenerate grid");
  auto count = static_cast<std::size_t>(std::floor((o.horizon - o.burn_in) / stride)) + 1;
  if (count < std::max<std::size_t>(2, o.batches)) throw std::invalid_argument("sampling: degenerate grid");
  return {o.burn_in, stride, count};
}

// Simulate from the empty state and call `visit(j, state)` at every grid time.
template <class Visit>
void sample_states(const NetworkConfig& cfg, const SamplingOptions& o, const SampleGrid& grid, Visit&& visit) {
  Simulator sim(cfg, WindowState::empty(cfg.theta(), cfg.num_units()), o.simulation.truncation, o.simulation.plastic);
  CandidateStream stream(cfg.total_candidate_rate(), o.seed);
  for (std::size_t j = 0; j < grid.count; ++j) {
    double t = grid.first + static_cast<double>(j) * grid.stride;
    while (stream.peek().time <= t) sim.offer(stream.next());
    sim.advance_to(t);
    visit(j, sim.state());
  }
}

Component component_of(const WindowState& s) {
  Component c(s.num_units());
  for (std::size_t u = 0; u < c.size(); ++u) c[u] = s.count(u);
  return c;
}

}  // namespace

ComponentMassEstimate estimate_component_masses(const NetworkConfig& cfg, const SamplingOptions& options) {
  SampleGrid grid = make_grid(cfg, options);
  const std::size_t batches = std::max<std::size_t>(1, options.batches);
  const std::size_t per = grid.count / batches;
  const std::size_t used = per * batches;

  std::map<Component, std::vector<double>> counts;
  std::vector<double> overflow(batches, 0.0);
  sample_states(cfg, options, {grid.first, grid.stride, used}, [&](std::size_t j, const WindowState& s) {
    std::size_t b = j / per;
    if (s.total_count() > component_cap) {
      overflow[b] += 1;
      return;
    }
    auto& v = counts[component_of(s)];
    if (v.empty()) v.assign(batches, 0.0);
    v[b] += 1;
  });

  ComponentMassEstimate est;
  est.samples = used;
  est.burn_in = options.burn_in;
  est.stride = grid.stride;
  auto to_estimate = [&](std::vector<double>& v) {
    for (double& x : v) x /= static_cast<double>(per);
    return from_batches(v);
  };
  for (auto& [c, v] : counts) est.masses[c] = to_estimate(v);
  est.overflow = to_estimate(overflow);
  return est;
}

DensityHistogram estimate_density_1d(const NetworkConfig& cfg, const Component& component, std::size_t bins,
                                     const SamplingOptions& options) {
  if (component.size() != cfg.num_units()) throw std::invalid_argument("density_1d: component size mismatch");
  std::size_t total = 0, unit = 0;
  for (std::size_t u = 0; u < component.size(); ++u) {
    total += component[u];
    if (component[u] == 1) unit = u;
  }
  if (total != 1) throw std::invalid_argument("density_1d: component must be one-dimensional");
  if (bins == 0) throw std::invalid_argument("density_1d: need at least one bin");

  SampleGrid grid = make_grid(cfg, options);
  const std::size_t batches = std::max<std::size_t>(1, options.batches);
  const std::size_t per = grid.count / batches;
  const std::size_t used = per * batches;
  const double theta = cfg.theta();
  const double width = theta / static_cast<double>(bins);

  std::vector<std::vector<double>> bin_hits(batches, std::vector<double>(bins, 0.0));
  std::vector<double> batch_hits(batches, 0.0);
  sample_states(cfg, options, {grid.first, grid.stride, used}, [&](std::size_t j, const WindowState& s) {
    for (std::size_t u = 0; u < component.size(); ++u)
      if (s.count(u) != component[u]) return;
    double age = s.ages(unit)[0];
    auto b = std::min(bins - 1, static_cast<std::size_t>(age / width));
    bin_hits[j / per][b] += 1;
    batch_hits[j / per] += 1;
  });

  DensityHistogram h;
  h.unit = unit;
  h.samples = used;
  for (double x : batch_hits) h.hits += static_cast<std::size_t>(x);
  if (h.hits == 0) throw std::invalid_argument("density_1d: no sample fell in the requested component");
  for (std::size_t b = 0; b <= bins; ++b) h.edges.push_back(static_cast<double>(b) * width);

  std::vector<double> mass(batches);
  for (std::size_t b = 0; b < batches; ++b) mass[b] = batch_hits[b] / static_cast<double>(per);
  h.component_mass = from_batches(mass);

  for (std::size_t k = 0; k < bins; ++k) {
    std::vector<double> joint(batches), cond;
    double hits_k = 0;
    for (std::size_t b = 0; b < batches; ++b) {
      joint[b] = bin_hits[b][k] / static_cast<double>(per) / width;
      hits_k += bin_hits[b][k];
      if (batch_hits[b] > 0) cond.push_back(bin_hits[b][k] / batch_hits[b] / width);
    }
    h.joint.push_back(from_batches(joint));
    Estimate c = from_batches(cond);
    c.mean = hits_k / static_cast<double>(h.hits) / width;  // ratio of totals
    h.conditional.push_back(c);
  }
  return h;
}

double disagreement_horizon(const WindowState& a, const WindowState& b) {
  double horizon = 0;
  for (std::size_t u = 0; u < a.num_units(); ++u) {
    auto x = a.ages(u);
    auto y = b.ages(u);
    std::size_t i = 0, j = 0;
    // Both lists are strictly decreasing; walk them like a merge.
    while (i < x.size() && j < y.size()) {
      if (x[i] == y[j]) {
        ++i;
        ++j;
      } else if (x[i] > y[j]) {
        horizon = std::max(horizon, x[i++]);
      } else {
        horizon = std::max(horizon, y[j++]);
      }
    }
    if (i < x.size()) horizon = std::max(horizon, x[i]);
    if (j < y.size()) horizon = std::max(horizon, y[j]);
  }
  return horizon;
}

MergeCurve ergodicity_diagnostic(const NetworkConfig& cfg, const WindowState& a, const WindowState& b,
                                 const std::vector<double>& times, std::size_t replications, std::uint64_t seed,
                                 const Truncation& truncation) {
  check_shape(cfg, a);
  check_shape(cfg, b);
  MergeCurve curve;
  curve.times = times;
  curve.replications = replications;
  double end = times.empty() ? 0.0 : *std::max_element(times.begin(), times.end());
  std::vector<double> merge_times;
  merge_times.reserve(replications);
  for (std::size_t r = 0; r < replications; ++r) {
    Simulator sa(cfg, a, truncation), sb(cfg, b, truncation);
    CandidateStream stream(cfg.total_candidate_rate(), replication_seed(seed, r));
    double merged = std::numeric_limits<double>::infinity();
    double now = 0;
    while (true) {
      double agree_at = now + disagreement_horizon(sa.state(), sb.state());
      if (agree_at <= stream.peek().time) {
        merged = agree_at;
        break;
      }
      if (stream.peek().time > end) break;
      Candidate c = stream.next();
      sa.offer(c);
      sb.offer(c);
      now = c.time;
    }
    merge_times.push_back(merged);
  }
  for (double t : times) {
    double n = 0;
    for (double m : merge_times) n += m > t ? 1 : 0;
    double p = replications ? n / static_cast<double>(replications) : 0.0;
    curve.unmerged.push_back(p);
    curve.sigma.push_back(replications ? std::sqrt(p * (1 - p) / static_cast<double>(replications)) : 0.0);
  }
  return curve;
}

WindowState saturated_state(const NetworkConfig& cfg, std::size_t spikes_per_unit) {
  const double theta = cfg.theta();
  std::vector<std::vector<double>> ages(cfg.num_units());
  for (std::size_t u = 0; u < cfg.num_units(); ++u) {
    double spacing = theta / static_cast<double>(spikes_per_unit + 1);
    std::size_t count = spikes_per_unit;
    if (!cfg.is_source(u)) {
      const auto& spec = cfg.neurons()[u - cfg.num_sources()];
      if (const auto* h = std::get_if<HardRefractory>(&spec.refractory)) {
        spacing = h->period * (1 + 1e-9);
        count = static_cast<std::size_t>(std::ceil(theta / spacing));
      }
    }
    for (std::size_t m = 0; m < count; ++m) {
      double age = theta - static_cast<double>(m) * spacing;
      if (age <= 0) break;
      ages[u].push_back(age);
    }
  }
  return WindowState(theta, std::move(ages));
}

}  // namespace pnn
