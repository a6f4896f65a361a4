#include "pnn/chain.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <bit>
#include <cmath>
#include <deque>
#include <ostream>
#include <string>

#include "pnn/core.hpp"
#include "pnn/trunc.hpp"

namespace pnn {

std::vector<double> grid_ages(GridMask mask, std::size_t q) {
  std::vector<double> ages;
  for (std::size_t k = q; k >= 1; --k)
    if ((mask >> (k - 1)) & 1U) ages.push_back(static_cast<double>(k) / static_cast<double>(q));
  return ages;
}

GridMask grid_mask(const std::vector<double>& ages, std::size_t q) {
  GridMask mask = 0;
  double prev = 2.0;
  for (double a : ages) {
    double k = std::round(a * static_cast<double>(q));
    if (std::abs(k - a * static_cast<double>(q)) > 1e-9 || k < 1 || k > static_cast<double>(q) || !(a < prev))
      throw std::invalid_argument("grid_mask: ages must be strictly decreasing multiples of h in (0, 1]");
    mask |= GridMask{1} << (static_cast<std::size_t>(k) - 1);
    prev = a;
  }
  return mask;
}

std::size_t GridStateHash::operator()(const GridState& s) const {
  std::uint64_t h = 0x9E3779B97F4A7C15ULL;
  for (GridMask m : s.masks) h = KeyedRandom::mix(h ^ m);
  return static_cast<std::size_t>(h);
}

WindowState embed_state(const GridState& s, std::size_t q, double theta) {
  std::vector<std::vector<double>> ages;
  ages.reserve(s.masks.size());
  for (GridMask m : s.masks) {
    auto a = grid_ages(m, q);
    for (double& x : a) x *= theta;
    ages.push_back(std::move(a));
  }
  return WindowState(theta, std::move(ages));
}

Component component_of(const GridState& s) {
  Component c;
  for (GridMask m : s.masks) c.push_back(static_cast<std::size_t>(std::popcount(m)));
  return c;
}

ChainSizeError::ChainSizeError(std::size_t reached, std::size_t cap)
    : std::runtime_error("grid chain exceeds the state cap: reached " + std::to_string(reached) +
                         " states (cap " + std::to_string(cap) + "); lower q or raise the cap"),
      reached_(reached) {}

void check_grid_resolution(const NetworkConfig& cfg, std::size_t q) {
  if (q < 1 || q > max_grid_resolution)
    throw ConfigError("chain.q: resolution must lie in 1.." + std::to_string(max_grid_resolution));
  const double step = cfg.theta() / static_cast<double>(q);
  for (std::size_t k = 0; k < cfg.num_sources(); ++k) {
    double p = step * cfg.sources()[k].rate;
    if (p > 1)
      throw ConfigError("chain.q=" + std::to_string(q) + ": source " + std::to_string(k) +
                        " has per-step spike probability h*theta*rate = " + std::to_string(p) +
                        " > 1 (grid chain transition precondition); use q >= " +
                        std::to_string(static_cast<long>(std::ceil(cfg.theta() * cfg.sources()[k].rate))));
  }
  for (std::size_t i = 0; i < cfg.num_neurons(); ++i) {
    double bound = upper_bound(cfg.neurons()[i].activation);
    double p = step * bound;
    if (p > 1)
      throw ConfigError("chain.q=" + std::to_string(q) + ": neuron " + std::to_string(i) +
                        " has per-step spike probability bound h*theta*rate_bound = " + std::to_string(p) +
                        " > 1 (grid chain transition precondition); use q >= " +
                        std::to_string(static_cast<long>(std::ceil(cfg.theta() * bound))));
  }
}

std::vector<double> spike_probabilities(const GridState& s, const NetworkConfig& cfg, const ChainOptions& options) {
  const double step = cfg.theta() / static_cast<double>(options.q);
  std::vector<double> p(cfg.num_units(), 0.0);
  WindowState w = embed_state(s, options.q, cfg.theta());
  for (std::size_t u = 0; u < cfg.num_units(); ++u) {
    double rate;
    if (cfg.is_source(u)) {
      bool silenced = options.truncation.source && w.count(u) >= *options.truncation.source;
      rate = silenced ? 0.0 : cfg.sources()[u].rate;
    } else {
      std::size_t i = u - cfg.num_sources();
      rate = options.truncation.neuron ? truncated_rate(w, cfg, i, *options.truncation.neuron) : firing_rate(w, cfg, i);
    }
    p[u] = std::clamp(step * rate, 0.0, 1.0);
  }
  return p;
}

std::vector<std::pair<GridState, double>> transition_row(const GridState& s, const NetworkConfig& cfg,
                                                         const ChainOptions& options) {
  const std::size_t units = cfg.num_units();
  if (s.masks.size() != units) throw std::invalid_argument("transition_row: state does not match network");
  auto p = spike_probabilities(s, cfg, options);
  std::vector<std::pair<GridState, double>> row;
  row.reserve(std::size_t{1} << units);
  for (std::size_t pattern = 0; pattern < (std::size_t{1} << units); ++pattern) {
    GridState next;
    next.masks.resize(units);
    double prob = 1.0;
    for (std::size_t u = 0; u < units; ++u) {
      bool spikes = (pattern >> u) & 1U;
      prob *= spikes ? p[u] : 1.0 - p[u];
      next.masks[u] = spikes ? grid_spike(s.masks[u], options.q) : grid_shift(s.masks[u]);
    }
    if (prob > 0) row.emplace_back(std::move(next), prob);
  }
  return row;
}

std::vector<GridState> precursors(const GridState& s, std::size_t q) {
  const std::size_t units = s.masks.size();
  const GridMask top = GridMask{1} << (q - 1);
  std::vector<GridState> out;
  for (std::size_t pattern = 0; pattern < (std::size_t{1} << units); ++pattern) {
    GridState v;
    v.masks.resize(units);
    for (std::size_t u = 0; u < units; ++u) {
      GridMask m = s.masks[u];
      GridMask lifted = (m & ~top) << 1;  // drop a head at age 1, then every age + h
      v.masks[u] = ((pattern >> u) & 1U) ? (lifted | 1U) : lifted;
    }
    out.push_back(std::move(v));
  }
  return out;
}

double transition_probability(const GridState& from, const GridState& to, const NetworkConfig& cfg,
                              const ChainOptions& options) {
  auto p = spike_probabilities(from, cfg, options);
  double prob = 1.0;
  for (std::size_t u = 0; u < p.size(); ++u) {
    if (to.masks[u] == grid_spike(from.masks[u], options.q))
      prob *= p[u];
    else if (to.masks[u] == grid_shift(from.masks[u]))
      prob *= 1.0 - p[u];
    else
      return 0.0;
  }
  return prob;
}

std::ptrdiff_t GridChain::index_of(const GridState& s) const {
  auto it = index_.find(s);
  return it == index_.end() ? -1 : static_cast<std::ptrdiff_t>(it->second);
}

std::vector<double> GridChain::left_multiply(const std::vector<double>& x) const {
  std::vector<double> y(states_.size(), 0.0);
  for (std::size_t i = 0; i < states_.size(); ++i) {
    double xi = x[i];
    if (xi == 0) continue;
    for (std::size_t e = row_start_[i]; e < row_start_[i + 1]; ++e) y[cols_[e]] += xi * values_[e];
  }
  return y;
}

GridChain enumerate_states(const NetworkConfig& cfg, const ChainOptions& options) {
  check_grid_resolution(cfg, options.q);
  GridChain chain;
  chain.cfg_ = cfg;
  chain.options_ = options;
  GridState zero;
  zero.masks.assign(cfg.num_units(), 0);
  chain.states_.push_back(zero);
  chain.index_.emplace(zero, 0);
  chain.row_start_.push_back(0);
  // States are appended in discovery order, so rows are built in index order.
  for (std::size_t i = 0; i < chain.states_.size(); ++i) {
    auto row = transition_row(chain.states_[i], cfg, options);
    for (auto& [next, prob] : row) {
      auto [it, inserted] = chain.index_.try_emplace(next, static_cast<std::uint32_t>(chain.states_.size()));
      if (inserted) {
        chain.states_.push_back(next);
        if (chain.states_.size() > options.state_cap) throw ChainSizeError(chain.states_.size(), options.state_cap);
      }
      chain.cols_.push_back(it->second);
      chain.values_.push_back(prob);
    }
    chain.row_start_.push_back(chain.cols_.size());
  }
  return chain;
}

StationaryResult stationary(const GridChain& chain, const StationaryOptions& options) {
  const std::size_t n = chain.size();
  StationaryResult result;
  std::vector<double> pi(n, 1.0 / static_cast<double>(n));
  bool converged = false;
  for (std::size_t it = 1; it <= options.max_iterations; ++it) {
    auto y = chain.left_multiply(pi);
    double diff = 0, sum = 0;
    for (std::size_t i = 0; i < n; ++i) {
      double next = 0.5 * (pi[i] + y[i]);
      diff = std::max(diff, std::abs(next - pi[i]));
      y[i] = next;
      sum += next;
    }
    for (double& v : y) v /= sum;
    pi.swap(y);
    result.iterations = it;
    if (diff < options.tolerance) {
      converged = true;
      break;
    }
  }
  if (!converged)
    throw ConvergenceError("stationary: power iteration did not converge within " +
                           std::to_string(options.max_iterations) + " iterations");
  auto y = chain.left_multiply(pi);
  for (std::size_t i = 0; i < n; ++i)
    result.fixed_point_residual = std::max(result.fixed_point_residual, std::abs(y[i] - pi[i]));
  result.balance_residual = balance_residual(chain, pi);
  result.pi = std::move(pi);
  return result;
}

double balance_residual(const GridChain& chain, const std::vector<double>& pi) {
  double worst = 0;
  for (std::size_t i = 0; i < chain.size(); ++i) {
    const GridState& s = chain.state(i);
    double inflow = 0;
    for (const auto& v : precursors(s, chain.q())) {
      auto j = chain.index_of(v);
      if (j < 0) continue;
      inflow += pi[static_cast<std::size_t>(j)] * transition_probability(v, s, chain.network(), chain.options());
    }
    worst = std::max(worst, std::abs(inflow - pi[i]));
  }
  return worst;
}

std::vector<double> dense_stationary(const GridChain& chain, std::size_t max_states) {
  const auto n = static_cast<Eigen::Index>(chain.size());
  if (chain.size() > max_states)
    throw ChainSizeError(chain.size(), max_states);
  // Rows of A are the equations sum_i pi_i (P_ij - delta_ij) = 0; the last one
  // is replaced by the normalisation.
  Eigen::MatrixXd a = -Eigen::MatrixXd::Identity(n, n);
  for (std::size_t i = 0; i < chain.size(); ++i)
    for (std::size_t e = chain.row_start()[i]; e < chain.row_start()[i + 1]; ++e)
      a(chain.cols()[e], static_cast<Eigen::Index>(i)) += chain.values()[e];
  a.row(n - 1).setOnes();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
  b(n - 1) = 1.0;
  Eigen::VectorXd x = a.fullPivLu().solve(b);
  return std::vector<double>(x.data(), x.data() + n);
}

double Embedding::mean_total_count() const {
  double m = 0;
  for (const auto& [c, p] : masses) {
    std::size_t total = 0;
    for (std::size_t x : c) total += x;
    m += p * static_cast<double>(total);
  }
  return m;
}

Embedding embed(const GridChain& chain, const std::vector<double>& pi) {
  Embedding e;
  e.q = chain.q();
  e.theta = chain.network().theta();
  const double cell = e.theta / static_cast<double>(e.q);
  for (std::size_t i = 0; i < chain.size(); ++i) {
    const GridState& s = chain.state(i);
    EmbeddedCell c;
    c.index = i;
    c.component = component_of(s);
    std::size_t dim = 0;
    for (std::size_t x : c.component) dim += x;
    for (GridMask m : s.masks) {
      auto ages = grid_ages(m, e.q);
      for (std::size_t j = 0; j + 1 < ages.size(); ++j)
        if (std::round((ages[j] - ages[j + 1]) * static_cast<double>(e.q)) == 1) c.boundary = true;
      for (double& a : ages) a *= e.theta;
      c.ages.push_back(std::move(ages));
    }
    c.mass = pi[i];
    c.density = pi[i] / std::pow(cell, static_cast<double>(dim));
    e.masses[c.component] += pi[i];
    e.total_mass += pi[i];
    if (c.boundary) e.boundary_mass += pi[i];
    e.cells.push_back(std::move(c));
  }
  return e;
}

void write_chain_triplets(std::ostream& out, const GridChain& chain) {
  auto precision = out.precision(17);
  for (std::size_t i = 0; i < chain.size(); ++i)
    for (std::size_t e = chain.row_start()[i]; e < chain.row_start()[i + 1]; ++e)
      out << i << ' ' << chain.cols()[e] << ' ' << chain.values()[e] << '\n';
  out.precision(precision);
}

void write_chain_legend(std::ostream& out, const GridChain& chain) {
  auto precision = out.precision(17);
  for (std::size_t i = 0; i < chain.size(); ++i) {
    out << i;
    for (GridMask m : chain.state(i).masks) {
      out << '\t';
      auto ages = grid_ages(m, chain.q());
      for (std::size_t j = 0; j < ages.size(); ++j) out << (j ? "," : "") << ages[j] * chain.network().theta();
    }
    out << '\n';
  }
  out.precision(precision);
}

}  // namespace pnn
