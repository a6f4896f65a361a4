#include "pnn/analytic.hpp"

#include <algorithm>
#include <array>
#include <initializer_list>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "pnn/quadrature.hpp"
#include "pnn/rng.hpp"
#include "pnn/trunc.hpp"

namespace pnn {

namespace {

std::size_t cells_for_step(double step, bool even, const char* who) {
  if (!(step > 0) || step > 0.5) throw std::invalid_argument(std::string(who) + ": step must lie in (0, 1/2]");
  double k = std::round(1.0 / step);
  if (std::abs(k * step - 1.0) > 1e-9)
    throw std::invalid_argument(std::string(who) + ": 1/step must be an integer");
  auto cells = static_cast<std::size_t>(k);
  if (even && cells % 2 != 0) throw std::invalid_argument(std::string(who) + ": 1/step must be even");
  return cells;
}

double unit_rate(const WindowState& w, const NetworkConfig& cfg, std::size_t u, const Truncation& truncation) {
  if (cfg.is_source(u)) {
    bool silenced = truncation.source && w.count(u) >= *truncation.source;
    return silenced ? 0.0 : cfg.sources()[u].rate;
  }
  std::size_t i = u - cfg.num_sources();
  return truncation.neuron ? truncated_rate(w, cfg, i, *truncation.neuron) : firing_rate(w, cfg, i);
}

// Hermite interpolation on a uniform node table starting at x0.
double table_value(const std::vector<double>& f, const std::vector<double>& d, double x0, double h, double x) {
  const std::size_t k = f.size() - 1;
  double pos = (x - x0) / h;
  auto j = static_cast<std::size_t>(std::clamp(std::floor(pos), 0.0, static_cast<double>(k - 1)));
  double left = x0 + static_cast<double>(j) * h;
  return quad::hermite(left, h, f[j], f[j + 1], d[j], d[j + 1], x);
}

}  // namespace

// ---------------------------------------------------------------- Example 1

double Example1Density::psi1(double theta) const {
  if (theta < 0 || theta > 1) return 0.0;
  return table_value(one_spike, one_spike_slope, 0.0, step, theta);
}

double Example1Density::psi2(double x1, double x2) const {
  if (!(x1 > x2) || x2 <= 0 || x1 > 1) return 0.0;
  double s = 1.0 - (x1 - x2);
  return rate_function(s) * psi1(s);
}

Example1Density example1_density(const AgeRate& rate, double step) {
  const std::size_t k = cells_for_step(step, false, "example1_density");
  const double h = 1.0 / static_cast<double>(k);
  const std::size_t quarter = 4 * k;

  // Integrand R(y) - R(1 - y) on the quarter grid, mirrored so that the
  // antisymmetry about 1/2 holds exactly.
  std::vector<double> r(quarter + 1);
  for (std::size_t i = 0; i <= quarter; ++i) {
    double y = static_cast<double>(i) / static_cast<double>(quarter);
    r[i] = rate(y);
    if (!(r[i] >= 0) || !std::isfinite(r[i])) throw std::invalid_argument("example1_density: rate must be finite and >= 0");
  }
  auto g = [&](std::size_t i) { return r[i] - r[quarter - i]; };

  // log phi on the half grid by Simpson over half cells.
  std::vector<double> log_phi(2 * k + 1, 0.0);
  for (std::size_t i = 0; i < 2 * k; ++i)
    log_phi[i + 1] = log_phi[i] + (0.5 * h / 6.0) * (g(2 * i) + 4.0 * g(2 * i + 1) + g(2 * i + 2));

  std::vector<double> phi(2 * k + 1), s_r_phi(2 * k + 1);
  for (std::size_t i = 0; i <= 2 * k; ++i) {
    phi[i] = std::exp(log_phi[i]);
    double s = static_cast<double>(i) / static_cast<double>(2 * k);
    s_r_phi[i] = s * (i == 0 ? 0.0 : r[2 * i]) * phi[i];
  }
  double int_phi = 0, int_s_r_phi = 0;
  for (std::size_t j = 0; j < k; ++j) {
    int_phi += (h / 6.0) * (phi[2 * j] + 4.0 * phi[2 * j + 1] + phi[2 * j + 2]);
    int_s_r_phi += (h / 6.0) * (s_r_phi[2 * j] + 4.0 * s_r_phi[2 * j + 1] + s_r_phi[2 * j + 2]);
  }

  Example1Density d;
  d.step = h;
  d.rate_function = rate;
  d.empty_rate = r[0];
  d.normalization = 1.0 + d.empty_rate * int_phi + d.empty_rate * int_s_r_phi;
  d.silent = 1.0 / d.normalization;
  d.one_spike_mass = d.empty_rate * d.silent * int_phi;
  d.two_spike_mass = d.empty_rate * d.silent * int_s_r_phi;
  d.one_spike.resize(k + 1);
  d.one_spike_slope.resize(k + 1);
  d.rate.resize(k + 1);
  for (std::size_t j = 0; j <= k; ++j) {
    d.one_spike[j] = d.empty_rate * d.silent * phi[2 * j];
    d.one_spike_slope[j] = g(4 * j) * d.one_spike[j];
    d.rate[j] = r[4 * j];
  }
  return d;
}

AgeRate example1_rate(const NetworkConfig& cfg, const Truncation& truncation) {
  if (cfg.theta() != 1.0) throw ConfigError("example1_rate: theta must be 1");
  if (cfg.num_sources() != 0 || cfg.num_neurons() != 1)
    throw ConfigError("example1_rate: network must consist of a single neuron");
  auto rate = [cfg, truncation](double age) {
    if (age <= 0) return unit_rate(WindowState::empty(1.0, 1), cfg, 0, truncation);
    WindowState w(1.0, {{std::min(age, 1.0)}});
    return unit_rate(w, cfg, 0, truncation);
  };
  constexpr int grid = 64;
  for (int a = 2; a <= grid; ++a)
    for (int b = 1; b < a; ++b) {
      WindowState w(1.0, {{a / double(grid), b / double(grid)}});
      if (unit_rate(w, cfg, 0, truncation) != 0.0)
        throw ConfigError("example1_rate: rate must vanish on windows with two spikes (truncate the neuron at 2)");
    }
  return rate;
}

// ---------------------------------------------------------------- Example 2

namespace {

double near_eval(const NearPiece& piece, double span, double u) {
  double tau = std::pow(std::max(u, 0.0) / span, 1.0 / piece.power);
  return table_value(piece.values, piece.slopes, 0.0, 1.0 / static_cast<double>(piece.values.size() - 1), tau);
}

double checked_gamma(const LevelRate& gamma, double y) {
  double v = gamma(y);
  if (!(v >= 0) || !std::isfinite(v)) throw std::invalid_argument("example2_density: gamma must be finite and >= 0");
  return v;
}

}  // namespace

double Example2Density::density(double y) const {
  if (y <= 0 || y > static_cast<double>(n_max + 1)) return 0.0;
  if (y <= 1.0) {
    double lc = table_value(log_correction, log_correction_slope, 0.0, step, y);
    return scale * std::pow(y, exponent) * std::exp(lc);
  }
  auto n = static_cast<std::size_t>(std::ceil(y) - 1.0);
  double u = y - static_cast<double>(n);
  // Far-tail values below the integration error can come out slightly
  // negative; the density is reported as 0 there.
  double v = u <= near_span ? near_eval(near[n], near_span, u)
                            : table_value(pieces[n], slopes[n], static_cast<double>(n), step, y);
  return scale * std::max(v, 0.0);
}

namespace {

// Integral of weight(x) * density(x) over [lo, hi] inside one piece; `fine`
// selects the panel counts used for the balance residual.
template <class W>
double piece_integral(const Example2Density& d, double lo, double hi, W&& weight, bool fine) {
  if (hi <= lo) return 0.0;
  auto f = [&](double x) { return weight(x) * d.density(x); };
  auto n = static_cast<std::size_t>(std::floor(lo + 1e-12));
  if (n == 0) return quad::simpson_power_origin(f, lo, hi, d.exponent, fine ? 512 : 16);
  const double base = static_cast<double>(n);
  double sum = 0.0;
  if (lo < base + d.near_span) {
    const double p = d.near[n].power;
    double mid = std::min(hi, base + d.near_span);
    auto tau_of = [&](double y) { return std::pow(std::max(y - base, 0.0) / d.near_span, 1.0 / p); };
    auto g = [&](double tau) {
      double u = d.near_span * std::pow(tau, p);
      double du = d.near_span * p * std::pow(tau, p - 1.0);
      return du == 0 ? 0.0 : f(base + u) * du;
    };
    sum += quad::simpson(g, tau_of(lo), tau_of(mid), fine ? 256 : 16);
    lo = mid;
    if (hi <= lo) return sum;
  }
  auto panels = static_cast<std::size_t>(std::ceil(2.0 * (hi - lo) / d.step - 1e-9));
  return sum + quad::simpson(f, lo, hi, std::max<std::size_t>(panels, 1));
}

template <class W>
double range_integral(const Example2Density& d, double lo, double hi, W&& weight) {
  double sum = 0.0;
  while (lo < hi) {
    double edge = std::min(hi, std::floor(lo + 1e-12) + 1.0);
    sum += piece_integral(d, lo, edge, weight, true);
    lo = edge;
  }
  return sum;
}

void build_log_correction(Example2Density& d, std::size_t k) {
  const double h = d.step, gamma0 = d.gamma(0.0);
  auto slope = [&](double x) {
    if (x > 0) return (checked_gamma(d.gamma, x) - gamma0) / x;
    const double dx = 1e-4;
    return (-3.0 * gamma0 + 4.0 * checked_gamma(d.gamma, dx) - checked_gamma(d.gamma, 2 * dx)) / (2 * dx);
  };
  d.log_correction.assign(k + 1, 0.0);
  d.log_correction_slope.assign(k + 1, 0.0);
  for (std::size_t j = 0; j <= k; ++j) d.log_correction_slope[j] = slope(static_cast<double>(j) * h);
  for (std::size_t j = k; j-- > 0;) {
    double x = static_cast<double>(j) * h;
    d.log_correction[j] = d.log_correction[j + 1] -
                          (h / 6.0) * (d.log_correction_slope[j] + 4.0 * slope(x + 0.5 * h) + d.log_correction_slope[j + 1]);
  }
}

// phi_n on [n, n + span] by variation of constants,
// phi(y) = e^{A(y)} [phi(n) - int_n^y e^{-A(s)} gamma(s-1)/s phi_{n-1}(s-1) ds],
// A(y) = int_n^y (gamma(x) - 1)/x dx, tabulated in tau with y = n + span tau^p.
// The lagged term behaves like (s - n)^{gamma(0) + n - 2}; p is chosen so
// that the integrand in tau vanishes at least like tau^3.
NearPiece build_near(const Example2Density& d, std::size_t n, double start) {
  constexpr std::size_t panels = 256;
  const double base = static_cast<double>(n), span = d.near_span;
  NearPiece piece;
  piece.power = std::max(1.0, std::ceil(4.0 / (d.exponent + base)));
  const double p = piece.power, dt = 1.0 / static_cast<double>(panels);
  auto u_of = [&](double tau) { return span * std::pow(tau, p); };
  auto du_of = [&](double tau) { return span * p * std::pow(tau, p - 1.0); };
  auto a_integrand = [&](double x) { return (checked_gamma(d.gamma, x) - 1.0) / x; };
  auto lagged = [&](double u) { return checked_gamma(d.gamma, base - 1.0 + u) / (base + u) * d.density(base - 1.0 + u); };

  std::vector<double> big_a(2 * panels + 1, 0.0), forcing(panels + 1, 0.0);
  for (std::size_t i = 0; i < 2 * panels; ++i) {
    double t0 = static_cast<double>(i) * 0.5 * dt;
    big_a[i + 1] = big_a[i] + quad::simpson(a_integrand, base + u_of(t0), base + u_of(t0 + 0.5 * dt), 2);
  }
  auto forcing_density = [&](std::size_t half_index) {
    double tau = static_cast<double>(half_index) * 0.5 * dt;
    double du = du_of(tau);
    if (du == 0) return 0.0;
    return std::exp(-big_a[half_index]) * lagged(u_of(tau)) * du;
  };
  for (std::size_t i = 0; i < panels; ++i)
    forcing[i + 1] = forcing[i] + (dt / 6.0) * (forcing_density(2 * i) + 4.0 * forcing_density(2 * i + 1) +
                                                forcing_density(2 * i + 2));
  piece.values.resize(panels + 1);
  piece.slopes.resize(panels + 1);
  for (std::size_t i = 0; i <= panels; ++i) {
    double tau = static_cast<double>(i) * dt;
    double u = u_of(tau), du = du_of(tau);
    double phi = std::exp(big_a[2 * i]) * (start - forcing[i]);
    piece.values[i] = phi;
    piece.slopes[i] = du == 0 ? 0.0 : ((checked_gamma(d.gamma, base + u) - 1.0) / (base + u) * phi - lagged(u)) * du;
  }
  return piece;
}

void build_piece(Example2Density& d, std::size_t n, std::size_t graded_cells) {
  const std::size_t k = d.cells();
  const double h = d.step, base = static_cast<double>(n);
  auto rhs = [&](double y, double phi, double lag) {
    return ((checked_gamma(d.gamma, y) - 1.0) / y) * phi - (checked_gamma(d.gamma, y - 1.0) / y) * lag;
  };
  double start = n == 1 ? d.density(1.0) : d.pieces[n - 1][k];
  d.near[n] = build_near(d, n, start);
  std::vector<double> f(k + 1), df(k + 1);
  for (std::size_t j = 0; j <= graded_cells; ++j) f[j] = near_eval(d.near[n], d.near_span, static_cast<double>(j) * h);
  f[0] = start;
  f[graded_cells] = d.near[n].values.back();
  for (std::size_t j = graded_cells; j < k; ++j) {
    double y = base + static_cast<double>(j) * h;
    double l0 = d.density(y - 1.0), lm = d.density(y - 1.0 + 0.5 * h), l1 = d.density(y - 1.0 + h);
    double k1 = rhs(y, f[j], l0);
    double k2 = rhs(y + 0.5 * h, f[j] + 0.5 * h * k1, lm);
    double k3 = rhs(y + 0.5 * h, f[j] + 0.5 * h * k2, lm);
    double k4 = rhs(y + h, f[j] + h * k3, l1);
    f[j + 1] = f[j] + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4);
  }
  for (std::size_t j = 0; j <= k; ++j) {
    double y = base + static_cast<double>(j) * h;
    double v = rhs(y, f[j], d.density(y - 1.0));
    df[j] = std::isfinite(v) ? v : 0.0;  // only the singular right slope at y = 1; never read
  }
  d.pieces[n] = std::move(f);
  d.slopes[n] = std::move(df);
}

}  // namespace

double Example2Density::cdf(double y) const {
  if (y <= 0) return 0.0;
  if (y >= static_cast<double>(n_max + 1)) return cumulative.back().back();
  auto n = static_cast<std::size_t>(std::floor(y));
  double pos = (y - static_cast<double>(n)) / step;
  auto j = static_cast<std::size_t>(std::min(std::floor(pos), static_cast<double>(cells() - 1)));
  double node = static_cast<double>(n) + static_cast<double>(j) * step;
  return cumulative[n][j] + piece_integral(*this, node, y, [](double) { return 1.0; }, false);
}

Example2Density example2_density(const LevelRate& gamma, double gamma_bound, std::size_t n_max, double step) {
  const std::size_t k = cells_for_step(step, true, "example2_density");
  if (n_max < 1) throw std::invalid_argument("example2_density: n_max must be at least 1");
  if (!(gamma_bound > 0) || !std::isfinite(gamma_bound))
    throw std::invalid_argument("example2_density: gamma bound must be positive and finite");
  const double gamma0 = gamma(0.0);
  if (!(gamma0 > 0))
    throw std::invalid_argument("example2_density: gamma(0) must be > 0, otherwise psi ~ y^(gamma(0)-1) is not integrable at 0");
  for (std::size_t i = 0; i <= 64 * (n_max + 1); ++i) {
    double v = gamma(static_cast<double>(i) / 64.0);
    if (v > gamma_bound * (1 + 1e-12)) throw std::invalid_argument("example2_density: gamma exceeds its declared bound");
  }

  Example2Density d;
  d.step = 1.0 / static_cast<double>(k);
  d.n_max = n_max;
  d.exponent = gamma0 - 1.0;
  d.scale = 1.0;
  d.gamma_bound = gamma_bound;
  d.gamma = gamma;
  build_log_correction(d, k);
  const std::size_t graded_cells = std::min<std::size_t>(16, k / 4);
  d.near_span = static_cast<double>(graded_cells) * d.step;
  d.near.resize(n_max + 1);
  d.pieces.resize(n_max + 1);
  d.slopes.resize(n_max + 1);
  d.pieces[0].resize(k + 1);
  d.slopes[0].resize(k + 1);
  for (std::size_t j = 1; j <= k; ++j) {
    double y = static_cast<double>(j) * d.step;
    d.pieces[0][j] = d.density(y);
    d.slopes[0][j] = ((checked_gamma(gamma, y) - 1.0) / y) * d.pieces[0][j];
  }
  for (std::size_t n = 1; n <= n_max; ++n) build_piece(d, n, graded_cells);

  auto one = [](double) { return 1.0; };
  d.cumulative.assign(n_max + 1, std::vector<double>(k + 1, 0.0));
  double total = 0.0;
  for (std::size_t n = 0; n <= n_max; ++n) {
    d.cumulative[n][0] = total;
    for (std::size_t j = 0; j < k; ++j) {
      double lo = static_cast<double>(n) + static_cast<double>(j) * d.step;
      d.cumulative[n][j + 1] = d.cumulative[n][j] + piece_integral(d, lo, lo + d.step, one, false);
    }
    total = d.cumulative[n][k];
  }
  d.scale = 1.0 / total;
  d.piece_mass.resize(n_max + 1);
  for (std::size_t n = 0; n <= n_max; ++n) {
    for (double& c : d.cumulative[n]) c *= d.scale;
    d.piece_mass[n] = d.cumulative[n][k] - d.cumulative[n][0];
  }
  double r = gamma_bound / (static_cast<double>(n_max + 1) - gamma_bound);
  d.tail_bound = (r > 0 && r < 1) ? std::abs(d.piece_mass[n_max]) * r / (1.0 - r)
                                  : std::numeric_limits<double>::infinity();
  return d;
}

double example2_moment(const Example2Density& d, int order) {
  return range_integral(d, 0.0, static_cast<double>(d.n_max + 1), [&](double y) { return std::pow(y, order); });
}

double example2_balance_residual(const Example2Density& d, double y) {
  if (y <= 0) return 0.0;
  double lo = std::max(0.0, y - 1.0);
  return y * d.density(y) - range_integral(d, lo, y, [&](double x) { return d.gamma(x); });
}

// ---------------------------------------------------------------- shot noise

ShotNoiseRun simulate_shotnoise(const LevelRate& gamma, double gamma_bound, const ShotNoiseOptions& options) {
  if (!(gamma_bound > 0) || !std::isfinite(gamma_bound))
    throw std::invalid_argument("simulate_shotnoise: gamma needs a finite positive bound");
  if (!(options.stride > 0) || options.burn_in < 0 || !(options.horizon > options.burn_in))
    throw std::invalid_argument("simulate_shotnoise: need stride > 0 and 0 <= burn_in < horizon");
  KeyedRandom rng(options.seed);
  ShotNoiseRun run;
  double y = 0.0, t = 0.0;
  std::size_t next_sample = 0;
  auto sample_time = [&](std::size_t i) { return options.burn_in + static_cast<double>(i) * options.stride; };
  for (std::uint64_t counter = 0;; ++counter) {
    double tc = t + rng.exponential(counter, 0, gamma_bound);
    while (sample_time(next_sample) <= std::min(tc, options.horizon)) {
      run.samples.push_back(y * std::exp(-(sample_time(next_sample) - t)));
      ++next_sample;
    }
    if (tc > options.horizon) break;
    y *= std::exp(-(tc - t));
    t = tc;
    ++run.candidates;
    double g = gamma(y);
    if (!(g >= 0) || g > gamma_bound * (1 + 1e-12))
      throw std::invalid_argument("simulate_shotnoise: gamma(" + std::to_string(y) + ") is outside [0, bound]");
    if (rng.uniform(counter, 1) * gamma_bound < g) {
      y += 1.0;
      ++run.jumps;
    }
  }
  return run;
}

MomentEstimate shotnoise_moments(const std::vector<double>& samples, std::size_t batches) {
  MomentEstimate m;
  m.mean = batch_means(samples, batches);
  std::vector<double> sq(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) sq[i] = (samples[i] - m.mean.mean) * (samples[i] - m.mean.mean);
  m.variance = batch_means(sq, batches);
  return m;
}

// ---------------------------------------------------------------- residuals

std::size_t ComponentGrid::cells() const {
  double k = std::round(1.0 / step);
  return static_cast<std::size_t>(k);
}

double ResidualReport::max_abs() const {
  double m = 0;
  for (const auto& item : items) m = std::max(m, item.max_abs);
  return m;
}

const ResidualItem* ResidualReport::find(const std::string& equation) const {
  for (const auto& item : items)
    if (item.equation == equation) return &item;
  return nullptr;
}

namespace {

class ResidualAccumulator {
 public:
  explicit ResidualAccumulator(std::string name) { item_.equation = std::move(name); }
  void add(double residual, double sigma) {
    double r = std::abs(residual);
    item_.max_abs = std::max(item_.max_abs, r);
    sum_ += r;
    ++item_.points;
    if (sigma > 0) item_.max_z = std::max(item_.max_z, r / sigma);
  }
  ResidualItem done() {
    item_.mean_abs = item_.points ? sum_ / static_cast<double>(item_.points) : 0.0;
    return item_;
  }

 private:
  ResidualItem item_;
  double sum_ = 0.0;
};

Component unit_component(std::size_t units, std::initializer_list<std::size_t> spikes) {
  Component c(units, 0);
  for (auto u : spikes) ++c[u];
  return c;
}

// Fourth-order first derivative at node j from a table of K+1 values.
std::array<double, 5> derivative_stencil(std::size_t j, std::size_t k, std::size_t& first) {
  if (j >= 2 && j + 2 <= k) {
    first = j - 2;
    return {1.0 / 12, -8.0 / 12, 0.0, 8.0 / 12, -1.0 / 12};
  }
  if (j < 2) {
    first = 0;
    if (j == 0) return {-25.0 / 12, 48.0 / 12, -36.0 / 12, 16.0 / 12, -3.0 / 12};
    return {-3.0 / 12, -10.0 / 12, 18.0 / 12, -6.0 / 12, 1.0 / 12};
  }
  first = k - 4;
  if (j == k) return {3.0 / 12, -16.0 / 12, 36.0 / 12, -48.0 / 12, 25.0 / 12};
  return {-1.0 / 12, 6.0 / 12, -18.0 / 12, 10.0 / 12, 3.0 / 12};
}

}  // namespace

ResidualReport stationary_equation_residual(const ComponentGrid& grid, const NetworkConfig& cfg,
                                            const Truncation& truncation) {
  if (cfg.theta() != 1.0) throw std::invalid_argument("stationary_equation_residual: theta must be 1");
  const std::size_t units = cfg.num_units();
  if (units == 0 || units > 2 || grid.units != units)
    throw std::invalid_argument("stationary_equation_residual: grid and network must have the same 1 or 2 units");
  const std::size_t k = grid.cells();
  if (k < 4 || std::abs(static_cast<double>(k) * grid.step - 1.0) > 1e-9)
    throw std::invalid_argument("stationary_equation_residual: grid step must be 1/K with K >= 4");
  const double h = grid.step;
  const std::size_t n1 = k + 1;
  for (const auto& [c, v] : grid.values) {
    std::size_t total = std::accumulate(c.begin(), c.end(), std::size_t{0});
    if (c.size() != units || total == 0 || total > 2 || v.size() != (total == 1 ? n1 : n1 * n1))
      throw std::invalid_argument("stationary_equation_residual: incompatible grid for a component");
  }
  auto table = [&](const Component& c) -> const std::vector<double>* {
    auto it = grid.values.find(c);
    return it == grid.values.end() ? nullptr : &it->second;
  };
  auto sigma_of = [&](const Component& c, std::size_t i) {
    auto it = grid.sigmas.find(c);
    return it == grid.sigmas.end() || it->second.size() <= i ? 0.0 : it->second[i];
  };
  auto node = [&](std::size_t j) { return static_cast<double>(j) * h; };
  auto state_with = [&](std::size_t u, std::vector<double> ages) {
    std::vector<std::vector<double>> all(units);
    all[u] = std::move(ages);
    return WindowState(1.0, std::move(all));
  };
  const WindowState empty = WindowState::empty(1.0, units);

  ResidualReport report;
  // Silent balance.
  {
    ResidualAccumulator acc("silent_balance");
    double out = 0;
    for (std::size_t u = 0; u < units; ++u) out += unit_rate(empty, cfg, u, truncation);
    double in = 0, var = out * out * grid.silent_sigma * grid.silent_sigma;
    bool complete = true;
    for (std::size_t u = 0; u < units; ++u) {
      const auto* t = table(unit_component(units, {u}));
      if (!t) {
        complete = false;
        break;
      }
      in += (*t)[0];
      var += std::pow(sigma_of(unit_component(units, {u}), 0), 2);
    }
    if (complete) {
      acc.add(out * grid.silent - in, std::sqrt(var));
      report.items.push_back(acc.done());
    }
  }
  for (std::size_t u = 0; u < units; ++u) {
    Component cu = unit_component(units, {u});
    const auto* psi = table(cu);
    if (!psi) continue;
    // Boundary value at age 1.
    {
      ResidualAccumulator acc("boundary_one_spike_u" + std::to_string(u));
      double r = unit_rate(empty, cfg, u, truncation);
      acc.add((*psi)[k] - r * grid.silent, std::hypot(sigma_of(cu, k), r * grid.silent_sigma));
      report.items.push_back(acc.done());
    }
    // Transport along the diagonal.
    std::vector<const std::vector<double>*> traces(units);
    bool complete = true;
    for (std::size_t w = 0; w < units; ++w) {
      traces[w] = table(unit_component(units, {u, w}));
      if (!traces[w]) complete = false;
    }
    if (complete) {
      ResidualAccumulator acc("transport_one_spike_u" + std::to_string(u));
      for (std::size_t j = 1; j < k; ++j) {
        std::size_t first = 0;
        auto c = derivative_stencil(j, k, first);
        double deriv = 0, var = 0;
        for (std::size_t i = 0; i < 5; ++i) {
          deriv += c[i] * (*psi)[first + i] / h;
          var += std::pow(c[i] / h * sigma_of(cu, first + i), 2);
        }
        WindowState w = state_with(u, {node(j)});
        double out = 0;
        for (std::size_t v = 0; v < units; ++v) out += unit_rate(w, cfg, v, truncation);
        double in = 0;
        for (std::size_t v = 0; v < units; ++v) {
          Component cuv = unit_component(units, {u, v});
          std::size_t idx = (v == u || u < v) ? j * n1 : j;
          in += (*traces[v])[idx];
          var += std::pow(sigma_of(cuv, idx), 2);
        }
        var += std::pow(out * sigma_of(cu, j), 2);
        acc.add(deriv - (out * (*psi)[j] - in), std::sqrt(var));
      }
      report.items.push_back(acc.done());
    }
  }
  // Two-spike boundary values and transport.
  bool two_spike_rates_vanish = true;
  for (std::size_t u = 0; u < units && two_spike_rates_vanish; ++u)
    for (std::size_t w = u; w < units && two_spike_rates_vanish; ++w)
      for (std::size_t a = 1; a <= k && two_spike_rates_vanish; ++a)
        for (std::size_t b = 1; b <= k; ++b) {
          if (u == w && b >= a) break;
          std::vector<std::vector<double>> all(units);
          if (u == w) {
            all[u] = {node(a), node(b)};
          } else {
            all[u] = {node(a)};
            all[w] = {node(b)};
          }
          WindowState s(1.0, all);
          double total = 0;
          for (std::size_t v = 0; v < units; ++v) total += unit_rate(s, cfg, v, truncation);
          if (total != 0.0) {
            two_spike_rates_vanish = false;
            break;
          }
        }
  for (std::size_t u = 0; u < units; ++u)
    for (std::size_t w = u; w < units; ++w) {
      Component c = unit_component(units, {u, w});
      const auto* psi = table(c);
      if (!psi) continue;
      std::string tag = "_u" + std::to_string(u) + (u == w ? "" : "_u" + std::to_string(w));
      {
        ResidualAccumulator acc("boundary_two_spike" + tag);
        // Fresh spike of u on a one-spike state of w (and of w on u).
        for (int side = 0; side < (u == w ? 1 : 2); ++side) {
          std::size_t fresh = side == 0 ? u : w, old = side == 0 ? w : u;
          Component cold = unit_component(units, {old});
          const auto* base = table(cold);
          if (!base) continue;
          for (std::size_t b = 1; b < k; ++b) {
            double r = unit_rate(state_with(old, {node(b)}), cfg, fresh, truncation);
            std::size_t idx = side == 0 ? k * n1 + b : b * n1 + k;
            acc.add((*psi)[idx] - r * (*base)[b], std::hypot(sigma_of(c, idx), r * sigma_of(cold, b)));
          }
        }
        report.items.push_back(acc.done());
      }
      if (two_spike_rates_vanish) {
        ResidualAccumulator acc("transport_two_spike" + tag);
        for (std::size_t a = 1; a < k; ++a)
          for (std::size_t b = 1; b < k; ++b) {
            if (u == w && b >= a) break;
            std::size_t i0 = a * n1 + b, i1 = (a + 1) * n1 + b + 1;
            acc.add(((*psi)[i1] - (*psi)[i0]) / h, std::hypot(sigma_of(c, i0), sigma_of(c, i1)) / h);
          }
        report.items.push_back(acc.done());
      }
    }
  return report;
}

ComponentGrid component_grid(const Example1Density& d) {
  ComponentGrid g;
  const std::size_t k = d.cells();
  g.step = d.step;
  g.units = 1;
  g.silent = d.silent;
  g.values[{1}] = d.one_spike;
  std::vector<double> two((k + 1) * (k + 1), 0.0);
  for (std::size_t a = 1; a <= k; ++a)
    for (std::size_t b = 0; b < a; ++b) {
      std::size_t s = k - (a - b);  // node of 1 - (x1 - x2)
      two[a * (k + 1) + b] = d.rate[s] * d.one_spike[s];
    }
  g.values[{2}] = std::move(two);
  return g;
}

ComponentGrid component_grid(const Embedding& e, std::size_t units) {
  if (e.theta != 1.0) throw std::invalid_argument("component_grid: theta must be 1");
  ComponentGrid g;
  const std::size_t q = e.q, n1 = q + 1;
  g.step = 1.0 / static_cast<double>(q);
  g.units = units;
  auto index = [&](double age) { return static_cast<std::size_t>(std::llround(age * static_cast<double>(q))); };
  for (const auto& cell : e.cells) {
    std::size_t total = std::accumulate(cell.component.begin(), cell.component.end(), std::size_t{0});
    if (cell.component.size() != units) throw std::invalid_argument("component_grid: embedding has another unit count");
    if (total == 0) {
      g.silent += cell.mass;
      continue;
    }
    if (total > 2) continue;
    auto& v = g.values[cell.component];
    if (total == 1) {
      v.resize(n1, 0.0);
      for (std::size_t u = 0; u < units; ++u)
        if (!cell.ages[u].empty()) v[index(cell.ages[u][0])] = cell.density;
    } else {
      v.resize(n1 * n1, 0.0);
      std::size_t a = 0, b = 0;
      bool first = true;
      for (std::size_t u = 0; u < units; ++u)
        for (double age : cell.ages[u]) {
          (first ? a : b) = index(age);
          first = false;
        }
      v[a * n1 + b] = cell.density;
    }
  }
  for (auto& [c, v] : g.values) {
    std::size_t total = std::accumulate(c.begin(), c.end(), std::size_t{0});
    if (total == 1) {
      v[0] = v[1];
      continue;
    }
    bool same = std::count(c.begin(), c.end(), std::size_t{2}) == 1;
    for (std::size_t a = 0; a < n1; ++a) {
      if (same) {
        if (a >= 2) v[a * n1] = v[a * n1 + 1];
      } else {
        v[a * n1] = v[a * n1 + 1];
        v[a] = v[n1 + a];
      }
    }
    if (!same) v[0] = v[n1 + 1];
  }
  return g;
}

ComponentGrid component_grid(const ComponentMassEstimate& masses, const std::vector<DensityHistogram>& histograms,
                             std::size_t units) {
  ComponentGrid g;
  g.units = units;
  Estimate silent = masses.estimate(Component(units, 0));
  g.silent = silent.mean;
  g.silent_sigma = silent.sigma;
  for (const auto& hist : histograms) {
    const std::size_t k = hist.joint.size();
    if (k < 4) throw std::invalid_argument("component_grid: histograms need at least 4 bins");
    if (g.step == 0) g.step = 1.0 / static_cast<double>(k);
    if (std::abs(g.step * static_cast<double>(k) - 1.0) > 1e-12)
      throw std::invalid_argument("component_grid: histograms must share the bin count");
    Component c = unit_component(units, {hist.unit});
    auto& v = g.values[c];
    auto& s = g.sigmas[c];
    v.assign(k + 1, 0.0);
    s.assign(k + 1, 0.0);
    v[0] = hist.joint[0].mean;
    s[0] = hist.joint[0].sigma;
    v[k] = hist.joint[k - 1].mean;
    s[k] = hist.joint[k - 1].sigma;
    for (std::size_t j = 1; j < k; ++j) {
      v[j] = 0.5 * (hist.joint[j - 1].mean + hist.joint[j].mean);
      s[j] = 0.5 * std::hypot(hist.joint[j - 1].sigma, hist.joint[j].sigma);
    }
  }
  return g;
}

namespace {

void write_header(std::ostream& out, const TableHeader& header, const char* kind) {
  out << "# " << kind << '\n';
  out << "# config_hash\t" << std::hex << std::setw(16) << std::setfill('0') << header.config_hash << std::dec
      << std::setfill(' ') << '\n';
  out << "# seed\t" << header.seed << '\n';
  out << "# step\t" << header.step << '\n';
  out << "# normalization\t" << header.normalization << '\n';
}

}  // namespace

void write_example1_table(std::ostream& out, const Example1Density& d, const TableHeader& header) {
  out << std::setprecision(17);
  write_header(out, header, "example1 density");
  out << "# two-spike density depends on the gap d = x1 - x2 only\n";
  out << "component\tcoordinate\tvalue\n";
  out << "silent\t0\t" << d.silent << '\n';
  const std::size_t k = d.cells();
  for (std::size_t j = 0; j <= k; ++j) out << "one\t" << static_cast<double>(j) * d.step << '\t' << d.one_spike[j] << '\n';
  for (std::size_t j = 0; j <= k; ++j) {
    std::size_t s = k - j;
    out << "two_gap\t" << static_cast<double>(j) * d.step << '\t' << d.rate[s] * d.one_spike[s] << '\n';
  }
}

void write_example2_table(std::ostream& out, const Example2Density& d, const TableHeader& header) {
  out << std::setprecision(17);
  write_header(out, header, "example2 density");
  out << "# n_max\t" << d.n_max << '\n';
  out << "# tail_bound\t" << d.tail_bound << '\n';
  out << "y\tdensity\tcdf\n";
  const std::size_t k = d.cells();
  for (std::size_t n = 0; n <= d.n_max; ++n)
    for (std::size_t j = (n == 0 ? 1 : 0); j <= k; ++j) {
      if (n > 0 && j == 0) continue;
      double y = static_cast<double>(n) + static_cast<double>(j) * d.step;
      out << y << '\t' << d.density(y) << '\t' << d.cumulative[n][j] << '\n';
    }
}

}  // namespace pnn
