#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "pnn/chain.hpp"
#include "pnn/network.hpp"
#include "pnn/sim.hpp"
#include "pnn/stats.hpp"

namespace pnn {

// Rate of the single unit of a one-unit network as a function of the age of
// its only window spike; R(0) is the rate of the empty window.
using AgeRate = std::function<double(double)>;

// Stationary density of a one-unit network whose rate vanishes on states
// with two or more window spikes (theta = 1).
struct Example1Density {
  double step = 1e-3;
  double silent = 0.0;           // psi_0
  double empty_rate = 0.0;       // R(0)
  std::vector<double> one_spike;  // psi_1 at nodes j * step, j = 0..K
  std::vector<double> one_spike_slope;
  std::vector<double> rate;       // R at the same nodes (rate[0] = R(0))
  double one_spike_mass = 0.0;
  double two_spike_mass = 0.0;
  double normalization = 0.0;  // 1 / psi_0
  AgeRate rate_function;

  std::size_t cells() const { return one_spike.size() - 1; }
  double psi1(double theta) const;
  // psi_2 at ages x1 > x2 in (0, 1]: R(1 - d) psi_1(1 - d) with d = x1 - x2.
  double psi2(double x1, double x2) const;
};

// Throws std::invalid_argument when 1/step is not an integer or R is
// negative; the support condition is checked by example1_rate.
Example1Density example1_density(const AgeRate& rate, double step = 1e-3);

// R for a single-neuron network (theta = 1, no sources), checking that the
// (optionally truncated) rate vanishes on every two-spike window sampled on a
// grid.  Throws ConfigError otherwise.
AgeRate example1_rate(const NetworkConfig& cfg, const Truncation& truncation = {});

using LevelRate = std::function<double(double)>;

// A piece of the Example 2 density near its left end n, tabulated on a
// uniform grid in tau where y = n + span * tau^power.
struct NearPiece {
  double power = 1.0;
  std::vector<double> values, slopes;
};

// Stationary density of the shot-noise process dY = -Y dt + dZ with jump
// intensity gamma(Y), on (0, n_max + 1), built piecewise on J_n = (n, n+1].
struct Example2Density {
  double step = 1e-3;
  std::size_t n_max = 12;
  double exponent = 0.0;  // gamma(0) - 1
  double scale = 0.0;     // psi(1)
  double gamma_bound = 0.0;
  LevelRate gamma;
  std::vector<double> log_correction;        // log of psi(y) / (psi(1) y^exponent) on [0,1] nodes
  std::vector<double> log_correction_slope;  // (gamma(y) - gamma(0)) / y
  std::vector<std::vector<double>> pieces;   // pieces[n][j]: unscaled phi_n(n + j step)
  std::vector<std::vector<double>> slopes;
  std::vector<NearPiece> near;  // unscaled phi_n on [n, n + near_span], n >= 1
  double near_span = 0.0;
  std::vector<double> piece_mass;            // normalized mass of J_n
  std::vector<std::vector<double>> cumulative;  // normalized mass of (0, n + j step]
  double tail_bound = 0.0;  // bound on the mass beyond n_max + 1

  std::size_t cells() const { return log_correction.size() - 1; }
  double density(double y) const;
  double cdf(double y) const;
};

// Throws std::invalid_argument for gamma(0) <= 0 (the density ~ y^{gamma(0)-1}
// is then not integrable at 0), for a step with odd or non-integer 1/step,
// or for gamma outside [0, gamma_bound].
Example2Density example2_density(const LevelRate& gamma, double gamma_bound, std::size_t n_max = 12,
                                 double step = 1e-3);

// int y^order psi(y) dy over (0, n_max + 1).
double example2_moment(const Example2Density& d, int order);

// y psi(y) - int_{(y-1)^+}^y gamma(x) psi(x) dx.
double example2_balance_residual(const Example2Density& d, double y);

// gamma(y) = activation(background + weight * y).
struct ShotNoiseRate {
  Activation activation = ConstantActivation{1.0};
  double background = 0.0;
  double weight = 0.0;

  double operator()(double y) const { return evaluate(activation, background + weight * y); }
  double bound() const { return upper_bound(activation); }
};

struct ShotNoiseOptions {
  double horizon = 1e5;
  double burn_in = 50.0;
  double stride = 10.0;
  std::uint64_t seed = 1;
};

struct ShotNoiseRun {
  std::vector<double> samples;  // Y at burn_in + k stride
  std::size_t jumps = 0;
  std::size_t candidates = 0;
};

// Exact simulation from Y(0) = 0 by thinning a rate-gamma_bound stream.
// Throws std::invalid_argument if gamma exceeds gamma_bound or is negative.
ShotNoiseRun simulate_shotnoise(const LevelRate& gamma, double gamma_bound, const ShotNoiseOptions& options);

struct MomentEstimate {
  Estimate mean;
  Estimate variance;
};
// Batch-means errors on the sample mean and the sample variance.
MomentEstimate shotnoise_moments(const std::vector<double>& samples, std::size_t batches = 32);

// Densities of the components with at most two window spikes on the nodes
// j * step, j = 0..K, theta = 1.  One-spike components hold K+1 values, two
// spike components (K+1)^2 values [a * (K+1) + b]: for two spikes of one unit
// a indexes the more recent spike x1 > x2 (b), for units u < w a indexes x_u.
struct ComponentGrid {
  double step = 0.0;
  std::size_t units = 0;
  double silent = 0.0;
  double silent_sigma = 0.0;
  std::map<Component, std::vector<double>> values;
  std::map<Component, std::vector<double>> sigmas;  // optional, same layout

  std::size_t cells() const;
};

struct ResidualItem {
  std::string equation;
  std::size_t points = 0;
  double max_abs = 0.0;
  double mean_abs = 0.0;
  double max_z = 0.0;  // max |residual| / sigma over points with sigma > 0
};

struct ResidualReport {
  std::vector<ResidualItem> items;
  double max_abs() const;
  const ResidualItem* find(const std::string& equation) const;
};

// Checks the silent balance, the transport equation of each one-spike
// component (central differences), its boundary value at age 1, the two-spike
// boundary values and, where the rates vanish on two-spike windows, the
// two-spike transport along the diagonal.  Throws std::invalid_argument for
// grids that do not match the network (at most 2 units, theta = 1).
ResidualReport stationary_equation_residual(const ComponentGrid& grid, const NetworkConfig& cfg,
                                            const Truncation& truncation = {});

ComponentGrid component_grid(const Example1Density& d);
// Cell densities of the embedded chain placed on nodes j / q; age-0 nodes copy
// their neighbour.
ComponentGrid component_grid(const Embedding& e, std::size_t units);
// One-spike histograms with K bins averaged onto the K+1 nodes.
ComponentGrid component_grid(const ComponentMassEstimate& masses, const std::vector<DensityHistogram>& histograms,
                             std::size_t units);

struct TableHeader {
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
  double step = 0.0;
  double normalization = 0.0;
};

void write_example1_table(std::ostream& out, const Example1Density& d, const TableHeader& header);
void write_example2_table(std::ostream& out, const Example2Density& d, const TableHeader& header);

}  // namespace pnn
