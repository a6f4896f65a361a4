#include <doctest.h>

#include <cmath>
#include <numbers>

#include "pnn/trunc.hpp"

using namespace pnn;

namespace {

NetworkConfig feedback_neurons(std::size_t count, double bound, Refractory r = NoRefractory{}) {
  NeuronSpec n;
  n.activation = ConstantActivation{bound};
  n.refractory = r;
  return NetworkConfig(1.0, {}, std::vector<NeuronSpec>(count, n));
}

}  // namespace

TEST_CASE("truncation bound for one neuron with unit rate bound") {
  auto cfg = feedback_neurons(1, 1.0);
  CHECK(truncation_bound(cfg, 2) == doctest::Approx(2.95).epsilon(0.002));
  CHECK(truncation_bound(cfg, 3) == doctest::Approx(1.53).epsilon(0.002));
  CHECK(truncation_bound(cfg, 4) == doctest::Approx(0.708).epsilon(0.001));
  CHECK(truncation_bound(cfg, 5) == doctest::Approx(0.299).epsilon(0.002));
  // direct evaluation of the formula
  for (std::size_t n = 1; n <= 8; ++n) {
    double nn = static_cast<double>(n);
    double expected = 2 / std::sqrt(std::numbers::pi) * std::exp(1.0) * std::pow(nn, -(nn + 1) / 2) * std::exp(0.5 * nn);
    CHECK(truncation_bound(cfg, n) == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("truncation bound scales with the neuron count") {
  // a second identical neuron doubles 2N and adds its bound to the exponent
  auto one = feedback_neurons(1, 1.0);
  auto two = feedback_neurons(2, 1.0);
  for (std::size_t n : {2, 4, 6}) CHECK(truncation_bound(two, n) / truncation_bound(one, n) == doctest::Approx(2 * std::exp(1.0)));
}

TEST_CASE("stationary density bound of a component") {
  NetworkConfig src(1.0, {SourceSpec{1.5}}, {});
  CHECK(density_bound(src, {0}) == doctest::Approx(std::exp(-1.5)));
  CHECK(density_bound(src, {1}) == doctest::Approx(1.5 * std::exp(-1.5)));
  CHECK(density_bound(src, {3}) == doctest::Approx(1.5 * 1.5 * 1.5 * std::exp(-1.5)));
  NeuronSpec n;
  n.activation = ConstantActivation{0.5};
  NetworkConfig mixed(2.0, {SourceSpec{1.0}}, {n});
  CHECK(density_bound(mixed, {1, 2}) == doctest::Approx(1.0 * 0.25 * std::exp(-2.0 * 1.0)));
}

TEST_CASE("truncated rate silences a neuron holding n spikes") {
  auto cfg = feedback_neurons(1, 0.7);
  WindowState two(1.0, {{0.8, 0.3}});
  CHECK(truncated_rate(two, cfg, 0, 2) == 0.0);
  CHECK(truncated_rate(two, cfg, 0, 3) == doctest::Approx(0.7));
  CHECK(truncated_rate(WindowState::empty(1.0, 1), cfg, 0, 1) == doctest::Approx(0.7));
  CHECK_THROWS_AS(truncated_rate(two, cfg, 0, 0), std::invalid_argument);
}

TEST_CASE("coupling never splits when the cap exceeds the reachable count") {
  // spacing > 0.25 allows at most four spikes in a unit window
  auto cfg = feedback_neurons(1, 4.0, HardRefractory{0.25});
  auto stats = simulate_coupled(cfg, 5, 2000, 3);
  CHECK(stats.mismatch_length == 0.0);
  CHECK(stats.splits == 0);
  CHECK(stats.probability.mean == 0.0);
}

TEST_CASE("coupled mismatch intervals are disjoint and sum to the measure") {
  auto cfg = feedback_neurons(1, 1.0);
  auto stats = simulate_coupled(cfg, 2, 5000, 8);
  REQUIRE(stats.splits > 0);
  double total = 0, last = 0;
  for (auto [a, b] : stats.split_intervals) {
    CHECK(a >= last);
    CHECK(b > a);
    total += b - a;
    last = b;
  }
  CHECK(total == doctest::Approx(stats.mismatch_length));
  CHECK(stats.probability.mean == doctest::Approx(stats.mismatch_length / 5000.0));
  CHECK(stats.probability.mean <= truncation_bound(cfg, 2));
  CHECK(stats.merges + 1 >= stats.splits);
  CHECK_THROWS_AS(simulate_coupled(cfg, 0, 10, 1), std::invalid_argument);
  CHECK_THROWS_AS(simulate_coupled(cfg, 2, 0, 1), std::invalid_argument);
}

TEST_CASE("coupling is reproducible") {
  auto cfg = feedback_neurons(1, 1.0);
  auto a = simulate_coupled(cfg, 3, 1000, 5);
  auto b = simulate_coupled(cfg, 3, 1000, 5);
  CHECK(a.split_intervals == b.split_intervals);
}
