#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "pnn/core.hpp"

using namespace pnn;

namespace {

NeuronSpec constant_neuron(double value, Refractory r = NoRefractory{}) {
  NeuronSpec n;
  n.activation = ConstantActivation{value};
  n.refractory = r;
  return n;
}

NeuronSpec linear_neuron() {
  NeuronSpec n;
  n.activation = LinearClippedActivation{1.0, 0.0, 0.01, 100.0};
  return n;
}

}  // namespace

TEST_CASE("window state rejects unordered or out-of-range ages") {
  CHECK_THROWS_AS(WindowState(1.0, {{0.3, 0.5}}), std::invalid_argument);
  CHECK_THROWS_AS(WindowState(1.0, {{1.2}}), std::invalid_argument);
  CHECK_THROWS_AS(WindowState(1.0, {{0.0}}), std::invalid_argument);
  CHECK_THROWS_AS(WindowState(1.0, {{0.4, 0.4}}), std::invalid_argument);
  WindowState s(1.0, {{1.0, 0.5}, {}});
  CHECK(s.total_count() == 2);
  CHECK(s.latest(0) == 1.0);
  CHECK(s.latest(1) == 0.0);
}

TEST_CASE("influx of an empty window is the background") {
  NetworkConfig cfg(1.0, {}, {linear_neuron()});
  NeuronSpec n = linear_neuron();
  n.background = 0.5;
  NetworkConfig cfg2(1.0, {}, {n});
  CHECK(synaptic_influx(WindowState::empty(1.0, 1), cfg2, 0) == doctest::Approx(0.5));
  CHECK(synaptic_influx(WindowState::empty(1.0, 1), cfg, 0) == 0.0);
}

TEST_CASE("influx from one source spike under a constant kernel") {
  Synapse syn{0, 0, 2.0, ConstantKernel{1.0}};
  NetworkConfig cfg(1.0, {SourceSpec{1.0}}, {linear_neuron()}, {syn});
  WindowState s(1.0, {{0.6}, {}});
  CHECK(synaptic_influx(s, cfg, 0) == doctest::Approx(2.0));
}

TEST_CASE("influx sums a linear kernel over two presynaptic spikes") {
  // kernel t on [0, 1]; ages 0.8 and 0.3 mean elapsed times 0.2 and 0.7
  Synapse syn{0, 1, 1.0, LinearKernel{1.0}};
  NetworkConfig cfg(1.0, {}, {linear_neuron(), linear_neuron()}, {syn});
  WindowState s(1.0, {{}, {0.8, 0.3}});
  CHECK(synaptic_influx(s, cfg, 0) == doctest::Approx(0.9));
  CHECK(synaptic_influx(s, cfg, 1) == 0.0);
  CHECK_THROWS_AS(synaptic_influx(s, cfg, 2), std::out_of_range);
}

TEST_CASE("kernel is zero outside its support") {
  CHECK(evaluate(Kernel{ConstantKernel{3.0}}, 1.5, 1.0) == 0.0);
  CHECK(evaluate(Kernel{ConstantKernel{3.0}}, -0.1, 1.0) == 0.0);
  CHECK(evaluate(Kernel{AlphaBumpKernel{1.0}}, 1.0 / 3.0, 1.0) == doctest::Approx(1.0));
  CHECK(evaluate(Kernel{TriangularKernel{2.0, 0.5}}, 0.25, 1.0) == doctest::Approx(1.0));
}

TEST_CASE("rate vanishes inside the hard refractory period") {
  NetworkConfig cfg(1.0, {}, {constant_neuron(0.8, HardRefractory{0.2})});
  WindowState fresh(1.0, {{0.9}});
  CHECK(firing_rate(fresh, cfg, 0) == 0.0);
  WindowState old(1.0, {{0.7}});
  CHECK(firing_rate(old, cfg, 0) == doctest::Approx(0.8));
  CHECK(firing_rate(WindowState::empty(1.0, 1), cfg, 0) == doctest::Approx(0.8));
}

TEST_CASE("activations stay within their bounds") {
  Activation a = LogisticActivation{0.1, 1.0, 2.0, 0.0};
  for (double x : {-50.0, -1.0, 0.0, 1.0, 50.0}) {
    CHECK(evaluate(a, x) >= 0.1);
    CHECK(evaluate(a, x) <= 1.0);
  }
  Activation l = LinearClippedActivation{1.0, 0.0, 0.1, 1.0};
  CHECK(evaluate(l, 5.0) == 1.0);
  CHECK(evaluate(l, -5.0) == 0.1);
  CHECK(evaluate(l, 0.5) == 0.5);
}

TEST_CASE("advance drifts ages and drops expired spikes") {
  WindowState s(1.0, {{0.7, 0.2}});
  auto drifted = advance(s, 0.3);
  REQUIRE(drifted.count(0) == 1);
  CHECK(drifted.ages(0)[0] == doctest::Approx(0.4));
  CHECK(advance(s, 0.0) == s);
  CHECK(advance(s, 2.0) == WindowState::empty(1.0, 1));
  CHECK_THROWS_AS(advance(s, -0.1), std::invalid_argument);
}

TEST_CASE("advance is a semigroup") {
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::vector<double>> ages(3);
    for (auto& a : ages) {
      int k = static_cast<int>(u(gen) * 4);
      for (int i = 0; i < k; ++i) a.push_back(u(gen) * 0.999 + 0.001);
      std::sort(a.rbegin(), a.rend());
      a.erase(std::unique(a.begin(), a.end()), a.end());
    }
    WindowState s(1.0, ages);
    // dyadic steps keep the sums exact
    double t1 = std::ldexp(std::floor(u(gen) * 64), -7);
    double t2 = std::ldexp(std::floor(u(gen) * 64), -7);
    auto two = advance(advance(s, t1), t2);
    auto one = advance(s, t1 + t2);
    REQUIRE(two.num_units() == one.num_units());
    for (std::size_t k = 0; k < one.num_units(); ++k) {
      REQUIRE(two.count(k) == one.count(k));
      for (std::size_t j = 0; j < one.count(k); ++j) CHECK(two.ages(k)[j] == doctest::Approx(one.ages(k)[j]));
    }
  }
}

TEST_CASE("apply_spike prepends an age-theta spike") {
  WindowState s(2.0, {{1.5}, {}});
  auto t = apply_spike(s, 0);
  CHECK(t == WindowState(2.0, {{2.0, 1.5}, {}}));
  auto u = apply_spike(t, 1);
  CHECK(u.ages(1).size() == 1);
  CHECK(u.ages(1)[0] == 2.0);
}

TEST_CASE("stdp moves a synapse one level on a matching lag") {
  // neuron 0 -> neuron 1, pre fired 0.05 before the post spike
  Synapse syn{1, 0, 0.5, ConstantKernel{1.0}};
  NetworkConfig cfg(1.0, {}, {constant_neuron(1.0), constant_neuron(1.0)}, {syn});
  PlasticSynapse ps{0, {0.5, 1.0}, 1, {LagRule{1, -0.1, 0.0, 2}}};
  PlasticityConfig pcfg(cfg, {ps});
  auto plastic = initial_plastic_state(pcfg);
  CHECK(synapse_weight(cfg, 0, &pcfg, &plastic) == 0.5);

  WindowState s(1.0, {{0.95}, {}});
  auto lag = stdp_lag(s, cfg, 0, cfg.neuron_unit(1));
  REQUIRE(lag);
  CHECK(*lag == doctest::Approx(-0.05));
  auto next = stdp_update(plastic, pcfg, cfg, s, cfg.neuron_unit(1));
  CHECK(next.levels == std::vector<int>{2});
  CHECK(synapse_weight(cfg, 0, &pcfg, &next) == 1.0);

  // no counterpart spike
  CHECK(stdp_update(plastic, pcfg, cfg, WindowState::empty(1.0, 2), cfg.neuron_unit(1)) == plastic);
  // lag outside every interval
  WindowState far(1.0, {{0.5}, {}});
  CHECK(stdp_update(plastic, pcfg, cfg, far, cfg.neuron_unit(1)) == plastic);
  // pre firing after post gives a positive lag
  WindowState after(1.0, {{}, {0.95}});
  CHECK(*stdp_lag(after, cfg, 0, cfg.neuron_unit(0)) == doctest::Approx(0.05));
  CHECK(stdp_update(plastic, pcfg, cfg, after, cfg.neuron_unit(0)) == plastic);
}

TEST_CASE("stdp skips autapses") {
  Synapse syn{0, 0, 0.5, ConstantKernel{1.0}};
  NetworkConfig cfg(1.0, {}, {constant_neuron(1.0)}, {syn});
  PlasticityConfig pcfg(cfg, {PlasticSynapse{0, {0.5, 1.0}, 1, {LagRule{1, -0.5, 0.5, 2}}}});
  WindowState s(1.0, {{0.9}});
  CHECK_FALSE(stdp_lag(s, cfg, 0, 0));
  CHECK(stdp_update(initial_plastic_state(pcfg), pcfg, cfg, s, 0).levels == std::vector<int>{1});
}

TEST_CASE("plasticity configuration is validated") {
  Synapse syn{1, 0, 0.5, ConstantKernel{1.0}};
  NetworkConfig cfg(1.0, {}, {constant_neuron(1.0), constant_neuron(1.0)}, {syn});
  CHECK_THROWS_AS(PlasticityConfig(cfg, {PlasticSynapse{0, {0.5, 1.0}, 1, {LagRule{1, -0.1, 0.0, 3}}}}),
                  ConfigError);
  CHECK_THROWS_AS(PlasticityConfig(cfg, {PlasticSynapse{0, {0.5, 1.0}, 1,
                                                        {LagRule{1, -0.1, 0.0, 2}, LagRule{1, -0.05, 0.1, 1}}}}),
                  ConfigError);
  CHECK_THROWS_AS(PlasticityConfig(cfg, {PlasticSynapse{0, {0.5, 1.0}, 1, {LagRule{1, -1.5, 0.0, 2}}}}),
                  ConfigError);
  CHECK_THROWS_AS(PlasticityConfig(cfg, {PlasticSynapse{0, {1.0, 0.5}, 1, {}}}), ConfigError);
  CHECK_THROWS_AS(PlasticityConfig(cfg, {PlasticSynapse{3, {0.5}, 1, {}}}), ConfigError);
}

TEST_CASE("network configuration is validated") {
  CHECK_THROWS_AS(NetworkConfig(0.0, {}, {}), ConfigError);
  CHECK_THROWS_AS(NetworkConfig(1.0, {SourceSpec{-1.0}}, {}), ConfigError);
  CHECK_THROWS_AS(NetworkConfig(1.0, {}, {constant_neuron(1.0)}, {Synapse{1, 0, 1.0, ZeroKernel{}}}), ConfigError);
}
