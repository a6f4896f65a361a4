#include <doctest.h>

#include <cmath>
#include <sstream>

#include "pnn/sim.hpp"

using namespace pnn;

namespace {

NetworkConfig one_source(double rate, double theta = 1.0) { return NetworkConfig(theta, {SourceSpec{rate}}, {}); }

double poisson_pmf(double lambda, std::size_t m) {
  return std::exp(-lambda + static_cast<double>(m) * std::log(lambda) - std::lgamma(static_cast<double>(m) + 1));
}

}  // namespace

TEST_CASE("candidate stream is strictly increasing and reproducible") {
  CandidateStream a(3.0, 11), b(3.0, 11);
  double last = 0;
  for (int i = 0; i < 1000; ++i) {
    auto ca = a.next();
    auto cb = b.next();
    CHECK(ca.time > last);
    CHECK(ca.time == cb.time);
    CHECK(ca.position == cb.position);
    CHECK(ca.position >= 0.0);
    CHECK(ca.position < 3.0);
    last = ca.time;
  }
  CandidateStream empty(0.0, 1);
  CHECK(std::isinf(empty.next().time));
}

TEST_CASE("source spike count over ten time units is Poisson(20)") {
  auto cfg = one_source(2.0);
  const int seeds = 1000;
  double sum = 0, sum2 = 0;
  for (int s = 0; s < seeds; ++s) {
    auto log = simulate(cfg, WindowState::empty(1.0, 1), 10.0, replication_seed(5, s));
    double n = static_cast<double>(log.events.size());
    sum += n;
    sum2 += n * n;
  }
  double mean = sum / seeds;
  double var = sum2 / seeds - mean * mean;
  CHECK(std::abs(mean - 20.0) < 4 * std::sqrt(20.0 / seeds));
  // var of the sample variance for Poisson is about (mu + 2 mu^2) / n
  CHECK(std::abs(var - 20.0) < 4 * std::sqrt((20.0 + 2 * 400.0) / seeds));
}

TEST_CASE("source inter-spike times are exponential") {
  auto cfg = one_source(2.0);
  auto log = simulate(cfg, WindowState::empty(1.0, 1), 5000.0, 3);
  std::vector<double> gaps;
  for (std::size_t i = 1; i < log.events.size(); ++i) gaps.push_back(log.events[i].time - log.events[i - 1].time);
  REQUIRE(gaps.size() > 9000);
  double d = ks_statistic(gaps, [](double t) { return 1 - std::exp(-2.0 * t); });
  CHECK(d < ks_critical_value(gaps.size(), 0.01));
}

TEST_CASE("identical seeds give identical event logs") {
  NeuronSpec n;
  n.activation = LogisticActivation{0.1, 2.0, 1.0, 0.5};
  NetworkConfig cfg(1.0, {SourceSpec{0.7}}, {n}, {Synapse{0, 0, 1.5, AlphaBumpKernel{1.0}}});
  auto a = simulate(cfg, WindowState::empty(1.0, 2), 200.0, 42);
  auto b = simulate(cfg, WindowState::empty(1.0, 2), 200.0, 42);
  auto c = simulate(cfg, WindowState::empty(1.0, 2), 200.0, 43);
  CHECK(a == b);
  CHECK_FALSE(a == c);
  std::ostringstream sa, sb;
  write_events(sa, a);
  write_events(sb, b);
  CHECK(sa.str() == sb.str());
  CHECK(sa.str().rfind("time\tunit\tkind\n", 0) == 0);
}

TEST_CASE("hard refractory spacing is respected") {
  NeuronSpec n;
  n.activation = ConstantActivation{4.0};
  n.refractory = HardRefractory{0.25};
  NetworkConfig cfg(1.0, {}, {n});
  auto log = simulate(cfg, WindowState::empty(1.0, 1), 500.0, 9);
  REQUIRE(log.events.size() > 100);
  for (std::size_t i = 1; i < log.events.size(); ++i) CHECK(log.events[i].time - log.events[i - 1].time > 0.25);
}

TEST_CASE("simulate rejects mismatched states and negative horizons") {
  auto cfg = one_source(1.0);
  CHECK_THROWS_AS(simulate(cfg, WindowState::empty(1.0, 2), 1.0, 1), ConfigError);
  CHECK_THROWS_AS(simulate(cfg, WindowState::empty(1.0, 1), -1.0, 1), ConfigError);
}

TEST_CASE("component masses of a Poisson source") {
  auto cfg = one_source(1.5);
  SamplingOptions opt;
  opt.horizon = 4000;
  opt.seed = 2;
  auto est = estimate_component_masses(cfg, opt);
  CHECK(est.total() == doctest::Approx(1.0));
  for (std::size_t m = 0; m <= 4; ++m) {
    auto e = est.estimate({m});
    INFO("m = " << m << " mass " << e.mean << " sigma " << e.sigma);
    CHECK(std::abs(e.mean - poisson_pmf(1.5, m)) < 4 * e.sigma + 1e-12);
  }
}

TEST_CASE("age density of a lone source spike is flat") {
  auto cfg = one_source(1.0);
  SamplingOptions opt;
  opt.horizon = 4000;
  auto h = estimate_density_1d(cfg, {1}, 10, opt);
  REQUIRE(h.conditional.size() == 10);
  for (const auto& c : h.conditional) CHECK(std::abs(c.mean - 1.0) < 4 * c.sigma);
  // joint density = P(one spike) * flat = rho e^{-rho}
  double mid = 0;
  for (const auto& j : h.joint) mid += j.mean / 10.0;
  CHECK(mid == doctest::Approx(std::exp(-1.0)).epsilon(0.05));
}

TEST_CASE("disagreement horizon is the oldest unmatched age") {
  WindowState a(1.0, {{0.9, 0.4}, {0.3}});
  WindowState b(1.0, {{0.9}, {0.6, 0.3}});
  CHECK(disagreement_horizon(a, b) == 0.6);
  CHECK(disagreement_horizon(a, a) == 0.0);
  CHECK(disagreement_horizon(WindowState::empty(1.0, 2), a) == 0.9);
}

TEST_CASE("coupled simulators fed one stream agree from a common start") {
  NeuronSpec n;
  n.activation = LinearClippedActivation{1.0, 0.2, 0.1, 1.0};
  NetworkConfig cfg(1.0, {SourceSpec{0.5}}, {n}, {Synapse{0, 0, 0.5, ConstantKernel{1.0}}});
  Simulator a(cfg, WindowState::empty(1.0, 2)), b(cfg, WindowState::empty(1.0, 2));
  CandidateStream s(cfg.total_candidate_rate(), 4);
  for (int i = 0; i < 2000; ++i) {
    auto c = s.next();
    CHECK(a.offer(c) == b.offer(c));
  }
  CHECK(a.state() == b.state());
}

TEST_CASE("saturated state packs refractory neurons at their period") {
  NeuronSpec n;
  n.refractory = HardRefractory{0.25};
  NetworkConfig cfg(1.0, {SourceSpec{0.5}}, {n});
  auto s = saturated_state(cfg, 3);
  CHECK(s.count(0) == 3);
  CHECK(s.count(1) == 4);
  for (std::size_t j = 1; j < s.count(1); ++j) CHECK(s.ages(1)[j - 1] - s.ages(1)[j] > 0.25);
}

TEST_CASE("merge curve from identical states is zero") {
  NeuronSpec n;
  NetworkConfig cfg(1.0, {}, {n});
  auto curve = ergodicity_diagnostic(cfg, WindowState::empty(1.0, 1), WindowState::empty(1.0, 1), {0.0, 1.0}, 20, 1);
  CHECK(curve.unmerged == std::vector<double>{0.0, 0.0});
}
