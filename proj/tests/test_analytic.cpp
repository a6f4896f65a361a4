#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "pnn/analytic.hpp"

using namespace pnn;

namespace {

// Plain composite Simpson, independent of the library quadrature.
template <class F>
double simpson(F&& f, double a, double b, int panels = 2000) {
  double h = (b - a) / panels, s = 0;
  for (int i = 0; i < panels; ++i) {
    double x = a + i * h;
    s += f(x) + 4 * f(x + h / 2) + f(x + h);
  }
  return s * h / 6;
}

double wavy_rate(double y) { return 0.6 + 0.4 * std::sin(2 * std::numbers::pi * y) + 0.3 * y * y; }

NetworkConfig single_neuron(double value) {
  NeuronSpec n;
  n.activation = ConstantActivation{value};
  return NetworkConfig(1.0, {}, {n});
}

}  // namespace

TEST_CASE("constant rate one gives the 2/5 density") {
  auto d = example1_density([](double) { return 1.0; });
  CHECK(d.silent == doctest::Approx(0.4).epsilon(1e-14));
  for (double v : d.one_spike) CHECK(v == doctest::Approx(0.4).epsilon(1e-14));
  CHECK(d.psi2(0.9, 0.2) == doctest::Approx(0.4).epsilon(1e-14));
  CHECK(d.psi2(0.2, 0.9) == 0.0);
  CHECK(d.one_spike_mass == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(d.two_spike_mass == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(d.silent + d.one_spike_mass + d.two_spike_mass == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("constant rate c normalizes as 1 + c + c^2/2") {
  for (double c : {0.3, 2.0}) {
    auto d = example1_density([c](double) { return c; });
    CHECK(d.silent == doctest::Approx(1 / (1 + c + c * c / 2)).epsilon(1e-12));
  }
}

TEST_CASE("one-spike density of a non-constant rate") {
  auto d = example1_density(wavy_rate);
  const std::size_t k = d.cells();
  REQUIRE(k == 1000);
  double sym = 0;
  for (std::size_t j = 0; j <= k; ++j) sym = std::max(sym, std::abs(d.one_spike[j] - d.one_spike[k - j]));
  CHECK(sym <= 1e-8);

  // psi_1 / psi_1(0) = exp int_0^theta (R(y) - R(1 - y)) dy
  auto g = [](double y) { return wavy_rate(y) - wavy_rate(1 - y); };
  for (double t : {0.1, 0.25, 0.5, 0.77, 1.0})
    CHECK(d.psi1(t) / d.psi1(0) == doctest::Approx(std::exp(simpson(g, 0, t))).epsilon(1e-10));

  // normalization from the same formula
  auto phi = [&](double s) { return std::exp(simpson(g, 0, s, 200)); };
  double r0 = wavy_rate(0);
  double z = 1 + r0 * simpson(phi, 0, 1, 400) + r0 * simpson([&](double s) { return s * wavy_rate(s) * phi(s); }, 0, 1, 400);
  CHECK(d.silent == doctest::Approx(1 / z).epsilon(1e-9));

  CHECK(d.psi1(1.0) == doctest::Approx(r0 * d.silent).epsilon(1e-12));

  // psi_1' = (R(t) - R(1 - t)) psi_1 with fourth-order central differences
  const double h = d.step;
  double worst = 0;
  for (std::size_t j = 2; j + 2 <= k; ++j) {
    const auto& p = d.one_spike;
    double deriv = (p[j - 2] - 8 * p[j - 1] + 8 * p[j + 1] - p[j + 2]) / (12 * h);
    worst = std::max(worst, std::abs(deriv - g(j * h) * p[j]));
  }
  CHECK(worst <= 1e-6);
}

TEST_CASE("example 1 rate from a network") {
  Truncation two{2, std::nullopt};
  auto r = example1_rate(single_neuron(1.0), two);
  CHECK(r(0.0) == 1.0);
  CHECK(r(0.5) == 1.0);
  CHECK_THROWS_AS(example1_rate(single_neuron(1.0)), ConfigError);
  CHECK_THROWS_AS(example1_rate(NetworkConfig(2.0, {}, {NeuronSpec{}}), two), ConfigError);
  CHECK_THROWS_AS(example1_density([](double) { return 1.0; }, 0.3), std::invalid_argument);
}

TEST_CASE("stationary equations hold for the closed form") {
  auto c = example1_density([](double) { return 1.0; });
  auto report = stationary_equation_residual(component_grid(c), single_neuron(1.0), Truncation{2, std::nullopt});
  REQUIRE(report.items.size() >= 4);
  CHECK(report.find("silent_balance"));
  CHECK(report.find("transport_one_spike_u0"));
  CHECK(report.find("boundary_one_spike_u0"));
  CHECK(report.max_abs() <= 1e-12);
}

TEST_CASE("refractory neuron rate seen by the one-spike density") {
  // constant 1.5 with hard refractory 0.3: R(x) = 0 for ages x >= 0.7
  NeuronSpec n;
  n.activation = ConstantActivation{1.5};
  n.refractory = HardRefractory{0.3};
  NetworkConfig cfg(1.0, {}, {n});
  auto rate = example1_rate(cfg, Truncation{2, std::nullopt});
  CHECK(rate(0.8) == 0.0);
  CHECK(rate(0.5) == 1.5);
  CHECK(rate(0.0) == 1.5);
  auto d = example1_density([](double x) { return 1.5 * (1 - std::pow(x, 3)); });
  CHECK(d.silent + d.one_spike_mass + d.two_spike_mass == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("chain grid residual shrinks as the grid refines") {
  auto cfg = single_neuron(1.0);
  Truncation two{2, std::nullopt};
  double coarse = 0, fine = 0;
  for (std::size_t q : {4, 16}) {
    ChainOptions opt;
    opt.q = q;
    opt.truncation = two;
    auto chain = enumerate_states(cfg, opt);
    auto e = embed(chain, stationary(chain).pi);
    auto report = stationary_equation_residual(component_grid(e, 1), cfg, two);
    (q == 4 ? coarse : fine) = report.find("silent_balance")->max_abs;
  }
  CHECK(fine < coarse);
}

TEST_CASE("simulated grid satisfies the equations within noise") {
  auto cfg = single_neuron(1.0);
  Truncation two{2, std::nullopt};
  SamplingOptions opt;
  opt.horizon = 20000;
  opt.simulation.truncation = two;
  auto masses = estimate_component_masses(cfg, opt);
  auto hist = estimate_density_1d(cfg, {1}, 10, opt);
  auto grid = component_grid(masses, {hist}, 1);
  auto report = stationary_equation_residual(grid, cfg, two);
  const auto* boundary = report.find("boundary_one_spike_u0");
  REQUIRE(boundary);
  CHECK(boundary->max_z <= 4.0);
}

TEST_CASE("example 2 with constant rate is a power law near zero") {
  const double gamma = 1.2;
  auto d = example2_density([=](double) { return gamma; }, gamma);
  double worst = 0;
  for (int i = 1; i < 1000; ++i) {
    double y = i / 1000.0;
    worst = std::max(worst, std::abs(d.density(y) / (d.density(1.0) * std::pow(y, gamma - 1)) - 1));
  }
  CHECK(worst <= 1e-6);
  CHECK(d.tail_bound < 1e-10);
  CHECK(d.cdf(static_cast<double>(d.n_max) + 1) == doctest::Approx(1.0).epsilon(1e-9));
  // Campbell: mean gamma, variance gamma / 2
  double m1 = example2_moment(d, 1), m2 = example2_moment(d, 2);
  CHECK(m1 == doctest::Approx(gamma).epsilon(1e-6));
  CHECK(m2 - m1 * m1 == doctest::Approx(gamma / 2).epsilon(1e-6));
}

TEST_CASE("example 2 balance holds for several rates") {
  ShotNoiseRate logistic{LogisticActivation{0.5, 2.0, 1.5, 1.0}, 0.0, 1.0};
  std::vector<std::pair<LevelRate, double>> rates{{[](double) { return 0.5; }, 0.5},
                                                  {[](double) { return 3.0; }, 3.0},
                                                  {logistic, logistic.bound()}};
  for (auto& [gamma, bound] : rates) {
    auto d = example2_density(gamma, bound);
    double worst = 0;
    for (int i = 1; i < 500; ++i) worst = std::max(worst, std::abs(example2_balance_residual(d, i / 100.0 + 0.003)));
    CHECK(worst <= 1e-6);
  }
}

TEST_CASE("example 2 density is continuous at the integers") {
  ShotNoiseRate logistic{LogisticActivation{1.1, 2.5, 1.0, 1.0}, 0.0, 1.0};
  auto d = example2_density(logistic, logistic.bound());
  for (int n = 1; n <= 6; ++n) {
    double left = d.density(n - 1e-9), right = d.density(n + 1e-9);
    CHECK(left == doctest::Approx(right).epsilon(1e-6));
  }
  double last = 0;
  for (int i = 1; i <= 130; ++i) {
    double c = d.cdf(i / 10.0);
    CHECK(c >= last);
    last = c;
  }
}

TEST_CASE("example 2 input checks") {
  CHECK_THROWS_AS(example2_density([](double) { return 0.0; }, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(example2_density([](double) { return 1.0; }, 1.0, 12, 1.0 / 3), std::invalid_argument);
  CHECK_THROWS_AS(example2_density([](double) { return 2.0; }, 1.0), std::invalid_argument);
}

TEST_CASE("shot noise simulation has Campbell moments") {
  const double gamma = 1.2;
  ShotNoiseOptions opt;
  opt.horizon = 2e5;
  opt.stride = 5;
  auto run = simulate_shotnoise([=](double) { return gamma; }, gamma, opt);
  REQUIRE(run.samples.size() > 30000);
  auto m = shotnoise_moments(run.samples);
  CHECK(std::abs(m.mean.mean - gamma) <= 3 * m.mean.sigma);
  CHECK(std::abs(m.variance.mean - gamma / 2) <= 3 * m.variance.sigma);
  auto again = simulate_shotnoise([=](double) { return gamma; }, gamma, opt);
  CHECK(again.samples == run.samples);
}

TEST_CASE("density tables carry provenance") {
  auto d = example1_density([](double) { return 1.0; }, 0.1);
  std::ostringstream out;
  write_example1_table(out, d, TableHeader{0xabcULL, 7, 0.1, d.normalization});
  auto text = out.str();
  CHECK(text.find("# config_hash\t0000000000000abc") != std::string::npos);
  CHECK(text.find("# seed\t7") != std::string::npos);
}
