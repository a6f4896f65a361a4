#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <set>

#include "pnn/chain.hpp"

using namespace pnn;

namespace {

NetworkConfig one_source(double rate) { return NetworkConfig(1.0, {SourceSpec{rate}}, {}); }

GridState single(const std::vector<double>& ages, std::size_t q) { return GridState{{grid_mask(ages, q)}}; }

NetworkConfig example1_network() {
  NeuronSpec n;
  n.activation = ConstantActivation{1.0};
  return NetworkConfig(1.0, {}, {n});
}

NetworkConfig source_and_neuron() {
  NeuronSpec n;
  n.activation = LinearClippedActivation{1.0, 0.3, 0.1, 1.5};
  n.refractory = HardRefractory{0.4};
  return NetworkConfig(1.0, {SourceSpec{0.8}}, {n}, {Synapse{0, 0, 0.6, LinearKernel{1.0}}});
}

// Stationary law from the transition probabilities alone, solved by QR on the
// stacked system [P^T - I; 1^T] pi = [0; 1].
std::vector<double> oracle_stationary(const GridChain& chain) {
  const auto n = static_cast<Eigen::Index>(chain.size());
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n + 1, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      a(j, i) = transition_probability(chain.state(static_cast<std::size_t>(i)),
                                       chain.state(static_cast<std::size_t>(j)), chain.network(), chain.options());
  a.topRows(n) -= Eigen::MatrixXd::Identity(n, n);
  a.row(n).setOnes();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n + 1);
  b(n) = 1;
  Eigen::VectorXd x = a.colPivHouseholderQr().solve(b);
  return std::vector<double>(x.data(), x.data() + n);
}

}  // namespace

TEST_CASE("spike and shift operators on the grid") {
  const std::size_t q = 2;
  CHECK(grid_spike(0, q) == grid_mask({1.0}, q));
  CHECK(grid_spike(grid_mask({1.0, 0.5}, q), q) == grid_mask({1.0, 0.5}, q));
  CHECK(grid_shift(grid_mask({0.5}, q)) == 0);
  CHECK(grid_shift(grid_mask({1.0, 0.5}, q)) == grid_mask({0.5}, q));
  CHECK(grid_ages(grid_mask({1.0, 0.5}, q), q) == std::vector<double>{1.0, 0.5});
  CHECK_THROWS_AS(grid_mask({0.3}, q), std::invalid_argument);
  CHECK_THROWS_AS(grid_mask({0.5, 1.0}, q), std::invalid_argument);
}

TEST_CASE("transition row of a single source") {
  ChainOptions opt;
  opt.q = 2;
  auto row = transition_row(single({0.5}, 2), one_source(0.4), opt);
  REQUIRE(row.size() == 2);
  std::map<GridMask, double> got;
  for (auto& [s, p] : row) got[s.masks[0]] = p;
  CHECK(got[0] == doctest::Approx(0.8));
  CHECK(got[grid_mask({1.0}, 2)] == doctest::Approx(0.2));
}

TEST_CASE("a certain spike gives an absorbing pattern at q = 1") {
  ChainOptions opt;
  opt.q = 1;
  for (GridMask m : {GridMask{0}, GridMask{1}}) {
    auto row = transition_row(GridState{{m}}, one_source(1.0), opt);
    REQUIRE(row.size() == 1);
    CHECK(row[0].first.masks[0] == 1);
    CHECK(row[0].second == 1.0);
  }
}

TEST_CASE("transition rows sum to one") {
  auto cfg = source_and_neuron();
  ChainOptions opt;
  opt.q = 6;
  std::mt19937_64 gen(3);
  for (int i = 0; i < 1000; ++i) {
    GridState s{{gen() & 0x3F, gen() & 0x3F}};
    double sum = 0;
    for (auto& [next, p] : transition_row(s, cfg, opt)) {
      CHECK(p > 0);
      sum += p;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-14));
  }
}

TEST_CASE("precursors invert the transition support") {
  const std::size_t q = 2;
  auto pre = precursors(single({1.0, 0.5}, q), q);
  std::set<GridMask> got;
  for (auto& v : pre) got.insert(v.masks[0]);
  CHECK(got == std::set<GridMask>{grid_mask({1.0}, q), grid_mask({1.0, 0.5}, q)});

  auto zero = precursors(GridState{{0}}, 1);
  std::set<GridMask> z;
  for (auto& v : zero) z.insert(v.masks[0]);
  CHECK(z == std::set<GridMask>{0, 1});

  // exhaustive check at q = 3 with two units
  auto cfg = NetworkConfig(1.0, {SourceSpec{0.5}, SourceSpec{1.0}}, {});
  ChainOptions opt;
  opt.q = 3;
  for (GridMask a = 0; a < 8; ++a)
    for (GridMask b = 0; b < 8; ++b) {
      GridState s{{a, b}};
      std::set<std::vector<GridMask>> listed;
      for (auto& v : precursors(s, 3)) {
        listed.insert(v.masks);
        CHECK(transition_probability(v, s, cfg, opt) > 0);
      }
      // every state that can step to s is listed
      for (GridMask x = 0; x < 8; ++x)
        for (GridMask y = 0; y < 8; ++y)
          if (transition_probability(GridState{{x, y}}, s, cfg, opt) > 0) CHECK(listed.count({x, y}) == 1);
    }
}

TEST_CASE("reachable states of a single source") {
  ChainOptions opt;
  opt.q = 1;
  CHECK(enumerate_states(one_source(0.5), opt).size() == 2);
  opt.q = 2;
  auto chain = enumerate_states(one_source(0.5), opt);
  CHECK(chain.size() == 4);
  for (auto ages : std::vector<std::vector<double>>{{}, {1.0}, {1.0, 0.5}, {0.5}})
    CHECK(chain.index_of(single(ages, 2)) >= 0);
  opt.q = 5;
  CHECK(enumerate_states(one_source(0.5), opt).size() == 32);
}

TEST_CASE("state cap and resolution guards") {
  ChainOptions opt;
  opt.q = 12;
  opt.state_cap = 100;
  CHECK_THROWS_AS(enumerate_states(one_source(0.5), opt), ChainSizeError);
  CHECK_THROWS_AS(check_grid_resolution(one_source(1.5), 1), ConfigError);
  CHECK_NOTHROW(check_grid_resolution(one_source(1.5), 2));
  CHECK_THROWS_AS(check_grid_resolution(one_source(0.5), 0), ConfigError);
}

TEST_CASE("two-state chain has a uniform stationary law") {
  ChainOptions opt;
  opt.q = 1;
  auto chain = enumerate_states(one_source(0.5), opt);
  auto r = stationary(chain);
  CHECK(r.pi[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(r.pi[1] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(r.fixed_point_residual <= 1e-12);
}

TEST_CASE("stationary law agrees with an independent dense solve") {
  for (bool first : {true, false}) {
    auto cfg = first ? example1_network() : source_and_neuron();
    ChainOptions opt;
    opt.q = 5;
    if (first) opt.truncation.neuron = 2;
    auto chain = enumerate_states(cfg, opt);
    REQUIRE(chain.size() <= 1500);
    auto r = stationary(chain);
    auto oracle = oracle_stationary(chain);
    double l1 = 0, sum = 0;
    for (std::size_t i = 0; i < chain.size(); ++i) {
      l1 += std::abs(r.pi[i] - oracle[i]);
      sum += r.pi[i];
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(l1 <= 1e-10);
    CHECK(r.fixed_point_residual <= 1e-12);
    CHECK(r.balance_residual <= 1e-12);
    auto dense = dense_stationary(chain);
    double l1d = 0;
    for (std::size_t i = 0; i < chain.size(); ++i) l1d += std::abs(dense[i] - oracle[i]);
    CHECK(l1d <= 1e-10);
  }
}

TEST_CASE("stationary law is symmetric under relabelling identical sources") {
  NetworkConfig cfg(1.0, {SourceSpec{0.7}, SourceSpec{0.7}}, {});
  ChainOptions opt;
  opt.q = 4;
  auto chain = enumerate_states(cfg, opt);
  auto r = stationary(chain);
  for (std::size_t i = 0; i < chain.size(); ++i) {
    GridState swapped{{chain.state(i).masks[1], chain.state(i).masks[0]}};
    auto j = chain.index_of(swapped);
    REQUIRE(j >= 0);
    CHECK(std::abs(r.pi[i] - r.pi[static_cast<std::size_t>(j)]) <= 1e-13);
  }
}

TEST_CASE("embedded source masses approach the Poisson law") {
  const double rho = 0.8;
  double previous = 1;
  for (std::size_t q : {4, 8, 16}) {
    ChainOptions opt;
    opt.q = q;
    auto chain = enumerate_states(one_source(rho), opt);
    auto e = embed(chain, stationary(chain).pi);
    CHECK(e.total_mass == doctest::Approx(1.0).epsilon(1e-12));
    double err = 0;
    for (std::size_t m = 0; m <= 3; ++m) {
      double exact = std::exp(-rho) * std::pow(rho, static_cast<double>(m)) / std::tgamma(static_cast<double>(m) + 1);
      err = std::max(err, std::abs(e.mass({m}) - exact));
    }
    CHECK(err < previous);
    previous = err;
  }
}

TEST_CASE("embedded silent mass of the feedback neuron approaches 0.4") {
  double previous = 1;
  for (std::size_t q : {4, 8, 16}) {
    ChainOptions opt;
    opt.q = q;
    opt.truncation.neuron = 2;  // rate vanishes once two spikes are visible
    auto chain = enumerate_states(example1_network(), opt);
    auto e = embed(chain, stationary(chain).pi);
    double err = std::abs(e.mass({0}) - 0.4);
    CHECK(err < previous);
    previous = err;
  }
  CHECK(previous < 0.05);
}
