#include "pnn/window_state.hpp"

#include <cmath>
#include <numeric>
#include <string>

namespace pnn {

WindowState::WindowState(double theta, std::vector<std::vector<double>> ages) : theta_(theta), ages_(std::move(ages)) {
  if (!(theta_ > 0 && std::isfinite(theta_))) throw std::invalid_argument("WindowState: theta must be finite and > 0");
  for (std::size_t u = 0; u < ages_.size(); ++u) {
    double prev = theta_;
    for (std::size_t m = 0; m < ages_[u].size(); ++m) {
      double a = ages_[u][m];
      bool ok = m == 0 ? (a > 0 && a <= theta_) : (a > 0 && a < prev);
      if (!ok)
        throw std::invalid_argument("WindowState: unit " + std::to_string(u) +
                                    " ages must be strictly decreasing in (0, theta]");
      prev = a;
    }
  }
}

std::size_t WindowState::total_count() const {
  return std::accumulate(ages_.begin(), ages_.end(), std::size_t{0},
                         [](std::size_t s, const auto& v) { return s + v.size(); });
}

}  // namespace pnn
