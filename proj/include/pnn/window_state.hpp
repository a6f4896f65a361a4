#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace pnn {

// Times-to-expiry of every spike still visible in the sliding window
// (t - theta, t], one strictly decreasing vector per unit (most recent
// spike first).  Ages live in (0, theta].
class WindowState {
 public:
  WindowState() = default;
  // Throws std::invalid_argument when a vector is not strictly decreasing in (0, theta].
  WindowState(double theta, std::vector<std::vector<double>> ages);

  static WindowState empty(double theta, std::size_t units) {
    return WindowState(theta, std::vector<std::vector<double>>(units));
  }

  double theta() const { return theta_; }
  std::size_t num_units() const { return ages_.size(); }
  std::span<const double> ages(std::size_t unit) const { return ages_.at(unit); }
  std::size_t count(std::size_t unit) const { return ages_.at(unit).size(); }
  std::size_t total_count() const;
  bool is_silent() const { return total_count() == 0; }
  // Age of the most recent spike of `unit`, or 0 when the unit is silent.
  double latest(std::size_t unit) const { return ages_.at(unit).empty() ? 0.0 : ages_[unit].front(); }

  const std::vector<std::vector<double>>& all_ages() const { return ages_; }

  bool operator==(const WindowState&) const = default;

 private:
  friend WindowState advance(WindowState state, double dt);
  friend WindowState apply_spike(WindowState state, std::size_t unit);

  double theta_ = 1.0;
  std::vector<std::vector<double>> ages_;
};

}  // namespace pnn
