#include "pnn/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pnn {

Estimate from_batches(std::span<const double> batch_values) {
  const std::size_t b = batch_values.size();
  if (b == 0) return {};
  double mean = 0;
  for (double v : batch_values) mean += v;
  mean /= static_cast<double>(b);
  if (b < 2) return {mean, 0.0};
  double ss = 0;
  for (double v : batch_values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / static_cast<double>(b - 1) / static_cast<double>(b))};
}

Estimate batch_means(std::span<const double> series, std::size_t batches) {
  if (series.empty()) return {};
  batches = std::clamp<std::size_t>(batches, 1, series.size());
  const std::size_t per = series.size() / batches;
  std::vector<double> values;
  values.reserve(batches);
  for (std::size_t b = 0; b < batches; ++b) {
    double s = 0;
    for (std::size_t j = b * per; j < (b + 1) * per; ++j) s += series[j];
    values.push_back(s / static_cast<double>(per));
  }
  return from_batches(values);
}

double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf) {
  if (samples.empty()) throw std::invalid_argument("ks_statistic: empty sample");
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    double f = cdf(samples[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

double ks_critical_value(std::size_t n, double alpha) {
  return std::sqrt(-0.5 * std::log(alpha / 2.0)) / std::sqrt(static_cast<double>(n));
}

}  // namespace pnn
