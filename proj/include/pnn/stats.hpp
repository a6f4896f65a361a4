#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace pnn {

struct Estimate {
  double mean = 0.0;
  double sigma = 0.0;  // standard error of the mean
};

// Batch-means estimate for a (possibly autocorrelated) stationary series:
// the series is cut into `batches` contiguous blocks and the standard
// error is taken from the spread of the block means.
Estimate batch_means(std::span<const double> series, std::size_t batches = 32);

// Same estimator when only per-batch values are available.
Estimate from_batches(std::span<const double> batch_values);

// Kolmogorov-Smirnov distance between the empirical law of `samples` and `cdf`.
double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf);

// Asymptotic one-sample KS critical value sqrt(-ln(alpha/2)/2) / sqrt(n).
double ks_critical_value(std::size_t n, double alpha);

}  // namespace pnn
