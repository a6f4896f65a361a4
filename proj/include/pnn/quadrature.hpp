#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>

namespace pnn::quad {

// Composite Simpson rule with `panels` panels (each panel uses its midpoint).
template <class F>
double simpson(F&& f, double a, double b, std::size_t panels) {
  if (panels == 0) throw std::invalid_argument("simpson: need at least one panel");
  const double h = (b - a) / static_cast<double>(panels);
  double sum = f(a) + f(b);
  for (std::size_t k = 0; k < panels; ++k) {
    double left = a + static_cast<double>(k) * h;
    sum += 4.0 * f(left + 0.5 * h);
    if (k > 0) sum += 2.0 * f(left);
  }
  return sum * h / 6.0;
}

// Integral over [a, b] with 0 <= a of a function behaving like x^s near 0
// (s > -1): substitute x = t^p so the transformed integrand vanishes like
// t^{p(s+1)-1} and is smooth enough for Simpson.
template <class F>
double simpson_power_origin(F&& f, double a, double b, double s, std::size_t panels) {
  if (a < 0 || b < a) throw std::invalid_argument("simpson_power_origin: need 0 <= a <= b");
  if (!(s > -1)) throw std::invalid_argument("simpson_power_origin: exponent must exceed -1");
  const double p = std::max(1.0, std::ceil(4.0 / (s + 1.0)));
  auto g = [&](double t) {
    if (t <= 0) return 0.0;
    return f(std::pow(t, p)) * p * std::pow(t, p - 1.0);
  };
  return simpson(g, std::pow(a, 1.0 / p), std::pow(b, 1.0 / p), panels);
}

// Cubic Hermite interpolation on [x0, x0 + h] from values and slopes.
inline double hermite(double x0, double h, double f0, double f1, double d0, double d1, double x) {
  const double t = (x - x0) / h;
  const double t2 = t * t, t3 = t2 * t;
  return (2 * t3 - 3 * t2 + 1) * f0 + (t3 - 2 * t2 + t) * h * d0 + (-2 * t3 + 3 * t2) * f1 + (t3 - t2) * h * d1;
}

}  // namespace pnn::quad
