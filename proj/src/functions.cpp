#include "pnn/functions.hpp"

#include <algorithm>
#include <cmath>

namespace pnn {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

}  // namespace

double evaluate(const Activation& f, double influx) {
  return std::visit(
      overloaded{
          [](const ConstantActivation& a) { return a.value; },
          [influx](const LinearClippedActivation& a) {
            return std::clamp(a.slope * influx + a.intercept, a.lower, a.upper);
          },
          [influx](const LogisticActivation& a) {
            double z = a.gain * (influx - a.midpoint);
            // Saturated tails stay inside [lower, upper] without overflow.
            double s = z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
            return a.lower + (a.upper - a.lower) * s;
          },
      },
      f);
}

double lower_bound(const Activation& f) {
  return std::visit(overloaded{
                        [](const ConstantActivation& a) { return a.value; },
                        [](const LinearClippedActivation& a) { return a.lower; },
                        [](const LogisticActivation& a) { return a.lower; },
                    },
                    f);
}

double upper_bound(const Activation& f) {
  return std::visit(overloaded{
                        [](const ConstantActivation& a) { return a.value; },
                        [](const LinearClippedActivation& a) { return a.upper; },
                        [](const LogisticActivation& a) { return a.upper; },
                    },
                    f);
}

std::string type_name(const Activation& f) {
  return std::visit(overloaded{
                        [](const ConstantActivation&) { return std::string("constant"); },
                        [](const LinearClippedActivation&) { return std::string("linear_clipped"); },
                        [](const LogisticActivation&) { return std::string("logistic"); },
                    },
                    f);
}

double evaluate(const Kernel& k, double t, double theta) {
  if (!(t >= 0.0 && t <= theta)) return 0.0;
  return std::visit(overloaded{
                        [](const ZeroKernel&) { return 0.0; },
                        [](const ConstantKernel& c) { return c.value; },
                        [t](const LinearKernel& c) { return c.slope * t; },
                        [t, theta](const TriangularKernel& c) {
                          double s = t / theta;
                          if (s <= c.peak) return c.peak > 0 ? c.height * s / c.peak : c.height;
                          return c.peak < 1 ? c.height * (1.0 - s) / (1.0 - c.peak) : c.height;
                        },
                        [t, theta](const AlphaBumpKernel& c) {
                          double s = t / theta;
                          return c.amplitude * 6.75 * s * (1.0 - s) * (1.0 - s);
                        },
                    },
                    k);
}

std::string type_name(const Kernel& k) {
  return std::visit(overloaded{
                        [](const ZeroKernel&) { return std::string("zero"); },
                        [](const ConstantKernel&) { return std::string("constant"); },
                        [](const LinearKernel&) { return std::string("linear"); },
                        [](const TriangularKernel&) { return std::string("triangular"); },
                        [](const AlphaBumpKernel&) { return std::string("alpha_bump"); },
                    },
                    k);
}

double evaluate(const Refractory& r, double since_last_spike) {
  return std::visit(overloaded{
                        [](const NoRefractory&) { return 1.0; },
                        [since_last_spike](const HardRefractory& h) {
                          return (since_last_spike > 0.0 && since_last_spike <= h.period) ? 0.0 : 1.0;
                        },
                    },
                    r);
}

std::string type_name(const Refractory& r) {
  return std::visit(overloaded{
                        [](const NoRefractory&) { return std::string("none"); },
                        [](const HardRefractory&) { return std::string("hard"); },
                    },
                    r);
}

}  // namespace pnn
