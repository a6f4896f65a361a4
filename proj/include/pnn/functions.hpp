#pragma once

#include <string>
#include <variant>

namespace pnn {

// Activation functions: bounded, positive, non-decreasing maps from
// synaptic influx to firing intensity.

struct ConstantActivation {
  double value = 1.0;
  bool operator==(const ConstantActivation&) const = default;
};

// clamp(slope * x + intercept, lower, upper)
struct LinearClippedActivation {
  double slope = 1.0;
  double intercept = 0.0;
  double lower = 0.1;
  double upper = 1.0;
  bool operator==(const LinearClippedActivation&) const = default;
};

// lower + (upper - lower) / (1 + exp(-gain * (x - midpoint)))
struct LogisticActivation {
  double lower = 0.1;
  double upper = 1.0;
  double gain = 1.0;
  double midpoint = 0.0;
  bool operator==(const LogisticActivation&) const = default;
};

using Activation = std::variant<ConstantActivation, LinearClippedActivation, LogisticActivation>;

double evaluate(const Activation& f, double influx);
double lower_bound(const Activation& f);
double upper_bound(const Activation& f);
std::string type_name(const Activation& f);

// Post-synaptic kernels.  Every kernel is supported on [0, theta] and
// evaluates to exactly 0 outside it; `theta` is passed at evaluation time.

struct ZeroKernel {
  bool operator==(const ZeroKernel&) const = default;
};

struct ConstantKernel {
  double value = 1.0;
  bool operator==(const ConstantKernel&) const = default;
};

// slope * t on [0, theta]
struct LinearKernel {
  double slope = 1.0;
  bool operator==(const LinearKernel&) const = default;
};

// Rises linearly to `height` at `peak` (fraction of theta), falls to 0 at theta.
struct TriangularKernel {
  double height = 1.0;
  double peak = 0.5;
  bool operator==(const TriangularKernel&) const = default;
};

// amplitude * (27/4) * s * (1 - s)^2 with s = t / theta; peaks at theta/3,
// vanishes with zero slope at theta.
struct AlphaBumpKernel {
  double amplitude = 1.0;
  bool operator==(const AlphaBumpKernel&) const = default;
};

using Kernel = std::variant<ZeroKernel, ConstantKernel, LinearKernel, TriangularKernel, AlphaBumpKernel>;

double evaluate(const Kernel& k, double t, double theta);
std::string type_name(const Kernel& k);

// Refractory multipliers r(s), s = time since the neuron's own last spike.

struct NoRefractory {
  bool operator==(const NoRefractory&) const = default;
};

// r(s) = 1(s not in (0, period])
struct HardRefractory {
  double period = 0.0;
  bool operator==(const HardRefractory&) const = default;
};

using Refractory = std::variant<NoRefractory, HardRefractory>;

double evaluate(const Refractory& r, double since_last_spike);
std::string type_name(const Refractory& r);

}  // namespace pnn
