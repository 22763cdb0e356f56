#pragma once

#include <cstddef>
#include <functional>
#include <string>

#include "panoos/numerics/parameter.hpp"
#include "panoos/numerics/tape.hpp"

namespace panoos {

/// Builds a scalar on the given tape, reading parameters via Tape::param.
using ScalarFn = std::function<Var(Tape&)>;

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t coordinates = 0;
  // Worst coordinate.
  std::string parameter;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

/// Evaluates f, back-propagates, and compares every coordinate of every
/// listed parameter with the central difference (f(x+h) - f(x-h)) / 2h.
/// The error of one coordinate is |a - c| / (|a| + |c| + 1e-8); the report
/// carries the maximum. Parameter values and gradients are restored.
/// Throws NumericError when f is not finite at any probe.
GradCheckReport finite_diff_check(const ScalarFn& f, const ParameterList& params, double h = 1e-5);

}  // namespace panoos
