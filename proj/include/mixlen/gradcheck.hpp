#pragma once

#include <functional>
#include <span>
#include <string>

#include "mixlen/tape.hpp"

namespace mixlen {

struct GradCheckReport {
  bool passed = true;
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  // Location of the worst element.
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

// Records a scalar graph over the parameters it captures.
using GraphBuilder = std::function<NodeId(Tape&)>;

// Compares reverse-mode gradients against central differences for every
// element of every parameter in `params`. Relative error is
// |a - n| / max(|a|, |n|, 1e-8); passes iff the maximum is <= tol.
// Parameters are perturbed in place and restored before returning.
// Throws EvaluationError when any forward value is non-finite.
GradCheckReport grad_check(const GraphBuilder& build, std::span<Parameter* const> params,
                           double tol = 1e-4, double step = 1e-5);

}  // namespace mixlen
