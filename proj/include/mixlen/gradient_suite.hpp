#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mixlen/gradcheck.hpp"

namespace mixlen {

struct GradientCase {
  std::string label;  // primitive name, or "coupling_loss"
  GradCheckReport report;
};

struct GradientSuiteReport {
  std::vector<GradientCase> cases;
  std::size_t failures = 0;
  double max_rel_error = 0.0;

  bool passed() const { return failures == 0 && !cases.empty(); }
};

// Smallest |x| over inputs of relu and abs nodes, i.e. how far the recorded
// graph is from a kink.
double kink_distance(const Tape& tape);

// `primitive_cases` randomized single-primitive graphs cycling through every
// differentiable primitive, then `model_cases` full coupling-loss graphs on a
// 5-row toy batch (train mode, all parameters including the correlation
// head). Cases whose graph passes within 1e-3 of a relu/abs kink are redrawn.
GradientSuiteReport run_gradient_suite(std::size_t primitive_cases, std::size_t model_cases,
                                       std::uint64_t seed, double tol = 1e-4);

}  // namespace mixlen
