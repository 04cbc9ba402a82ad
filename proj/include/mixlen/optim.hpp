#pragma once

#include <span>
#include <vector>

#include "mixlen/tape.hpp"

namespace mixlen {

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  friend bool operator==(const AdamConfig&, const AdamConfig&) = default;
};

struct AdamState {
  AdamConfig config;
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;
  long step = 0;
};

// Zeroed moments shaped like `params`.
AdamState make_adam_state(std::span<Parameter* const> params, AdamConfig config = {});

// One bias-corrected Adam update of every parameter in `params` (same order
// as the state). Parameters absent from `grads` see a zero gradient. Throws
// TrainingError naming the parameter on a non-finite gradient, before any
// parameter is modified.
void adam_step(std::span<Parameter* const> params, const Gradients& grads, AdamState& state);

}  // namespace mixlen
