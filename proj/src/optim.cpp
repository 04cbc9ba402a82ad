#include "mixlen/optim.hpp"

#include <cmath>

#include "mixlen/errors.hpp"

namespace mixlen {

AdamState make_adam_state(std::span<Parameter* const> params, AdamConfig config) {
  AdamState s;
  s.config = config;
  for (const Parameter* p : params) {
    s.first_moment.emplace_back(p->value.shape(), 0.0);
    s.second_moment.emplace_back(p->value.shape(), 0.0);
  }
  return s;
}

void adam_step(std::span<Parameter* const> params, const Gradients& grads, AdamState& state) {
  if (state.first_moment.size() != params.size()) {
    throw ContractError("Adam state tracks " + std::to_string(state.first_moment.size()) +
                        " parameters, got " + std::to_string(params.size()));
  }
  std::vector<const Tensor*> g(params.size());
  for (std::size_t k = 0; k < params.size(); ++k) {
    g[k] = grads.find(*params[k]);
    if (g[k] && !g[k]->all_finite()) {
      throw TrainingError("non-finite gradient for parameter " + params[k]->name);
    }
  }

  const AdamConfig& c = state.config;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correct1 = 1.0 - std::pow(c.beta1, t);
  const double correct2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& value = params[k]->value;
    Tensor& m = state.first_moment[k];
    Tensor& v = state.second_moment[k];
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double gi = g[k] ? (*g[k])[i] : 0.0;
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * gi;
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * gi * gi;
      const double m_hat = m[i] / correct1;
      const double v_hat = v[i] / correct2;
      value[i] -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon);
    }
  }
}

}  // namespace mixlen
