#include "mixlen/mechanism.hpp"

#include <cmath>
#include <string>

#include "mixlen/errors.hpp"

namespace mixlen::mechanism {

namespace {

void check_diameter(double d) {
  if (!(d > 0.0) || !std::isfinite(d)) {
    throw DomainError("pipe diameter must be positive, got " + std::to_string(d));
  }
}

void check_pipe(const PipeSpec& pipe) {
  check_diameter(pipe.diameter);
  // Length 0 is the degenerate limit of the sqrt(L) scaling; negative is not.
  if (!(pipe.length >= 0.0) || !std::isfinite(pipe.length)) {
    throw DomainError("pipe length must be non-negative, got " + std::to_string(pipe.length));
  }
  if (pipe.length > 0.0 && !(pipe.diameter < pipe.length)) {
    throw DomainError("pipe diameter must be smaller than its length");
  }
}

}  // namespace

double critical_reynolds(const PipeSpec& pipe) {
  check_diameter(pipe.diameter);
  return 10000.0 * std::exp(2.72 * std::sqrt(pipe.diameter));
}

AustinBranch austin_branch(const PipeSpec& pipe, const FlowState& flow) {
  if (!(flow.reynolds > 0.0) || !std::isfinite(flow.reynolds)) {
    throw DomainError("Reynolds number must be positive, got " + std::to_string(flow.reynolds));
  }
  return flow.reynolds >= critical_reynolds(pipe) ? AustinBranch::Turbulent
                                                  : AustinBranch::Laminar;
}

double austin_length(const PipeSpec& pipe, const FlowState& flow) {
  check_pipe(pipe);
  const AustinBranch branch = austin_branch(pipe, flow);
  const double sd = std::sqrt(pipe.diameter);
  const double sl = std::sqrt(pipe.length);
  if (branch == AustinBranch::Turbulent) {
    return 11.75 * sd * sl * std::pow(flow.reynolds, -0.1);
  }
  return 18384.0 * sd * sl * std::pow(flow.reynolds, -0.9) * std::exp(2.18 * sd);
}

double interval_gap(const OperationPlan& plan) {
  if (!(plan.q_min >= 0.0) || !(plan.delay >= 0.0) || !std::isfinite(plan.q_min) ||
      !std::isfinite(plan.delay)) {
    throw DomainError("interval gap needs non-negative flowrate and delay");
  }
  return plan.q_min * plan.delay / 600.0;
}

}  // namespace mixlen::mechanism
