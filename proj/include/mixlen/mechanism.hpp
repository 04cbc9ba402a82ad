#pragma once

// Closed-form mixed-oil correlations: the Austin contamination-length formula,
// its diameter-dependent critical Reynolds number, and the operating-plan
// interval gap between lower and upper contamination limits.
//
// Units: meters, m^3/h, minutes. All functions are pure.

namespace mixlen::mechanism {

struct PipeSpec {
  double diameter = 0.0;  // m
  double length = 0.0;    // m
};

struct FlowState {
  double reynolds = 0.0;
};

struct OperationPlan {
  double q_min = 0.0;  // minimum distribution flowrate, m^3/h
  double delay = 0.0;  // delay duration, min
};

enum class AustinBranch { Turbulent, Laminar };

// 10000 * exp(2.72 * sqrt(d)).
double critical_reynolds(const PipeSpec& pipe);

// Re >= Re_j selects the turbulent branch (ties included).
AustinBranch austin_branch(const PipeSpec& pipe, const FlowState& flow);

// Mixed-oil length in meters.
//   Re >= Re_j:  11.75 d^0.5 L^0.5 Re^-0.1
//   Re <  Re_j:  18384 d^0.5 L^0.5 Re^-0.9 exp(2.18 d^0.5)
// L = 0 is accepted and yields 0.
double austin_length(const PipeSpec& pipe, const FlowState& flow);

// Q_m * T_d / 600, in meters.
double interval_gap(const OperationPlan& plan);

// y_l + y_ig - y_u; negative means the interval respects the gap.
constexpr double difference_residual(double y_l, double y_u, double y_ig) {
  return y_l + y_ig - y_u;
}

}  // namespace mixlen::mechanism
