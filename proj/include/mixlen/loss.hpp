#pragma once

#include "mixlen/tape.hpp"

namespace mixlen {

struct LossWeights {
  double lambda_dc = 0.01;
  double lambda_cor = 0.1;

  // Throws ConfigError on negative or non-finite weights.
  void validate() const;

  friend bool operator==(const LossWeights&, const LossWeights&) = default;
};

// Guard inside the correlation log-ratio.
inline constexpr double kCorrelationEpsilon = 1e-12;

// Mean squared error over every element. Throws ContractError on an empty
// batch and ShapeError on mismatched shapes.
NodeId data_loss(Tape& tape, NodeId pred, NodeId target);

// mean_i relu(pred_l + gap - pred_u)^2 over rank-1 inputs of equal length.
NodeId difference_penalty(Tape& tape, NodeId pred_l, NodeId pred_u, NodeId gap);

// g = w_c * pred_l + b_c;  P = softmax_batch(g);  Q = softmax_batch(pred_u);
// mean_i |P_i * ln((P_i + eps) / (Q_i + eps))|.
// w_c has shape [1 x 1], b_c shape [1]. Throws ContractError for N < 2.
NodeId correlation_penalty(Tape& tape, NodeId pred_l, NodeId pred_u, NodeId w_c, NodeId b_c);

// L_data + lambda_dc * L_DC + lambda_cor * L_COR. Throws ContractError when a
// component is negative or non-finite.
NodeId total_loss(Tape& tape, NodeId data, NodeId difference, NodeId correlation,
                  const LossWeights& weights);
double total_loss(double data, double difference, double correlation,
                  const LossWeights& weights);

struct CouplingLoss {
  NodeId data;
  NodeId difference;
  NodeId correlation;
  NodeId total;
};

// Full coupling loss for [N x 2] predictions against [N x 2] targets and
// per-row gaps of shape [N].
CouplingLoss coupling_loss(Tape& tape, NodeId pred, const Tensor& target, const Tensor& gap,
                           NodeId w_c, NodeId b_c, const LossWeights& weights);

}  // namespace mixlen
