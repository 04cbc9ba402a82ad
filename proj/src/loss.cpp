#include "mixlen/loss.hpp"

#include <cmath>

#include "mixlen/errors.hpp"

namespace mixlen {

void LossWeights::validate() const {
  if (!(lambda_dc >= 0.0) || !(lambda_cor >= 0.0) || !std::isfinite(lambda_dc) ||
      !std::isfinite(lambda_cor)) {
    throw ConfigError("loss weights must be finite and non-negative");
  }
}

namespace {

void require_vector(const Tape& tape, NodeId id, const char* what) {
  if (tape.value(id).rank() != 1) {
    throw ShapeError(std::string(what) + " must be a vector, got " +
                     tape.value(id).shape_string());
  }
}

void check_component(double v, const char* what) {
  if (!std::isfinite(v) || v < 0.0) {
    throw ContractError(std::string("loss component ") + what + " must be finite and >= 0, got " +
                        std::to_string(v));
  }
}

}  // namespace

NodeId data_loss(Tape& tape, NodeId pred, NodeId target) {
  if (tape.value(pred).size() == 0) throw ContractError("data_loss on an empty batch");
  return tape.mean(tape.square(tape.sub(pred, target)));
}

NodeId difference_penalty(Tape& tape, NodeId pred_l, NodeId pred_u, NodeId gap) {
  require_vector(tape, pred_l, "pred_l");
  require_vector(tape, pred_u, "pred_u");
  require_vector(tape, gap, "gap");
  if (tape.value(pred_l).size() == 0) throw ContractError("difference_penalty on an empty batch");
  const NodeId residual = tape.sub(tape.add(pred_l, gap), pred_u);
  return tape.mean(tape.square(tape.relu(residual)));
}

NodeId correlation_penalty(Tape& tape, NodeId pred_l, NodeId pred_u, NodeId w_c, NodeId b_c) {
  require_vector(tape, pred_l, "pred_l");
  require_vector(tape, pred_u, "pred_u");
  const std::size_t n = tape.value(pred_l).size();
  if (n < 2) throw ContractError("correlation_penalty needs at least 2 samples");
  if (tape.value(pred_u).size() != n) {
    throw ShapeError("correlation_penalty: pred_l and pred_u differ in length");
  }
  const NodeId column = tape.reshape(pred_l, {n, 1});
  const NodeId g = tape.reshape(tape.affine(column, w_c, b_c), {n});
  const NodeId p = tape.softmax(g);
  const NodeId q = tape.softmax(pred_u);
  const NodeId log_ratio = tape.sub(tape.log(tape.shift(p, kCorrelationEpsilon)),
                                    tape.log(tape.shift(q, kCorrelationEpsilon)));
  return tape.mean(tape.abs(tape.mul(p, log_ratio)));
}

NodeId total_loss(Tape& tape, NodeId data, NodeId difference, NodeId correlation,
                  const LossWeights& weights) {
  weights.validate();
  check_component(tape.value(data).item(), "L_data");
  check_component(tape.value(difference).item(), "L_DC");
  check_component(tape.value(correlation).item(), "L_COR");
  const NodeId dc = tape.scale(difference, weights.lambda_dc);
  const NodeId cor = tape.scale(correlation, weights.lambda_cor);
  return tape.add(tape.add(data, dc), cor);
}

double total_loss(double data, double difference, double correlation,
                  const LossWeights& weights) {
  weights.validate();
  check_component(data, "L_data");
  check_component(difference, "L_DC");
  check_component(correlation, "L_COR");
  return data + weights.lambda_dc * difference + weights.lambda_cor * correlation;
}

CouplingLoss coupling_loss(Tape& tape, NodeId pred, const Tensor& target, const Tensor& gap,
                           NodeId w_c, NodeId b_c, const LossWeights& weights) {
  const Tensor& p = tape.value(pred);
  const std::size_t n = p.rows();
  if (p.rank() != 2 || p.cols() != 2 || !p.same_shape(target) || gap.size() != n) {
    throw ShapeError("coupling_loss: pred " + p.shape_string() + ", target " +
                     target.shape_string() + ", gap " + gap.shape_string());
  }
  const NodeId pred_l = tape.reshape(tape.slice(pred, 0, 1), {n});
  const NodeId pred_u = tape.reshape(tape.slice(pred, 1, 1), {n});
  CouplingLoss out{};
  out.data = data_loss(tape, pred, tape.constant(target));
  out.difference =
      difference_penalty(tape, pred_l, pred_u, tape.constant(Tensor::vector(gap.storage())));
  out.correlation = correlation_penalty(tape, pred_l, pred_u, w_c, b_c);
  out.total = total_loss(tape, out.data, out.difference, out.correlation, weights);
  return out;
}

}  // namespace mixlen
