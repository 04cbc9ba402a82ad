#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <utility>
#include <vector>

#include "mixlen/rng.hpp"
#include "mixlen/tensor.hpp"

namespace mixlen {

struct NodeId {
  std::uint32_t index = 0;
  friend bool operator==(NodeId, NodeId) = default;
};

// A trainable array. Lives outside any tape; a tape only references it.
struct Parameter {
  std::string name;
  Tensor value;
};

enum class Mode { Train, Eval };

enum class Primitive {
  Constant,
  Parameter,
  Affine,
  Relu,
  Softmax,
  Mul,
  Concat,
  Dropout,
  Mean,
  Square,
  Sub,
  Add,
  Scale,
  Shift,
  Log,
  Abs,
  Slice,
  Reshape,
};

const char* primitive_name(Primitive p);

// d(root)/d(p) for each parameter recorded on the tape.
class Gradients {
 public:
  // nullptr when the parameter never appeared on the tape.
  const Tensor* find(const Parameter& p) const;
  // Zeros shaped like p when absent.
  Tensor of(const Parameter& p) const;

  std::size_t size() const { return entries_.size(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

 private:
  friend class Tape;
  std::vector<std::pair<const Parameter*, Tensor>> entries_;
};

// Element-wise inverted-dropout mask: 0 with probability `rate`, otherwise
// 1/(1-rate). Throws DomainError unless 0 <= rate < 1.
Tensor dropout_mask(Rng& rng, const Tensor::Shape& shape, double rate);

// Records a computation eagerly (values are available right after each call)
// and replays it backwards. Nodes only reference earlier nodes, so recording
// order is a topological order.
//
// Rank conventions: a rank-1 tensor is one sample, a rank-2 tensor is a batch
// of rows. Softmax, Concat and Slice act on the last axis.
class Tape {
 public:
  NodeId constant(Tensor value);
  NodeId parameter(const Parameter& p);

  // x * W^T + b with W of shape [out x in] and b of shape [out].
  NodeId affine(NodeId x, NodeId w, NodeId b);
  NodeId relu(NodeId x);
  NodeId softmax(NodeId x);
  NodeId mul(NodeId a, NodeId b);
  NodeId concat(const std::vector<NodeId>& parts);
  NodeId concat(std::initializer_list<NodeId> parts) {
    return concat(std::vector<NodeId>(parts));
  }
  NodeId dropout(NodeId x, Tensor mask);
  NodeId mean(NodeId x);
  NodeId square(NodeId x);
  NodeId sub(NodeId a, NodeId b);
  NodeId add(NodeId a, NodeId b);
  NodeId scale(NodeId x, double factor);
  NodeId shift(NodeId x, double offset);
  NodeId log(NodeId x);
  NodeId abs(NodeId x);
  NodeId slice(NodeId x, std::size_t begin, std::size_t count);
  NodeId reshape(NodeId x, Tensor::Shape shape);

  const Tensor& value(NodeId id) const { return nodes_.at(id.index).value; }
  Primitive kind(NodeId id) const { return nodes_.at(id.index).op; }
  const std::vector<std::uint32_t>& inputs(NodeId id) const {
    return nodes_.at(id.index).inputs;
  }
  std::size_t size() const { return nodes_.size(); }

  // Reverse accumulation from a rank-0 root. Throws ContractError otherwise.
  Gradients backward(NodeId root) const;

 private:
  struct Node {
    Primitive op;
    std::vector<std::uint32_t> inputs{};
    Tensor value;
    bool needs_grad = false;
    double constant = 0.0;
    std::size_t offset = 0;
    Tensor aux{};  // dropout mask
    const Parameter* param = nullptr;
  };

  NodeId push(Node node);
  const Node& node(NodeId id) const;
  bool needs_grad(std::initializer_list<NodeId> ids) const;

  std::vector<Node> nodes_;
};

}  // namespace mixlen
