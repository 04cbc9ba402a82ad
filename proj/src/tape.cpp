#include "mixlen/tape.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "mixlen/errors.hpp"

namespace mixlen {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finalizer over (seed, stream).
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

const char* primitive_name(Primitive p) {
  switch (p) {
    case Primitive::Constant: return "constant";
    case Primitive::Parameter: return "parameter";
    case Primitive::Affine: return "affine";
    case Primitive::Relu: return "relu";
    case Primitive::Softmax: return "softmax";
    case Primitive::Mul: return "mul";
    case Primitive::Concat: return "concat";
    case Primitive::Dropout: return "dropout";
    case Primitive::Mean: return "mean";
    case Primitive::Square: return "square";
    case Primitive::Sub: return "sub";
    case Primitive::Add: return "add";
    case Primitive::Scale: return "scale";
    case Primitive::Shift: return "shift";
    case Primitive::Log: return "log";
    case Primitive::Abs: return "abs";
    case Primitive::Slice: return "slice";
    case Primitive::Reshape: return "reshape";
  }
  return "?";
}

const Tensor* Gradients::find(const Parameter& p) const {
  for (const auto& [param, grad] : entries_) {
    if (param == &p) return &grad;
  }
  return nullptr;
}

Tensor Gradients::of(const Parameter& p) const {
  if (const Tensor* g = find(p)) return *g;
  return Tensor(p.value.shape(), 0.0);
}

Tensor dropout_mask(Rng& rng, const Tensor::Shape& shape, double rate) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw DomainError("dropout rate must lie in [0, 1), got " + std::to_string(rate));
  }
  Tensor mask(shape, 1.0);
  if (rate == 0.0) return mask;
  const double keep = 1.0 / (1.0 - rate);
  for (double& m : mask.values()) {
    m = rng.uniform() < rate ? 0.0 : keep;
  }
  return mask;
}

// ---------------------------------------------------------------------------
// Recording

NodeId Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return NodeId{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

const Tape::Node& Tape::node(NodeId id) const {
  if (id.index >= nodes_.size()) {
    throw ContractError("node " + std::to_string(id.index) + " is not on this tape");
  }
  return nodes_[id.index];
}

bool Tape::needs_grad(std::initializer_list<NodeId> ids) const {
  return std::any_of(ids.begin(), ids.end(), [&](NodeId id) { return node(id).needs_grad; });
}

NodeId Tape::constant(Tensor value) {
  return push(Node{.op = Primitive::Constant, .value = std::move(value)});
}

NodeId Tape::parameter(const Parameter& p) {
  return push(Node{.op = Primitive::Parameter, .value = p.value, .needs_grad = true, .param = &p});
}

NodeId Tape::affine(NodeId x, NodeId w, NodeId b) {
  const Tensor& xv = node(x).value;
  const Tensor& wv = node(w).value;
  const Tensor& bv = node(b).value;
  if (wv.rank() != 2 || bv.rank() != 1 || bv.size() != wv.rows() || xv.rank() == 0 ||
      xv.cols() != wv.cols()) {
    throw ShapeError("affine: x " + xv.shape_string() + ", W " + wv.shape_string() + ", b " +
                     bv.shape_string());
  }
  const std::size_t n = xv.rows(), in = wv.cols(), out = wv.rows();
  Tensor::Shape shape = xv.rank() == 2 ? Tensor::Shape{n, out} : Tensor::Shape{out};
  Tensor y(std::move(shape));
  const double* xp = xv.values().data();
  const double* wp = wv.values().data();
  double* yp = y.values().data();
  for (std::size_t r = 0; r < n; ++r) {
    const double* xr = xp + r * in;
    for (std::size_t o = 0; o < out; ++o) {
      const double* wr = wp + o * in;
      double acc = bv[o];
      for (std::size_t i = 0; i < in; ++i) acc += xr[i] * wr[i];
      yp[r * out + o] = acc;
    }
  }
  return push(Node{.op = Primitive::Affine,
                   .inputs = {x.index, w.index, b.index},
                   .value = std::move(y),
                   .needs_grad = needs_grad({x, w, b})});
}

NodeId Tape::relu(NodeId x) {
  Tensor y = node(x).value;
  for (double& v : y.values()) v = v > 0.0 ? v : 0.0;
  return push(Node{.op = Primitive::Relu, .inputs = {x.index}, .value = std::move(y),
                   .needs_grad = needs_grad({x})});
}

NodeId Tape::softmax(NodeId x) {
  Tensor y = node(x).value;
  if (y.rank() == 0) throw ShapeError("softmax needs a vector or matrix");
  const std::size_t rows = y.rows(), cols = y.cols();
  for (std::size_t r = 0; r < rows; ++r) {
    double* row = y.values().data() + r * cols;
    const double mx = *std::max_element(row, row + cols);
    double total = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      row[c] = std::exp(row[c] - mx);
      total += row[c];
    }
    for (std::size_t c = 0; c < cols; ++c) row[c] /= total;
  }
  return push(Node{.op = Primitive::Softmax, .inputs = {x.index}, .value = std::move(y),
                   .needs_grad = needs_grad({x})});
}

NodeId Tape::mul(NodeId a, NodeId b) {
  const Tensor& av = node(a).value;
  const Tensor& bv = node(b).value;
  if (!av.same_shape(bv)) {
    throw ShapeError("mul: " + av.shape_string() + " vs " + bv.shape_string());
  }
  Tensor y = av;
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= bv[i];
  return push(Node{.op = Primitive::Mul, .inputs = {a.index, b.index}, .value = std::move(y),
                   .needs_grad = needs_grad({a, b})});
}

NodeId Tape::concat(const std::vector<NodeId>& parts) {
  if (parts.empty()) throw ShapeError("concat of nothing");
  const Tensor& first = node(parts.front()).value;
  if (first.rank() == 0) throw ShapeError("concat needs vectors or matrices");
  const std::size_t rows = first.rows();
  std::size_t width = 0;
  bool grad = false;
  std::vector<std::uint32_t> ids;
  for (NodeId p : parts) {
    const Node& n = node(p);
    if (n.value.rank() != first.rank() || n.value.rows() != rows) {
      throw ShapeError("concat: " + n.value.shape_string() + " vs " + first.shape_string());
    }
    width += n.value.cols();
    grad = grad || n.needs_grad;
    ids.push_back(p.index);
  }
  Tensor y(first.rank() == 2 ? Tensor::Shape{rows, width} : Tensor::Shape{width});
  std::size_t col = 0;
  for (NodeId p : parts) {
    const Tensor& v = node(p).value;
    const std::size_t w = v.cols();
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(v.values().data() + r * w, w, y.values().data() + r * width + col);
    }
    col += w;
  }
  return push(Node{.op = Primitive::Concat, .inputs = std::move(ids), .value = std::move(y),
                   .needs_grad = grad});
}

NodeId Tape::dropout(NodeId x, Tensor mask) {
  const Tensor& xv = node(x).value;
  if (!xv.same_shape(mask)) {
    throw ShapeError("dropout mask " + mask.shape_string() + " vs " + xv.shape_string());
  }
  Tensor y = xv;
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= mask[i];
  return push(Node{.op = Primitive::Dropout, .inputs = {x.index}, .value = std::move(y),
                   .needs_grad = needs_grad({x}), .aux = std::move(mask)});
}

NodeId Tape::mean(NodeId x) {
  const Tensor& xv = node(x).value;
  double total = 0.0;
  for (double v : xv.values()) total += v;
  return push(Node{.op = Primitive::Mean, .inputs = {x.index},
                   .value = Tensor::scalar(total / static_cast<double>(xv.size())),
                   .needs_grad = needs_grad({x})});
}

NodeId Tape::square(NodeId x) {
  Tensor y = node(x).value;
  for (double& v : y.values()) v *= v;
  return push(Node{.op = Primitive::Square, .inputs = {x.index}, .value = std::move(y),
                   .needs_grad = needs_grad({x})});
}

NodeId Tape::sub(NodeId a, NodeId b) {
  const Tensor& av = node(a).value;
  const Tensor& bv = node(b).value;
  if (!av.same_shape(bv)) {
    throw ShapeError("sub: " + av.shape_string() + " vs " + bv.shape_string());
  }
  Tensor y = av;
  for (std::size_t i = 0; i < y.size(); ++i) y[i] -= bv[i];
  return push(Node{.op = Primitive::Sub, .inputs = {a.index, b.index}, .value = std::move(y),
                   .needs_grad = needs_grad({a, b})});
}

NodeId Tape::add(NodeId a, NodeId b) {
  const Tensor& av = node(a).value;
  const Tensor& bv = node(b).value;
  if (!av.same_shape(bv)) {
    throw ShapeError("add: " + av.shape_string() + " vs " + bv.shape_string());
  }
  Tensor y = av;
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += bv[i];
  return push(Node{.op = Primitive::Add, .inputs = {a.index, b.index}, .value = std::move(y),
                   .needs_grad = needs_grad({a, b})});
}

NodeId Tape::scale(NodeId x, double factor) {
  Tensor y = node(x).value;
  for (double& v : y.values()) v *= factor;
  return push(Node{.op = Primitive::Scale, .inputs = {x.index}, .value = std::move(y),
                   .needs_grad = needs_grad({x}), .constant = factor});
}

NodeId Tape::shift(NodeId x, double offset) {
  Tensor y = node(x).value;
  for (double& v : y.values()) v += offset;
  return push(Node{.op = Primitive::Shift, .inputs = {x.index}, .value = std::move(y),
                   .needs_grad = needs_grad({x}), .constant = offset});
}

NodeId Tape::log(NodeId x) {
  Tensor y = node(x).value;
  for (double& v : y.values()) v = std::log(v);
  return push(Node{.op = Primitive::Log, .inputs = {x.index}, .value = std::move(y),
                   .needs_grad = needs_grad({x})});
}

NodeId Tape::abs(NodeId x) {
  Tensor y = node(x).value;
  for (double& v : y.values()) v = std::fabs(v);
  return push(Node{.op = Primitive::Abs, .inputs = {x.index}, .value = std::move(y),
                   .needs_grad = needs_grad({x})});
}

NodeId Tape::slice(NodeId x, std::size_t begin, std::size_t count) {
  const Tensor& xv = node(x).value;
  if (xv.rank() == 0 || count == 0 || begin + count > xv.cols()) {
    throw ShapeError("slice [" + std::to_string(begin) + ", +" + std::to_string(count) +
                     ") of " + xv.shape_string());
  }
  const std::size_t rows = xv.rows(), cols = xv.cols();
  Tensor y(xv.rank() == 2 ? Tensor::Shape{rows, count} : Tensor::Shape{count});
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(xv.values().data() + r * cols + begin, count, y.values().data() + r * count);
  }
  return push(Node{.op = Primitive::Slice, .inputs = {x.index}, .value = std::move(y),
                   .needs_grad = needs_grad({x}), .offset = begin});
}

NodeId Tape::reshape(NodeId x, Tensor::Shape shape) {
  const Tensor& xv = node(x).value;
  Tensor y(std::move(shape), xv.storage());
  return push(Node{.op = Primitive::Reshape, .inputs = {x.index}, .value = std::move(y),
                   .needs_grad = needs_grad({x})});
}

// ---------------------------------------------------------------------------
// Reverse pass

namespace {

Tensor& grad_slot(std::vector<std::optional<Tensor>>& adj, std::uint32_t i,
                  const Tensor::Shape& shape) {
  if (!adj[i]) adj[i].emplace(shape, 0.0);
  return *adj[i];
}

}  // namespace

Gradients Tape::backward(NodeId root) const {
  const Node& r = node(root);
  if (r.value.rank() != 0) {
    throw ContractError("backward root must be a scalar, got " + r.value.shape_string());
  }
  std::vector<std::optional<Tensor>> adj(root.index + 1);
  adj[root.index].emplace(Tensor::scalar(1.0));

  Gradients out;
  for (std::size_t k = root.index + 1; k-- > 0;) {
    const Node& n = nodes_[k];
    if (!adj[k] || !n.needs_grad) continue;
    const Tensor& g = *adj[k];
    auto slot = [&](std::size_t which) -> Tensor* {
      const std::uint32_t i = n.inputs[which];
      if (!nodes_[i].needs_grad) return nullptr;
      return &grad_slot(adj, i, nodes_[i].value.shape());
    };

    switch (n.op) {
      case Primitive::Constant:
        break;
      case Primitive::Parameter: {
        bool merged = false;
        for (auto& [param, grad] : out.entries_) {
          if (param == n.param) {
            for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += g[i];
            merged = true;
          }
        }
        if (!merged) out.entries_.emplace_back(n.param, g);
        break;
      }
      case Primitive::Affine: {
        const Tensor& x = nodes_[n.inputs[0]].value;
        const Tensor& w = nodes_[n.inputs[1]].value;
        const std::size_t rows = x.rows(), in = w.cols(), outw = w.rows();
        if (Tensor* gx = slot(0)) {
          for (std::size_t rr = 0; rr < rows; ++rr) {
            double* gxr = gx->values().data() + rr * in;
            for (std::size_t o = 0; o < outw; ++o) {
              const double go = g[rr * outw + o];
              if (go == 0.0) continue;
              const double* wr = w.values().data() + o * in;
              for (std::size_t i = 0; i < in; ++i) gxr[i] += go * wr[i];
            }
          }
        }
        if (Tensor* gw = slot(1)) {
          for (std::size_t rr = 0; rr < rows; ++rr) {
            const double* xr = x.values().data() + rr * in;
            for (std::size_t o = 0; o < outw; ++o) {
              const double go = g[rr * outw + o];
              if (go == 0.0) continue;
              double* gwr = gw->values().data() + o * in;
              for (std::size_t i = 0; i < in; ++i) gwr[i] += go * xr[i];
            }
          }
        }
        if (Tensor* gb = slot(2)) {
          for (std::size_t rr = 0; rr < rows; ++rr) {
            for (std::size_t o = 0; o < outw; ++o) (*gb)[o] += g[rr * outw + o];
          }
        }
        break;
      }
      case Primitive::Relu: {
        if (Tensor* gx = slot(0)) {
          const Tensor& x = nodes_[n.inputs[0]].value;
          for (std::size_t i = 0; i < g.size(); ++i) {
            if (x[i] > 0.0) (*gx)[i] += g[i];
          }
        }
        break;
      }
      case Primitive::Softmax: {
        if (Tensor* gx = slot(0)) {
          const Tensor& s = n.value;
          const std::size_t rows = s.rows(), cols = s.cols();
          for (std::size_t rr = 0; rr < rows; ++rr) {
            double dot = 0.0;
            for (std::size_t c = 0; c < cols; ++c) dot += g[rr * cols + c] * s[rr * cols + c];
            for (std::size_t c = 0; c < cols; ++c) {
              const std::size_t i = rr * cols + c;
              (*gx)[i] += s[i] * (g[i] - dot);
            }
          }
        }
        break;
      }
      case Primitive::Mul: {
        const Tensor& a = nodes_[n.inputs[0]].value;
        const Tensor& b = nodes_[n.inputs[1]].value;
        if (Tensor* ga = slot(0)) {
          for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * b[i];
        }
        if (Tensor* gb = slot(1)) {
          for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] += g[i] * a[i];
        }
        break;
      }
      case Primitive::Concat: {
        const std::size_t rows = n.value.rows(), width = n.value.cols();
        std::size_t col = 0;
        for (std::size_t p = 0; p < n.inputs.size(); ++p) {
          const std::size_t w = nodes_[n.inputs[p]].value.cols();
          if (Tensor* gp = slot(p)) {
            for (std::size_t rr = 0; rr < rows; ++rr) {
              for (std::size_t c = 0; c < w; ++c) gp->at(rr, c) += g[rr * width + col + c];
            }
          }
          col += w;
        }
        break;
      }
      case Primitive::Dropout: {
        if (Tensor* gx = slot(0)) {
          for (std::size_t i = 0; i < g.size(); ++i) (*gx)[i] += g[i] * n.aux[i];
        }
        break;
      }
      case Primitive::Mean: {
        if (Tensor* gx = slot(0)) {
          const double share = g.item() / static_cast<double>(gx->size());
          for (double& v : gx->values()) v += share;
        }
        break;
      }
      case Primitive::Square: {
        if (Tensor* gx = slot(0)) {
          const Tensor& x = nodes_[n.inputs[0]].value;
          for (std::size_t i = 0; i < g.size(); ++i) (*gx)[i] += 2.0 * x[i] * g[i];
        }
        break;
      }
      case Primitive::Sub:
      case Primitive::Add: {
        const double sign = n.op == Primitive::Sub ? -1.0 : 1.0;
        if (Tensor* ga = slot(0)) {
          for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i];
        }
        if (Tensor* gb = slot(1)) {
          for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] += sign * g[i];
        }
        break;
      }
      case Primitive::Scale: {
        if (Tensor* gx = slot(0)) {
          for (std::size_t i = 0; i < g.size(); ++i) (*gx)[i] += n.constant * g[i];
        }
        break;
      }
      case Primitive::Shift:
      case Primitive::Reshape: {
        if (Tensor* gx = slot(0)) {
          for (std::size_t i = 0; i < g.size(); ++i) (*gx)[i] += g[i];
        }
        break;
      }
      case Primitive::Log: {
        if (Tensor* gx = slot(0)) {
          const Tensor& x = nodes_[n.inputs[0]].value;
          for (std::size_t i = 0; i < g.size(); ++i) (*gx)[i] += g[i] / x[i];
        }
        break;
      }
      case Primitive::Abs: {
        if (Tensor* gx = slot(0)) {
          const Tensor& x = nodes_[n.inputs[0]].value;
          for (std::size_t i = 0; i < g.size(); ++i) {
            const double sgn = x[i] > 0.0 ? 1.0 : (x[i] < 0.0 ? -1.0 : 0.0);
            (*gx)[i] += sgn * g[i];
          }
        }
        break;
      }
      case Primitive::Slice: {
        if (Tensor* gx = slot(0)) {
          const std::size_t rows = n.value.rows(), w = n.value.cols();
          for (std::size_t rr = 0; rr < rows; ++rr) {
            for (std::size_t c = 0; c < w; ++c) gx->at(rr, n.offset + c) += g[rr * w + c];
          }
        }
        break;
      }
    }
    if (n.op != Primitive::Parameter) adj[k].reset();
  }
  return out;
}

}  // namespace mixlen
