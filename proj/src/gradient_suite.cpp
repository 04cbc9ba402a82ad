#include "mixlen/gradient_suite.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "mixlen/errors.hpp"
#include "mixlen/loss.hpp"
#include "mixlen/model.hpp"

namespace mixlen {

double kink_distance(const Tape& tape) {
  double best = std::numeric_limits<double>::infinity();
  for (std::uint32_t i = 0; i < tape.size(); ++i) {
    const Primitive p = tape.kind(NodeId{i});
    if (p != Primitive::Relu && p != Primitive::Abs) continue;
    for (double v : tape.value(NodeId{tape.inputs(NodeId{i})[0]}).values()) {
      best = std::min(best, std::fabs(v));
    }
  }
  return best;
}

namespace {

constexpr double kKinkMargin = 1e-3;
constexpr int kMaxRedraws = 50;

constexpr std::array<Primitive, 16> kDifferentiable = {
    Primitive::Affine, Primitive::Relu,  Primitive::Softmax, Primitive::Mul,
    Primitive::Concat, Primitive::Dropout, Primitive::Mean,  Primitive::Square,
    Primitive::Sub,    Primitive::Add,   Primitive::Scale,   Primitive::Shift,
    Primitive::Log,    Primitive::Abs,   Primitive::Slice,   Primitive::Reshape};

Tensor random_tensor(Rng& rng, Tensor::Shape shape, double lo, double hi) {
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

// Values in [lo, hi] with random sign, bounded away from zero.
Tensor signed_tensor(Rng& rng, Tensor::Shape shape, double lo, double hi) {
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(lo, hi);
  return t;
}

Tensor::Shape random_shape(Rng& rng) {
  const std::size_t cols = 1 + rng.next() % 6;
  if (rng.uniform() < 0.5) return {cols};
  return {1 + rng.next() % 4, cols};
}

// Parameters plus a builder recording prim(...) reduced by a random
// weighting to a scalar.
struct PrimitiveCase {
  std::vector<Parameter> params;
  Tensor weights;
  Tensor aux;
  std::size_t a = 0, b = 0;
  double c = 0.0;
};

PrimitiveCase make_case(Primitive p, Rng& rng) {
  PrimitiveCase k;
  const Tensor::Shape shape = random_shape(rng);
  auto param = [&](std::string name, Tensor v) { k.params.push_back({std::move(name), std::move(v)}); };
  switch (p) {
    case Primitive::Affine: {
      const std::size_t in = 1 + rng.next() % 6, out = 1 + rng.next() % 5;
      const Tensor::Shape xs = rng.uniform() < 0.5 ? Tensor::Shape{in}
                                                   : Tensor::Shape{1 + rng.next() % 4, in};
      param("x", random_tensor(rng, xs, -2, 2));
      param("W", random_tensor(rng, {out, in}, -1, 1));
      param("b", random_tensor(rng, {out}, -1, 1));
      break;
    }
    case Primitive::Relu:
    case Primitive::Abs:
      param("x", signed_tensor(rng, shape, 0.01, 3));
      break;
    case Primitive::Softmax:
      param("x", random_tensor(rng, shape, -4, 4));
      break;
    case Primitive::Log:
      param("x", random_tensor(rng, shape, 0.2, 5));
      break;
    case Primitive::Mul:
    case Primitive::Sub:
    case Primitive::Add:
      param("a", random_tensor(rng, shape, -3, 3));
      param("b", random_tensor(rng, shape, -3, 3));
      break;
    case Primitive::Concat: {
      const std::size_t parts = 2 + rng.next() % 2;
      for (std::size_t i = 0; i < parts; ++i) {
        Tensor::Shape s = shape;
        s.back() = 1 + rng.next() % 4;
        param("part" + std::to_string(i), random_tensor(rng, s, -3, 3));
      }
      break;
    }
    case Primitive::Dropout:
      param("x", random_tensor(rng, shape, -3, 3));
      k.aux = dropout_mask(rng, shape, 0.1 + 0.4 * rng.uniform());
      break;
    case Primitive::Slice: {
      param("x", random_tensor(rng, shape, -3, 3));
      const std::size_t cols = shape.back();
      k.a = rng.next() % cols;
      k.b = 1 + rng.next() % (cols - k.a);
      break;
    }
    default:
      param("x", random_tensor(rng, shape, -3, 3));
      k.c = rng.uniform(-2, 2);
      break;
  }
  return k;
}

NodeId record_primitive(Primitive p, Tape& t, const PrimitiveCase& k) {
  std::vector<NodeId> in;
  for (const Parameter& q : k.params) in.push_back(t.parameter(q));
  switch (p) {
    case Primitive::Affine: return t.affine(in[0], in[1], in[2]);
    case Primitive::Relu: return t.relu(in[0]);
    case Primitive::Softmax: return t.softmax(in[0]);
    case Primitive::Mul: return t.mul(in[0], in[1]);
    case Primitive::Concat: return t.concat(in);
    case Primitive::Dropout: return t.dropout(in[0], k.aux);
    case Primitive::Mean: return t.mean(in[0]);
    case Primitive::Square: return t.square(in[0]);
    case Primitive::Sub: return t.sub(in[0], in[1]);
    case Primitive::Add: return t.add(in[0], in[1]);
    case Primitive::Scale: return t.scale(in[0], k.c);
    case Primitive::Shift: return t.shift(in[0], k.c);
    case Primitive::Log: return t.log(in[0]);
    case Primitive::Abs: return t.abs(in[0]);
    case Primitive::Slice: return t.slice(in[0], k.a, k.b);
    case Primitive::Reshape: {
      const Tensor& v = t.value(in[0]);
      const Tensor::Shape s =
          v.rank() == 2 ? Tensor::Shape{v.size()} : Tensor::Shape{1, v.size()};
      return t.reshape(in[0], s);
    }
    default: throw ContractError("no gradient case for primitive");
  }
}

GradientCase primitive_case(Primitive p, Rng& rng, double tol) {
  PrimitiveCase k = make_case(p, rng);
  Tensor weights;
  {
    Tape probe;
    weights = random_tensor(rng, probe.value(record_primitive(p, probe, k)).shape(), -1, 1);
  }
  const GraphBuilder build = [&](Tape& t) {
    const NodeId y = record_primitive(p, t, k);
    return t.mean(t.mul(y, t.constant(weights)));
  };
  std::vector<Parameter*> ptrs;
  for (Parameter& q : k.params) ptrs.push_back(&q);
  return GradientCase{primitive_name(p), grad_check(build, ptrs, tol)};
}

ModalityManifest toy_manifest() {
  return ModalityManifest({{"hydrothermal", {"h0", "h1", "h2"}},
                           {"pipeline", {"diameter", "length", "reynolds"}},
                           {"product_properties", {"p0", "p1"}},
                           {"initial_condition", {"i0"}}});
}

// Target scale of the toy batch. The correlation bias has an identically zero
// gradient, so its central difference is pure rounding of the total; keeping
// the total small keeps that rounding below the 1e-8 denominator floor.
constexpr double kToyScale = 0.1;

GradientCase model_case(Rng& rng, double tol) {
  const ModalityManifest manifest = toy_manifest();
  constexpr std::size_t kRows = 5;
  for (int attempt = 0; attempt < kMaxRedraws; ++attempt) {
    NormStats norm;
    norm.feature_mean.assign(manifest.feature_count(), 0.0);
    norm.feature_std.assign(manifest.feature_count(), 1.0);
    norm.target_mean = {0.0, 0.0};
    norm.target_std = {kToyScale, kToyScale};
    norm.ym_mean = 800.0;
    norm.ym_std = 150.0;

    ModelConfig config;
    config.seed = rng.next();
    config.fusion.extractor_widths = {4, 3, 3, 2};
    config.fusion.fusion_width = 6;
    config.trunk.hidden_widths = {8, 4};
    Model model(config, manifest, norm);
    for (Parameter* p : model.parameters()) {
      for (double& v : p->value.values()) v = rng.uniform(-1.0, 1.0);
    }
    model.correlation_weight().value[0] = rng.uniform(0.5, 1.5);
    model.correlation_bias().value[0] = rng.uniform(-0.5, 0.5);

    ModelInput input;
    for (std::size_t g = 0; g < 4; ++g) {
      input.modalities[g] =
          random_tensor(rng, {kRows, manifest.groups()[g].columns.size()}, -2, 2);
    }
    input.austin = random_tensor(rng, {kRows}, 400, 1200);
    const Tensor target = random_tensor(rng, {kRows, 2}, -1.5 * kToyScale, 1.5 * kToyScale);
    const Tensor gap = random_tensor(rng, {kRows}, 0.0, kToyScale);
    const std::uint64_t dropout_seed = rng.next();
    const LossWeights weights{rng.uniform(0.005, 0.05), rng.uniform(0.05, 0.2)};

    const GraphBuilder build = [&](Tape& t) {
      Rng dropout(dropout_seed);
      const NodeId pred = model.forward(t, input, Mode::Train, &dropout);
      return coupling_loss(t, pred, target, gap, t.parameter(model.correlation_weight()),
                           t.parameter(model.correlation_bias()), weights)
          .total;
    };
    Tape probe;
    build(probe);
    if (kink_distance(probe) < kKinkMargin) continue;
    return GradientCase{"coupling_loss", grad_check(build, model.parameters(), tol)};
  }
  throw EvaluationError("could not draw a kink-free model gradient case");
}

}  // namespace

GradientSuiteReport run_gradient_suite(std::size_t primitive_cases, std::size_t model_cases,
                                       std::uint64_t seed, double tol) {
  Rng rng(seed);
  GradientSuiteReport report;
  auto add = [&](GradientCase c) {
    report.max_rel_error = std::max(report.max_rel_error, c.report.max_rel_error);
    if (!c.report.passed) ++report.failures;
    report.cases.push_back(std::move(c));
  };
  for (std::size_t i = 0; i < primitive_cases; ++i) {
    add(primitive_case(kDifferentiable[i % kDifferentiable.size()], rng, tol));
  }
  for (std::size_t i = 0; i < model_cases; ++i) add(model_case(rng, tol));
  return report;
}

}  // namespace mixlen
