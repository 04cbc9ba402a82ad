#include <cmath>

#include "doctest.h"
#include "mixlen/errors.hpp"
#include "mixlen/optim.hpp"
#include "mixlen/tape.hpp"

using namespace mixlen;

namespace {

// Scalar reference update written out longhand.
struct ReferenceAdam {
  double lr, b1, b2, eps, m = 0, v = 0;
  int t = 0;
  double step(double theta, double g) {
    ++t;
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mh = m / (1 - std::pow(b1, t));
    const double vh = v / (1 - std::pow(b2, t));
    return theta - lr * mh / (std::sqrt(vh) + eps);
  }
};

Gradients quadratic_grads(Parameter& p) {
  Tape t;
  const NodeId x = t.parameter(p);
  return t.backward(t.mean(t.square(x)));
}

}  // namespace

TEST_CASE("adam defaults") {
  const AdamConfig c;
  CHECK(c.learning_rate == 1e-4);
  CHECK(c.beta1 == 0.9);
  CHECK(c.beta2 == 0.999);
  CHECK(c.epsilon == 1e-8);
}

TEST_CASE("first adam step moves by the learning rate against the gradient sign") {
  Parameter p{"theta", Tensor::vector({1.0, -2.0})};
  Parameter* params[] = {&p};
  AdamState s = make_adam_state(params);
  adam_step(params, quadratic_grads(p), s);
  CHECK(p.value[0] == doctest::Approx(1.0 - 1e-4).epsilon(1e-12));
  CHECK(p.value[1] == doctest::Approx(-2.0 + 1e-4).epsilon(1e-12));
  CHECK(s.step == 1);
}

TEST_CASE("adam matches a longhand reference") {
  Parameter p{"theta", Tensor::vector({0.8})};
  Parameter* params[] = {&p};
  AdamState s = make_adam_state(params, {1e-2, 0.9, 0.999, 1e-8});
  ReferenceAdam ref{1e-2, 0.9, 0.999, 1e-8};
  double theta = 0.8;
  for (int i = 0; i < 300; ++i) {
    theta = ref.step(theta, 2.0 * theta);
    adam_step(params, quadratic_grads(p), s);
    REQUIRE(p.value[0] == doctest::Approx(theta).epsilon(1e-12));
  }
}

TEST_CASE("adam converges on a quadratic") {
  Parameter p{"theta", Tensor::vector({1.0})};
  Parameter* params[] = {&p};
  AdamState s = make_adam_state(params, {1e-2, 0.9, 0.999, 1e-8});
  for (int i = 0; i < 2000; ++i) adam_step(params, quadratic_grads(p), s);
  CHECK(std::fabs(p.value[0]) < 1e-2);
}

TEST_CASE("zero gradient leaves parameters unchanged") {
  Parameter p{"theta", Tensor::vector({0.5})};
  Parameter other{"other", Tensor::vector({2.0})};
  Parameter* params[] = {&p, &other};
  AdamState s = make_adam_state(params);
  adam_step(params, quadratic_grads(p), s);
  CHECK(other.value[0] == 2.0);
}

TEST_CASE("non-finite gradient is a training error") {
  Parameter p{"theta", Tensor::vector({0.0})};
  Parameter* params[] = {&p};
  AdamState s = make_adam_state(params);
  Tape t;
  const Gradients g = t.backward(t.mean(t.log(t.parameter(p))));
  CHECK_THROWS_AS(adam_step(params, g, s), TrainingError);
  CHECK(p.value[0] == 0.0);
}

TEST_CASE("linear regression smoke run") {
  // Target y = 3x - 1 on fixed points; one weight and one bias.
  Tensor x(Tensor::Shape{20, 1});
  Tensor y(Tensor::Shape{20, 1});
  for (std::size_t i = 0; i < 20; ++i) {
    x[i] = -1.0 + 0.1 * static_cast<double>(i);
    y[i] = 3.0 * x[i] - 1.0;
  }
  Parameter w{"w", Tensor::matrix(1, 1, {0.0})};
  Parameter b{"b", Tensor::vector({0.0})};
  Parameter* params[] = {&w, &b};
  AdamState s = make_adam_state(params, {1e-2, 0.9, 0.999, 1e-8});
  double first = 0.0, last = 0.0;
  for (int epoch = 1; epoch <= 500; ++epoch) {
    Tape t;
    const NodeId pred = t.affine(t.constant(x), t.parameter(w), t.parameter(b));
    const NodeId loss = t.mean(t.square(t.sub(pred, t.constant(y))));
    const double v = t.value(loss).item();
    if (epoch == 1) first = v;
    last = v;
    adam_step(params, t.backward(loss), s);
  }
  CHECK(last <= 0.1 * first);
}
