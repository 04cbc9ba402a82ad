#include <cmath>
#include <numeric>

#include "doctest.h"
#include "mixlen/errors.hpp"
#include "mixlen/gradcheck.hpp"
#include "mixlen/gradient_suite.hpp"
#include "mixlen/tape.hpp"

using namespace mixlen;

TEST_CASE("tensor shapes") {
  const Tensor m = Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6});
  CHECK(m.rows() == 2);
  CHECK(m.cols() == 3);
  CHECK(m.at(1, 2) == 6.0);
  CHECK(Tensor::scalar(4.0).item() == 4.0);
  CHECK_THROWS_AS(Tensor(Tensor::Shape{2, 2}, std::vector<double>{1, 2, 3}), ShapeError);
  CHECK_THROWS_AS(Tensor(Tensor::Shape{2, 2, 2}), ShapeError);
}

TEST_CASE("relu forward") {
  Tape t;
  const NodeId y = t.relu(t.constant(Tensor::vector({-1, 0, 2})));
  CHECK(t.value(y) == Tensor::vector({0, 0, 2}));
}

TEST_CASE("softmax forward") {
  Tape t;
  const NodeId y = t.softmax(t.constant(Tensor::vector({0.0, std::log(2.0)})));
  CHECK(t.value(y)[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(t.value(y)[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));

  const NodeId big = t.softmax(t.constant(Tensor::vector({1000.0, 1000.0, -1000.0})));
  CHECK(t.value(big).all_finite());
  CHECK(t.value(big)[0] == doctest::Approx(0.5));
}

TEST_CASE("softmax rows sum to one") {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    Tensor x(Tensor::Shape{4, 35});
    for (double& v : x.values()) v = rng.uniform(-30.0, 30.0);
    Tape t;
    const Tensor& w = t.value(t.softmax(t.constant(x)));
    for (std::size_t r = 0; r < 4; ++r) {
      double sum = 0.0;
      for (std::size_t c = 0; c < 35; ++c) {
        CHECK(w.at(r, c) >= 0.0);
        CHECK(w.at(r, c) <= 1.0);
        sum += w.at(r, c);
      }
      CHECK(std::fabs(sum - 1.0) <= 1e-12);
    }
  }
}

TEST_CASE("concat, slice and reshape") {
  Tape t;
  const NodeId c = t.concat({t.constant(Tensor::vector({1, 2})), t.constant(Tensor::vector({3}))});
  CHECK(t.value(c) == Tensor::vector({1, 2, 3}));
  CHECK(t.value(t.slice(c, 1, 2)) == Tensor::vector({2, 3}));
  const NodeId r = t.reshape(c, {3, 1});
  CHECK(t.value(r).rows() == 3);
  CHECK_THROWS_AS(t.reshape(c, {2, 2}), ShapeError);
  CHECK_THROWS_AS(t.slice(c, 2, 2), ShapeError);
}

TEST_CASE("binary ops require equal shapes") {
  Tape t;
  const NodeId a = t.constant(Tensor::vector({1, 2}));
  const NodeId b = t.constant(Tensor::vector({1, 2, 3}));
  CHECK_THROWS_AS(t.add(a, b), ShapeError);
  CHECK_THROWS_AS(t.mul(a, b), ShapeError);
  CHECK_THROWS_AS(t.sub(a, b), ShapeError);
}

TEST_CASE("affine forward") {
  Tape t;
  const NodeId x = t.constant(Tensor::matrix(2, 2, {1, 2, 3, 4}));
  const NodeId w = t.constant(Tensor::matrix(1, 2, {10, 1}));
  const NodeId b = t.constant(Tensor::vector({0.5}));
  const Tensor& y = t.value(t.affine(x, w, b));
  CHECK(y.at(0, 0) == 12.5);
  CHECK(y.at(1, 0) == 34.5);
  CHECK_THROWS_AS(t.affine(x, t.constant(Tensor::matrix(1, 3, {1, 1, 1})), b), ShapeError);
}

TEST_CASE("backward needs a scalar root") {
  Tape t;
  const NodeId x = t.constant(Tensor::vector({1, 2}));
  CHECK_THROWS_AS(t.backward(x), ContractError);
}

TEST_CASE("gradient of a shared parameter accumulates") {
  Parameter p{"p", Tensor::vector({3.0})};
  Tape t;
  const NodeId a = t.parameter(p);
  const NodeId b = t.parameter(p);
  const NodeId y = t.mean(t.mul(a, b));
  CHECK(t.backward(y).of(p)[0] == doctest::Approx(6.0));
}

TEST_CASE("dropout mask") {
  Rng rng(11);
  const Tensor m = dropout_mask(rng, {1000}, 0.1);
  std::size_t zeros = 0;
  for (double v : m.values()) {
    CHECK((v == 0.0 || v == doctest::Approx(1.0 / 0.9)));
    zeros += v == 0.0;
  }
  CHECK(zeros > 50);
  CHECK(zeros < 150);
  CHECK_THROWS_AS(dropout_mask(rng, {3}, 1.0), DomainError);
  CHECK_THROWS_AS(dropout_mask(rng, {3}, -0.1), DomainError);
}

TEST_CASE("grad_check on a small composite graph") {
  Parameter w{"w", Tensor::matrix(2, 3, {0.3, -0.2, 0.5, 0.1, 0.4, -0.6})};
  Parameter b{"b", Tensor::vector({0.05, -0.1})};
  const Tensor x = Tensor::matrix(2, 3, {1.0, 2.0, -1.0, 0.5, -0.3, 0.8});
  auto build = [&](Tape& t) {
    const NodeId h = t.affine(t.constant(x), t.parameter(w), t.parameter(b));
    return t.mean(t.square(t.softmax(h)));
  };
  Parameter* params[] = {&w, &b};
  const auto report = grad_check(build, params);
  CHECK(report.passed);
  CHECK(report.checked == 8);
  CHECK(w.value.at(0, 0) == 0.3);
}

TEST_CASE("grad_check is exact on a linear graph") {
  Parameter w{"w", Tensor::vector({0.7, -1.3})};
  auto build = [&](Tape& t) { return t.mean(t.scale(t.parameter(w), 2.0)); };
  Parameter* params[] = {&w};
  const auto good = grad_check(build, params);
  CHECK(good.passed);
  CHECK(good.max_rel_error < 1e-8);
}

TEST_CASE("gradient suite passes on a small sample") {
  const auto rep = run_gradient_suite(64, 3, 5, 1e-4);
  CHECK(rep.passed());
  CHECK(rep.cases.size() == 67);
  CHECK(rep.max_rel_error <= 1e-4);
}
