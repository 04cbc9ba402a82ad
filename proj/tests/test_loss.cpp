#include <cmath>

#include "doctest.h"
#include "mixlen/errors.hpp"
#include "mixlen/loss.hpp"

using namespace mixlen;

namespace {

double difference_value(std::vector<double> pl, std::vector<double> pu, std::vector<double> gap) {
  Tape t;
  return t
      .value(difference_penalty(t, t.constant(Tensor::vector(std::move(pl))),
                                t.constant(Tensor::vector(std::move(pu))),
                                t.constant(Tensor::vector(std::move(gap)))))
      .item();
}

double correlation_value(std::vector<double> pl, std::vector<double> pu, double wc = 1.0,
                         double bc = 0.0) {
  Tape t;
  return t
      .value(correlation_penalty(t, t.constant(Tensor::vector(std::move(pl))),
                                 t.constant(Tensor::vector(std::move(pu))),
                                 t.constant(Tensor::matrix(1, 1, {wc})),
                                 t.constant(Tensor::vector({bc}))))
      .item();
}

}  // namespace

TEST_CASE("difference penalty hand cases") {
  CHECK(difference_value({0.0}, {0.0}, {3.0}) == doctest::Approx(9.0).epsilon(1e-15));
  CHECK(difference_value({0.0, 0.0}, {0.0, 0.0}, {3.0, -2.0}) ==
        doctest::Approx(4.5).epsilon(1e-15));
  CHECK(difference_value({100.0, 200.0}, {150.0, 260.0}, {30.0, 40.0}) == 0.0);
}

TEST_CASE("difference penalty gradient pushes the limits apart") {
  Parameter pl{"pl", Tensor::vector({100.0, 100.0})};
  Parameter pu{"pu", Tensor::vector({110.0, 200.0})};
  Tape t;
  const NodeId loss = difference_penalty(t, t.parameter(pl), t.parameter(pu),
                                         t.constant(Tensor::vector({30.0, 30.0})));
  const Gradients g = t.backward(loss);
  CHECK(g.of(pl)[0] > 0.0);
  CHECK(g.of(pu)[0] < 0.0);
  CHECK(g.of(pl)[1] == 0.0);
  CHECK(g.of(pu)[1] == 0.0);
}

TEST_CASE("correlation penalty hand cases") {
  CHECK(correlation_value({1.0, 2.0}, {2.0, 1.0}) == doctest::Approx(0.5).epsilon(1e-4));
  CHECK(correlation_value({1.0, 2.0}, {2.0, 1.0}) ==
        doctest::Approx(0.49999999999882483).epsilon(1e-12));
  CHECK(correlation_value({0.3, -1.2, 2.0}, {0.3, -1.2, 2.0}) == doctest::Approx(0.0));
  CHECK(correlation_value({1.0, 2.0}, {3.0, 5.0}, 2.0, 1.0) == doctest::Approx(0.0));
  CHECK_THROWS_AS(correlation_value({1.0}, {1.0}), ContractError);
}

TEST_CASE("total loss combines the weighted terms") {
  const LossWeights w;
  CHECK(w.lambda_dc == 0.01);
  CHECK(w.lambda_cor == 0.1);
  CHECK(total_loss(2.5, 9.0, 0.5, w) == doctest::Approx(2.64).epsilon(1e-12));
  CHECK(total_loss(2.5, 9.0, 0.5, LossWeights{0.0, 0.0}) == 2.5);
  CHECK_THROWS_AS(total_loss(-1.0, 0.0, 0.0, w), ContractError);
  CHECK_THROWS_AS(total_loss(std::nan(""), 0.0, 0.0, w), ContractError);
  CHECK_THROWS_AS(LossWeights({-0.1, 0.1}).validate(), ConfigError);

  Tape t;
  const NodeId v = total_loss(t, t.constant(Tensor::scalar(2.5)), t.constant(Tensor::scalar(9.0)),
                              t.constant(Tensor::scalar(0.5)), w);
  CHECK(t.value(v).item() == doctest::Approx(2.64).epsilon(1e-12));
}

TEST_CASE("data loss") {
  Tape t;
  const NodeId v = data_loss(t, t.constant(Tensor::matrix(2, 2, {1, 2, 3, 4})),
                             t.constant(Tensor::matrix(2, 2, {1, 0, 3, 6})));
  CHECK(t.value(v).item() == doctest::Approx(2.0));
}

TEST_CASE("coupling loss with zero weights equals the data term") {
  Tape t;
  const Tensor pred = Tensor::matrix(3, 2, {100, 120, 200, 210, 300, 290});
  const Tensor target = Tensor::matrix(3, 2, {110, 140, 190, 230, 310, 330});
  const Tensor gap = Tensor::vector({10, 30, 20});
  const auto l = coupling_loss(t, t.constant(pred), target, gap, t.constant(Tensor::matrix(1, 1, {1})),
                               t.constant(Tensor::vector({0})), LossWeights{0.0, 0.0});
  CHECK(t.value(l.total).item() == t.value(l.data).item());
  CHECK(t.value(l.difference).item() == doctest::Approx((0 + 400 + 900) / 3.0));
}
