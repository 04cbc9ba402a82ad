#include <cmath>
#include <sstream>

#include "doctest.h"
#include "mixlen/config.hpp"
#include "mixlen/errors.hpp"
#include "mixlen/eval.hpp"
#include "mixlen/train.hpp"
#include "support.hpp"

using namespace mixlen;

namespace {

struct Trained {
  Dataset ds;
  SplitPlan split;
  TrainResult result;
};

Trained train_small(std::size_t epochs, Variant variant = Variant::Full, std::uint64_t seed = 0) {
  Dataset ds = generate_synthetic(60, 1, 0.05);
  SplitPlan split = kfold_split(ds.rows(), 0)[0];
  ModelConfig mc;
  TrainConfig tc;
  mc.seed = tc.seed = seed;
  tc.epochs = epochs;
  apply_variant(variant, mc, tc);
  TrainResult r = train(make_model(mc, ds, split), ds, split, tc);
  return {std::move(ds), std::move(split), std::move(r)};
}

}  // namespace

TEST_CASE("training records one history row per epoch") {
  const Trained t = train_small(25);
  CHECK(t.result.history.size() == 25);
  CHECK(t.result.history.front().epoch == 1);
  CHECK(t.result.checkpoint.training.epochs_run == 25);
  for (const auto& r : t.result.history) {
    CHECK(std::isfinite(r.total));
    CHECK(std::isfinite(r.val_total));
    CHECK(r.total == doctest::Approx(r.data + 0.01 * r.difference + 0.1 * r.correlation));
  }
}

TEST_CASE("without the physics loss the total equals the data term") {
  const Trained t = train_small(10, Variant::NoModule3);
  for (const auto& r : t.result.history) CHECK(r.total == r.data);
}

TEST_CASE("training is deterministic") {
  const Trained a = train_small(15, Variant::Full, 3);
  const Trained b = train_small(15, Variant::Full, 3);
  const Trained c = train_small(15, Variant::Full, 4);
  CHECK(checkpoint_to_json(a.result.checkpoint) == checkpoint_to_json(b.result.checkpoint));
  CHECK(checkpoint_to_json(a.result.checkpoint) != checkpoint_to_json(c.result.checkpoint));
}

TEST_CASE("checkpoint round trip is bit exact") {
  const Dataset big = generate_synthetic(150, 7, 0.05);
  Trained t = train_small(10);
  const Model& model = t.result.checkpoint.model;
  std::vector<std::size_t> rows(100);
  for (std::size_t i = 0; i < 100; ++i) rows[i] = i + 25;
  const Batch batch = make_batch(big, rows, model.norm(), true);
  const Tensor before = model.predict(batch.input);

  const std::string text = checkpoint_to_json(t.result.checkpoint).dump(1);
  const Checkpoint back = parse_checkpoint(text);
  const Tensor after = back.model.predict(batch.input);
  CHECK(after == before);
  CHECK(back.model.norm() == model.norm());
  CHECK(back.model.config() == model.config());
  CHECK(checkpoint_to_json(back).dump(1) == text);
}

TEST_CASE("checkpoint load errors") {
  Trained t = train_small(2);
  const Json doc = checkpoint_to_json(t.result.checkpoint);
  const std::string text = doc.dump(1);

  CHECK_THROWS_AS(parse_checkpoint(text.substr(0, text.size() / 2)), LoadError);

  Json wrong_version = doc;
  wrong_version["version"] = 99;
  CHECK_THROWS_AS(checkpoint_from_json(wrong_version), LoadError);

  Json wrong_width = doc;
  wrong_width["config"]["trunk_widths"] = {60, 12};
  try {
    checkpoint_from_json(wrong_width);
    FAIL("expected a load error");
  } catch (const LoadError& e) {
    CHECK(std::string(e.what()).find("trunk.1.weight") != std::string::npos);
  }
}

TEST_CASE("run config precedence and validation") {
  RunConfig c;
  CHECK(c.train.epochs == 2000);
  CHECK(c.train.adam.learning_rate == 1e-4);
  c.apply_json(Json::parse(R"({"optimizer": {"epochs": 50}, "seed": 9})"));
  CHECK(c.train.epochs == 50);
  CHECK(c.model.seed == 9);
  CHECK(c.train.seed == 9);
  CHECK(c.train.adam.beta1 == 0.9);
  CHECK_THROWS_AS(c.apply_json(Json::parse(R"({"optimiser": {}})")), ConfigError);
  CHECK_THROWS_AS(c.apply_json(Json::parse(R"({"model": {"dropout_rate": 2.0}})")), ConfigError);
  CHECK_THROWS_AS(c.apply_json(Json::parse(R"({"model": {"fusion_width": "wide"}})")),
                  ConfigError);

  RunConfig a, b;
  CHECK(a.hash() == b.hash());
  b.set_seed(1);
  CHECK(a.hash() != b.hash());
  RunConfig round;
  round.apply_json(a.to_json());
  CHECK(round.hash() == a.hash());
}

TEST_CASE("history csv layout") {
  const Trained t = train_small(3);
  std::ostringstream out;
  write_history_csv(out, t.result.history, {"seed=0"});
  const std::string s = out.str();
  CHECK(s.rfind("# seed=0\nepoch,L_data,L_DC,L_COR,total,val_total\n1,", 0) == 0);
}
