// Acceptance suite: one PASS/FAIL line per criterion.
//
// Exits 0 once every check has run; --strict makes any FAIL a nonzero exit.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include "mixlen/errors.hpp"
#include "mixlen/eval.hpp"
#include "mixlen/gradient_suite.hpp"
#include "mixlen/loss.hpp"
#include "mixlen/mechanism.hpp"
#include "mixlen/train.hpp"
#include "support.hpp"

using namespace mixlen;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void report(int id, const char* name, bool pass, const std::string& detail) {
  std::printf("[%s] %d %-28s %s\n", pass ? "PASS" : "FAIL", id, name, detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Dataset benchmark_data() { return preprocess(generate_synthetic(350, 0, 0.05)); }

void mechanism_oracle() {
  const auto rows = testing::load_mechanism_oracle();
  const auto t0 = Clock::now();
  double worst = 0.0;
  std::size_t mismatched = 0;
  for (const auto& r : rows) {
    const mechanism::PipeSpec pipe{r.d, r.length};
    worst = std::max(worst, testing::rel_error(mechanism::critical_reynolds(pipe), r.re_j));
    worst = std::max(worst, testing::rel_error(mechanism::austin_length(pipe, {r.re}), r.y_m));
    worst = std::max(worst,
                     testing::rel_error(mechanism::interval_gap({r.q_min, r.t_delay}), r.y_ig));
    const bool turbulent =
        mechanism::austin_branch(pipe, {r.re}) == mechanism::AustinBranch::Turbulent;
    mismatched += turbulent != r.turbulent;
  }
  bool flips = true;
  for (int i = 1; i <= 200; ++i) {
    const mechanism::PipeSpec pipe{0.005 * i, 1e5};
    const double re_j = mechanism::critical_reynolds(pipe);
    flips &= mechanism::austin_branch(pipe, {re_j}) == mechanism::AustinBranch::Turbulent;
    flips &= mechanism::austin_branch(pipe, {std::nextafter(re_j, 0.0)}) ==
             mechanism::AustinBranch::Laminar;
  }
  const double secs = seconds_since(t0);
  report(1, "mechanism oracle",
         rows.size() >= 10000 && worst <= 1e-9 && mismatched == 0 && flips && secs < 1.0,
         fmt("%zu inputs, max rel err %.2e (tol 1e-9), branch mismatches %zu, flip at Re_j %s, "
             "%.3f s (limit 1 s)",
             rows.size(), worst, mismatched, flips ? "exact" : "wrong", secs));
}

void gradient_suite() {
  const auto t0 = Clock::now();
  const GradientSuiteReport rep = run_gradient_suite(1000, 20, 0, 1e-4);
  const double secs = seconds_since(t0);
  report(2, "gradient suite", rep.passed() && rep.cases.size() >= 1000 && secs < 60.0,
         fmt("%zu cases, %zu failures, max rel err %.2e (tol 1e-4), %.1f s (limit 60 s)",
             rep.cases.size(), rep.failures, rep.max_rel_error, secs));
}

void loss_analytics() {
  auto dc = [](std::vector<double> gap) {
    Tape t;
    const std::size_t n = gap.size();
    return t
        .value(difference_penalty(t, t.constant(Tensor(Tensor::Shape{n})),
                                  t.constant(Tensor(Tensor::Shape{n})),
                                  t.constant(Tensor::vector(std::move(gap)))))
        .item();
  };
  auto cor = [](std::vector<double> pl, std::vector<double> pu) {
    Tape t;
    return t
        .value(correlation_penalty(t, t.constant(Tensor::vector(std::move(pl))),
                                   t.constant(Tensor::vector(std::move(pu))),
                                   t.constant(Tensor::matrix(1, 1, {1.0})),
                                   t.constant(Tensor::vector({0.0}))))
        .item();
  };
  const double single = dc({3.0});
  const double mixed = dc({3.0, -2.0});
  const double satisfied = dc({-1.0, -5.0, 0.0});
  const double two = cor({1.0, 2.0}, {2.0, 1.0});
  const double same = cor({0.4, -1.0, 2.5}, {0.4, -1.0, 2.5});
  const double total = total_loss(2.5, 9.0, 0.5, LossWeights{});
  const bool pass = std::fabs(single - 9.0) < 1e-12 && std::fabs(mixed - 4.5) < 1e-12 &&
                    satisfied == 0.0 && std::fabs(two - 0.5) <= 1e-4 && std::fabs(same) < 1e-12 &&
                    std::fabs(total - 2.64) < 1e-12;
  report(3, "loss analytics", pass,
         fmt("DC %.6g/%.6g/%.6g (9/4.5/0), COR %.6f/%.2g (0.5/0), total %.6g (2.64)", single,
             mixed, satisfied, two, same, total));
}

void training_sanity() {
  const Dataset ds = benchmark_data();
  const SplitPlan split = kfold_split(ds.rows(), 0)[0];
  const TrainConfig tc;
  const auto t0 = Clock::now();
  try {
    const TrainResult r = train(make_model(ModelConfig{}, ds, split), ds, split, tc);
    const double secs = seconds_since(t0);
    bool finite = true;
    for (const auto& e : r.history) {
      finite &= std::isfinite(e.data) && std::isfinite(e.difference) &&
                std::isfinite(e.correlation) && std::isfinite(e.total);
    }
    const double first = r.history.front().total;
    const double last = r.history.back().total;
    const double reduction = 1.0 - last / first;
    report(4, "training sanity",
           r.history.size() == 2000 && finite && reduction >= 0.90 && secs <= 120.0,
           fmt("total %.6g -> %.6g over %zu epochs, reduction %.1f%% (need >= 90%%), finite %s, "
               "%.1f s (limit 120 s)",
               first, last, r.history.size(), 100.0 * reduction, finite ? "yes" : "no", secs));
  } catch (const Error& e) {
    report(4, "training sanity", false, std::string("training failed: ") + e.what());
  }
}

void benchmark_criteria() {
  const Dataset ds = benchmark_data();
  ExperimentConfig cfg;
  const auto t0 = Clock::now();
  const EvalReport rep = run_experiment(cfg, ds);
  const double secs = seconds_since(t0);

  auto median = [&](Variant v, std::string_view metric) {
    return rep.summary(v, Limit::Lower, metric)->median;
  };
  const double full = median(Variant::Full, "rmse");
  std::string detail = fmt("median lower RMSE full %.2f", full);
  bool ordered = true;
  for (Variant v : {Variant::NoModule1, Variant::NoModule2, Variant::NoModule3,
                    Variant::PlainDnn}) {
    const double other = median(v, "rmse");
    ordered &= full <= other;
    detail += fmt(", %s %.2f", std::string(variant_name(v)).c_str(), other);
  }
  detail += fmt("; %zu runs in %.1f s (limit 900 s)", rep.cells.size(), secs);
  report(5, "ablation ordering", ordered && secs <= 900.0, detail);

  const double viol_full = median(Variant::Full, "violation_rate");
  const double viol_nm3 = median(Variant::NoModule3, "violation_rate");
  report(6, "physics consistency", viol_full <= viol_nm3 && viol_full <= 0.05,
         fmt("median violation rate full %.4f, no_module3 %.4f (need full <= no_module3 and "
             "full <= 0.05)",
             viol_full, viol_nm3));
}

void split_protocol() {
  bool ok = true;
  std::size_t checked = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto plans = kfold_split(350, seed);
    ok &= plans.size() == 10;
    std::set<std::size_t> tests;
    for (const auto& p : plans) {
      ok &= p.train.size() == 280 && p.validation.size() == 35 && p.test.size() == 35;
      std::vector<int> seen(350, 0);
      for (auto* part : {&p.train, &p.validation, &p.test}) {
        for (std::size_t i : *part) ok &= i < 350 && ++seen[i] == 1;
      }
      for (int s : seen) ok &= s == 1;
      tests.insert(p.test.begin(), p.test.end());
      ++checked;
    }
    ok &= tests.size() == 350;
  }
  report(7, "split protocol", ok,
         fmt("%zu rotations over 20 seeds: 280/35/35, disjoint, covering", checked));
}

void determinism() {
  const fs::path dir = fs::temp_directory_path() / "mixlen_acceptance_det";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string cli = MIXLEN_CLI;
  const std::string data = (dir / "d.csv").string();
  auto run = [&](const std::string& args) {
    return std::system((cli + " " + args + " > /dev/null 2>&1").c_str()) == 0;
  };
  bool ok = run("generate --n 350 --seed 0 --noise 0.05 --out " + data);
  ok &= run("train --data " + data + " --seed 5 --epochs 200 --out " + (dir / "t1").string());
  ok &= run("train --data " + data + " --seed 5 --epochs 200 --out " + (dir / "t2").string());
  const bool same_ckpt = ok && slurp(dir / "t1" / "checkpoint.json") ==
                                   slurp(dir / "t2" / "checkpoint.json") &&
                         slurp(dir / "t1" / "history.csv") == slurp(dir / "t2" / "history.csv");
  const std::string bench = "benchmark --data " + data + " --seeds 3 --epochs 100 --out ";
  ok &= run(bench + (dir / "b1").string());
  ok &= run(bench + (dir / "b2").string());
  const bool same_report =
      ok && Json::parse(slurp(dir / "b1" / "report.json")) ==
                Json::parse(slurp(dir / "b2" / "report.json")) &&
      slurp(dir / "b1" / "report.csv") == slurp(dir / "b2" / "report.csv");
  report(8, "determinism", ok && same_ckpt && same_report,
         fmt("train checkpoints %s, benchmark reports %s", same_ckpt ? "identical" : "differ",
             same_report ? "identical" : "differ"));
}

void checkpoint_roundtrip() {
  const Dataset ds = benchmark_data();
  const SplitPlan split = kfold_split(ds.rows(), 0)[0];
  TrainConfig tc;
  tc.epochs = 50;
  const TrainResult r = train(make_model(ModelConfig{}, ds, split), ds, split, tc);
  const fs::path path = fs::temp_directory_path() / "mixlen_acceptance_ckpt.json";
  save_checkpoint(path, r.checkpoint);
  const Checkpoint back = load_checkpoint(path);

  Rng rng(2024);
  std::vector<std::size_t> rows(100);
  for (auto& i : rows) i = static_cast<std::size_t>(rng.next() % ds.rows());
  const Model& m = r.checkpoint.model;
  const Batch batch = make_batch(ds, rows, m.norm(), true);
  const Tensor a = m.predict(batch.input);
  const Tensor b = back.model.predict(batch.input);
  std::size_t differing = 0;
  for (std::size_t i = 0; i < a.size(); ++i) differing += a[i] != b[i];
  report(9, "checkpoint round trip", differing == 0 && a.size() == 200,
         fmt("%zu of %zu outputs differ bitwise after save/load", differing, a.size()));
}

}  // namespace

int main(int argc, char** argv) {
  const bool strict = argc > 1 && std::string(argv[1]) == "--strict";
  try {
    mechanism_oracle();
    gradient_suite();
    loss_analytics();
    training_sanity();
    benchmark_criteria();
    split_protocol();
    determinism();
    checkpoint_roundtrip();
  } catch (const std::exception& e) {
    std::printf("acceptance suite aborted: %s\n", e.what());
    return 2;
  }
  std::printf("%d of 9 criteria failing\n", failures);
  return strict && failures > 0 ? 1 : 0;
}
