// mixlen: contamination-length interval prediction toolkit.
//
// Exit codes: 0 success, 1 check failure, 2 input error, 3 numerical failure.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "mixlen/config.hpp"
#include "mixlen/data.hpp"
#include "mixlen/errors.hpp"
#include "mixlen/eval.hpp"
#include "mixlen/gradient_suite.hpp"
#include "mixlen/mechanism.hpp"
#include "mixlen/train.hpp"
#include "mixlen/util.hpp"

namespace fs = std::filesystem;
using namespace mixlen;

namespace {

constexpr int kExitCheckFailed = 1;
constexpr int kExitInput = 2;
constexpr int kExitNumerical = 3;

constexpr const char* kOutputDirEnv = "MIXLEN_OUTPUT_DIR";

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

fs::path output_dir(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv(kOutputDirEnv); env && *env) return env;
  return "mixlen-out";
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) ensure_dir(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

void write_json(const fs::path& path, const Json& doc) {
  auto out = open_out(path);
  out << doc.dump(1) << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

ModalityManifest manifest_or_default(const std::string& path) {
  return path.empty() ? ModalityManifest::default_schema() : load_manifest(path);
}

Dataset load_training_data(const std::string& data, const std::string& manifest) {
  PreprocessReport rep;
  Dataset ds = preprocess(load_csv(data, manifest_or_default(manifest)), &rep);
  std::cout << "loaded " << ds.rows() << " rows (dropped: " << rep.missing << " missing, "
            << rep.inverted << " inverted, " << rep.outliers << " outliers)\n";
  return ds;
}

Variant ablation_variant(const std::string& ablate) {
  if (ablate == "none") return Variant::Full;
  if (ablate == "no-fusion") return Variant::NoModule1;
  if (ablate == "no-mechanism") return Variant::NoModule2;
  if (ablate == "no-physics-loss") return Variant::NoModule3;
  if (ablate == "plain") return Variant::PlainDnn;
  throw ConfigError("unknown ablation " + ablate);
}

void print_metrics(const char* label, const MetricSet& m) {
  std::cout << label << ": rmse=" << num(m.rmse) << " mae=" << num(m.mae)
            << " mape=" << (m.mape ? num(*m.mape) : "undefined")
            << " rmsre=" << (m.rmsre ? num(*m.rmsre) : "undefined")
            << " violation_rate=" << num(m.violation_rate) << '\n';
}

Json metrics_json(const MetricSet& m) {
  Json j = Json::object();
  for (std::string_view name : kMetricNames) {
    const auto v = metric_value(m, name);
    j[std::string(name)] = v ? Json(*v) : Json(nullptr);
  }
  return j;
}

// ---------------------------------------------------------------------------

struct GenerateArgs {
  std::size_t n = 350;
  std::uint64_t seed = 0;
  double noise = 0.05;
  std::string out;
  std::string manifest_out;
};

int run_generate(const GenerateArgs& a) {
  const Dataset ds = generate_synthetic(a.n, a.seed, a.noise);
  std::size_t satisfied = 0;
  for (std::size_t r = 0; r < ds.rows(); ++r) {
    if (ds.y_u[r] - ds.y_l[r] >= ds.gap[r]) ++satisfied;
  }
  const fs::path out = a.out;
  {
    auto f = open_out(out);
    write_csv(f, ds,
              {"mixlen " + std::string(kVersion) + " generate n=" + std::to_string(a.n) +
               " seed=" + std::to_string(a.seed) + " noise=" + format_double(a.noise)});
    if (!f) throw IoError("failed writing " + out.string());
  }
  const fs::path manifest =
      a.manifest_out.empty() ? out.parent_path() / "manifest.json" : fs::path(a.manifest_out);
  write_json(manifest, ds.manifest.to_json());
  std::cout << "wrote " << ds.rows() << " rows to " << out.string() << " (manifest "
            << manifest.string() << ")\n"
            << "interval-gap constraint satisfied on " << satisfied << "/" << ds.rows()
            << " rows\n";
  return satisfied == ds.rows() ? 0 : kExitCheckFailed;
}

struct TrainArgs {
  std::string data, manifest, config, out;
  std::string ablate = "none";
  std::size_t fold = 0;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs;
  std::uint64_t split_seed = 0;
};

RunConfig resolve_config(const std::string& config_path, std::optional<std::uint64_t> seed,
                         std::optional<std::size_t> epochs) {
  RunConfig cfg = config_path.empty() ? RunConfig{} : load_run_config(config_path);
  if (seed) cfg.set_seed(*seed);
  if (epochs) cfg.train.epochs = *epochs;
  cfg.validate();
  return cfg;
}

int run_train(const TrainArgs& a) {
  RunConfig cfg = resolve_config(a.config, a.seed, a.epochs);
  apply_variant(ablation_variant(a.ablate), cfg.model, cfg.train);
  const Dataset ds = load_training_data(a.data, a.manifest);
  const auto plans = kfold_split(ds.rows(), a.split_seed);
  if (a.fold >= plans.size()) throw ConfigError("fold must be in 0..9");
  const SplitPlan& split = plans[a.fold];

  TrainResult result = train(make_model(cfg.model, ds, split), ds, split, cfg.train);
  Json prov = provenance(cfg, "train");
  prov["ablate"] = a.ablate;
  prov["fold"] = a.fold;
  prov["split_seed"] = a.split_seed;
  result.checkpoint.provenance = prov;

  const fs::path dir = output_dir(a.out);
  ensure_dir(dir);
  save_checkpoint(dir / "checkpoint.json", result.checkpoint);
  {
    auto f = open_out(dir / "history.csv");
    write_history_csv(f, result.history, provenance_lines(prov));
  }
  const auto& first = result.history.empty() ? EpochRecord{} : result.history.front();
  const auto& last = result.history.empty() ? EpochRecord{} : result.history.back();
  std::cout << "trained " << result.history.size() << " epochs on " << split.train.size()
            << " rows; total loss " << num(first.total) << " -> " << num(last.total)
            << "; wrote " << (dir / "checkpoint.json").string() << " and "
            << (dir / "history.csv").string() << '\n';
  return 0;
}

struct EvaluateArgs {
  std::string checkpoint, data, out;
  std::size_t fold = 0;
  std::uint64_t split_seed = 0;
  bool all = false;
};

int run_evaluate(const EvaluateArgs& a) {
  const Checkpoint ckpt = load_checkpoint(a.checkpoint);
  const Model& model = ckpt.model;
  const Dataset ds = preprocess(load_csv(a.data, model.manifest()));
  std::vector<std::size_t> rows;
  if (a.all) {
    rows = all_rows(ds);
  } else {
    const auto plans = kfold_split(ds.rows(), a.split_seed);
    if (a.fold >= plans.size()) throw ConfigError("fold must be in 0..9");
    rows = plans[a.fold].test;
  }
  const Batch batch = make_batch(ds, rows, model.norm(), model.config().trunk.use_mechanism_node);
  const IntervalMetrics m = interval_metrics(model.predict(batch.input), ds, rows);
  std::cout << "evaluated " << rows.size() << " rows\n";
  print_metrics("lower", m.lower);
  print_metrics("upper", m.upper);
  if (!a.out.empty()) {
    write_json(a.out, Json{{"provenance", ckpt.provenance},
                           {"rows", rows.size()},
                           {"lower", metrics_json(m.lower)},
                           {"upper", metrics_json(m.upper)}});
  }
  return 0;
}

struct PredictArgs {
  std::string checkpoint, data, out;
};

int run_predict(const PredictArgs& a) {
  const Checkpoint ckpt = load_checkpoint(a.checkpoint);
  const Model& model = ckpt.model;
  const Dataset ds = load_csv(a.data, model.manifest(), CsvContent::FeaturesOnly);
  for (double v : ds.features) {
    if (std::isnan(v)) throw DataError("prediction input has missing feature cells");
  }
  const auto rows = all_rows(ds);
  ModelInput input;
  {
    const Tensor z = standardize(ds, rows, model.norm());
    for (std::size_t g = 0; g < 4; ++g) {
      const std::size_t begin = ds.manifest.offset(g);
      const std::size_t width = ds.manifest.groups()[g].columns.size();
      Tensor x(Tensor::Shape{rows.size(), width});
      for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t c = 0; c < width; ++c) x.at(i, c) = z.at(i, begin + c);
      }
      input.modalities[g] = std::move(x);
    }
    if (model.config().trunk.use_mechanism_node) {
      input.austin = Tensor::vector(austin_column(ds, rows));
    }
  }
  const Tensor pred = model.predict(input);
  std::ostream* out = &std::cout;
  std::ofstream file;
  if (!a.out.empty()) {
    file = open_out(a.out);
    out = &file;
  }
  for (const auto& line : provenance_lines(ckpt.provenance)) *out << "# " << line << '\n';
  *out << "y_l_hat,y_u_hat\n";
  for (std::size_t i = 0; i < pred.rows(); ++i) {
    *out << format_double(pred.at(i, 0)) << ',' << format_double(pred.at(i, 1)) << '\n';
  }
  if (!*out) throw IoError("failed writing predictions");
  if (!a.out.empty()) std::cout << "wrote " << pred.rows() << " predictions to " << a.out << '\n';
  return 0;
}

struct MechArgs {
  double d = 0.0, len = 0.0, re = 0.0;
  std::optional<double> q_min, t_delay;
};

int run_mech(const MechArgs& a) {
  const mechanism::PipeSpec pipe{a.d, a.len};
  const mechanism::FlowState flow{a.re};
  const double re_j = mechanism::critical_reynolds(pipe);
  const bool turbulent = mechanism::austin_branch(pipe, flow) == mechanism::AustinBranch::Turbulent;
  std::cout << "Re_j = " << num(re_j) << '\n'
            << "branch = " << (turbulent ? "turbulent" : "laminar") << '\n'
            << "y_m = " << num(mechanism::austin_length(pipe, flow)) << " m\n";
  if (a.q_min || a.t_delay) {
    if (!a.q_min || !a.t_delay) throw ConfigError("--qmin and --tdelay go together");
    std::cout << "y_IG = " << num(mechanism::interval_gap({*a.q_min, *a.t_delay})) << " m\n";
  }
  return 0;
}

struct GradcheckArgs {
  std::size_t cases = 1000;
  std::size_t model_cases = 20;
  std::uint64_t seed = 0;
  double tol = 1e-4;
};

int run_gradcheck(const GradcheckArgs& a) {
  const GradientSuiteReport rep = run_gradient_suite(a.cases, a.model_cases, a.seed, a.tol);
  for (const auto& c : rep.cases) {
    if (!c.report.passed) {
      std::cout << "FAIL " << c.label << ": rel " << num(c.report.max_rel_error) << " at "
                << c.report.worst_parameter << "[" << c.report.worst_index
                << "] analytic=" << num(c.report.analytic) << " numeric=" << num(c.report.numeric)
                << '\n';
    }
  }
  std::cout << "gradient suite: " << rep.cases.size() - rep.failures << "/" << rep.cases.size()
            << " cases passed, max relative error " << num(rep.max_rel_error) << " (tol "
            << num(a.tol) << ")\n";
  return rep.passed() ? 0 : kExitCheckFailed;
}

struct BenchmarkArgs {
  std::string data, manifest, config, out;
  std::size_t n = 350;
  double noise = 0.05;
  std::uint64_t data_seed = 0;
  std::size_t seeds = 10;
  std::optional<std::size_t> epochs;
  std::vector<std::string> variants;
  std::uint64_t split_seed = 0;
  unsigned threads = 1;
};

int run_benchmark(const BenchmarkArgs& a) {
  RunConfig cfg = resolve_config(a.config, std::nullopt, a.epochs);
  Dataset ds = a.data.empty() ? preprocess(generate_synthetic(a.n, a.data_seed, a.noise))
                              : load_training_data(a.data, a.manifest);
  ExperimentConfig exp;
  exp.model = cfg.model;
  exp.train = cfg.train;
  exp.split_seed = a.split_seed;
  exp.threads = a.threads;
  exp.seeds.clear();
  for (std::size_t s = 0; s < a.seeds; ++s) exp.seeds.push_back(s);
  if (!a.variants.empty()) {
    exp.variants.clear();
    for (const auto& v : a.variants) exp.variants.push_back(variant_from_name(v));
  }

  EvalReport report = run_experiment(exp, ds);
  Json prov = provenance(cfg, "benchmark");
  prov["seeds"] = a.seeds;
  prov["split_seed"] = a.split_seed;
  if (a.data.empty()) {
    prov["data"] = Json{{"synthetic_n", a.n}, {"noise", a.noise}, {"data_seed", a.data_seed}};
  } else {
    prov["data"] = a.data;
  }
  report.provenance = prov;

  const fs::path dir = output_dir(a.out);
  ensure_dir(dir);
  write_json(dir / "report.json", report.to_json());
  {
    auto f = open_out(dir / "report.csv");
    for (const auto& line : provenance_lines(prov)) f << "# " << line << '\n';
    report.write_csv(f);
  }
  {
    auto f = open_out(dir / "quartiles.csv");
    for (const auto& line : provenance_lines(prov)) f << "# " << line << '\n';
    report.write_quartiles_csv(f);
  }
  for (Variant v : exp.variants) {
    const auto q = report.summary(v, Limit::Lower, "rmse");
    const auto qu = report.summary(v, Limit::Upper, "rmse");
    const auto viol = report.summary(v, Limit::Lower, "violation_rate");
    std::cout << variant_name(v) << ": median rmse lower=" << (q ? num(q->median) : "-")
              << " upper=" << (qu ? num(qu->median) : "-")
              << " violation=" << (viol ? num(viol->median) : "-") << '\n';
  }
  std::cout << "wrote " << (dir / "report.json").string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Contamination-length interval prediction with a physics-enhanced fused network"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "Write a synthetic dataset and its manifest");
  g->add_option("--n", gen.n, "Row count")->check(CLI::PositiveNumber);
  g->add_option("--seed", gen.seed, "Generator seed");
  g->add_option("--noise", gen.noise, "Noise level in [0, 0.5]");
  g->add_option("--out", gen.out, "CSV path")->required();
  g->add_option("--manifest-out", gen.manifest_out, "Manifest path (default: next to the CSV)");

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train one model on a fold rotation");
  t->add_option("--data", tr.data, "Dataset CSV")->required();
  t->add_option("--manifest", tr.manifest, "Manifest JSON (default schema if omitted)");
  t->add_option("--config", tr.config, "Run config JSON");
  t->add_option("--ablate", tr.ablate, "none|no-fusion|no-mechanism|no-physics-loss|plain");
  t->add_option("--fold", tr.fold, "Fold rotation 0..9");
  t->add_option("--seed", tr.seed, "Initialization and dropout seed");
  t->add_option("--epochs", tr.epochs, "Override the epoch count");
  t->add_option("--split-seed", tr.split_seed, "Shuffle seed for the k-fold split");
  t->add_option("--out", tr.out, "Output directory (env MIXLEN_OUTPUT_DIR)");

  EvaluateArgs ev;
  auto* e = app.add_subcommand("evaluate", "Score a checkpoint on a test fold");
  e->add_option("--checkpoint", ev.checkpoint)->required();
  e->add_option("--data", ev.data)->required();
  e->add_option("--fold", ev.fold);
  e->add_option("--split-seed", ev.split_seed);
  e->add_flag("--all", ev.all, "Evaluate on every row instead of a test fold");
  e->add_option("--out", ev.out, "Metrics JSON path");

  PredictArgs pr;
  auto* p = app.add_subcommand("predict", "Predict interval limits for feature rows");
  p->add_option("--checkpoint", pr.checkpoint)->required();
  p->add_option("--data", pr.data)->required();
  p->add_option("--out", pr.out, "CSV path (stdout if omitted)");

  MechArgs me;
  auto* m = app.add_subcommand("mech", "Evaluate the Austin formula and interval gap");
  m->add_option("--d", me.d, "Pipe diameter, m")->required();
  m->add_option("--len", me.len, "Pipe length, m")->required();
  m->add_option("--re", me.re, "Reynolds number")->required();
  m->add_option("--qmin", me.q_min, "Minimum distribution flowrate, m3/h");
  m->add_option("--tdelay", me.t_delay, "Delay duration, min");

  GradcheckArgs gc;
  auto* c = app.add_subcommand("gradcheck", "Finite-difference check of every primitive and the loss");
  c->add_option("--cases", gc.cases, "Randomized primitive cases");
  c->add_option("--model-cases", gc.model_cases, "Randomized full-loss cases");
  c->add_option("--seed", gc.seed);
  c->add_option("--tol", gc.tol, "Relative tolerance");

  BenchmarkArgs bm;
  auto* b = app.add_subcommand("benchmark", "Run every variant over repeated seeds");
  b->add_option("--data", bm.data, "Dataset CSV (synthetic if omitted)");
  b->add_option("--manifest", bm.manifest);
  b->add_option("--config", bm.config);
  b->add_option("--n", bm.n, "Synthetic row count");
  b->add_option("--noise", bm.noise, "Synthetic noise level");
  b->add_option("--data-seed", bm.data_seed, "Synthetic generator seed");
  b->add_option("--seeds", bm.seeds, "Number of seeds (0..n-1)")->check(CLI::PositiveNumber);
  b->add_option("--epochs", bm.epochs);
  b->add_option("--variants", bm.variants, "Subset of variants");
  b->add_option("--split-seed", bm.split_seed);
  b->add_option("--threads", bm.threads);
  b->add_option("--out", bm.out, "Output directory (env MIXLEN_OUTPUT_DIR)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::ParseError& ex) {
    app.exit(ex);
    return kExitInput;
  }

  try {
    if (*g) return run_generate(gen);
    if (*t) return run_train(tr);
    if (*e) return run_evaluate(ev);
    if (*p) return run_predict(pr);
    if (*m) return run_mech(me);
    if (*c) return run_gradcheck(gc);
    if (*b) return run_benchmark(bm);
  } catch (const TrainingError& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return kExitNumerical;
  } catch (const EvaluationError& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return kExitNumerical;
  } catch (const Error& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return kExitInput;
  }
  return kExitInput;
}
