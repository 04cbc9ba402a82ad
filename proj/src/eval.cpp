#include "mixlen/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <ostream>
#include <thread>

#include "mixlen/errors.hpp"
#include "mixlen/util.hpp"

namespace mixlen {

MetricSet metrics(std::span<const double> pred, std::span<const double> truth) {
  if (pred.empty() || pred.size() != truth.size()) {
    throw ContractError("metrics need equal, non-empty prediction and truth lengths");
  }
  const double n = static_cast<double>(pred.size());
  double se = 0.0, ae = 0.0, ape = 0.0, spe = 0.0;
  bool relative = true;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double e = pred[i] - truth[i];
    se += e * e;
    ae += std::fabs(e);
    if (truth[i] == 0.0) {
      relative = false;
    } else {
      const double r = e / truth[i];
      ape += std::fabs(r);
      spe += r * r;
    }
  }
  MetricSet m;
  m.rmse = std::sqrt(se / n);
  m.mae = ae / n;
  if (relative) {
    m.mape = ape / n;
    m.rmsre = std::sqrt(spe / n);
  }
  // Power-mean inequality; slack covers rounding when all errors are equal.
  auto ordered = [](double quadratic, double linear) {
    return quadratic >= linear * (1.0 - 1e-12);
  };
  if (!ordered(m.rmse, m.mae) || (relative && !ordered(*m.rmsre, *m.mape))) {
    throw EvaluationError("metric identity violated (rmse < mae or rmsre < mape)");
  }
  return m;
}

double violation_rate(std::span<const double> pred_l, std::span<const double> pred_u,
                      std::span<const double> gap) {
  if (pred_l.empty() || pred_l.size() != pred_u.size() || pred_l.size() != gap.size()) {
    throw ContractError("violation_rate needs aligned, non-empty inputs");
  }
  std::size_t bad = 0;
  for (std::size_t i = 0; i < pred_l.size(); ++i) {
    if (pred_u[i] < pred_l[i] + gap[i]) ++bad;
  }
  return static_cast<double>(bad) / static_cast<double>(pred_l.size());
}

IntervalMetrics interval_metrics(const Tensor& pred, const Dataset& ds,
                                 std::span<const std::size_t> rows) {
  if (pred.rank() != 2 || pred.cols() != 2 || pred.rows() != rows.size()) {
    throw ShapeError("interval predictions " + pred.shape_string() + " for " +
                     std::to_string(rows.size()) + " rows");
  }
  std::vector<double> pl, pu, tl, tu, gap;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    pl.push_back(pred.at(i, 0));
    pu.push_back(pred.at(i, 1));
    tl.push_back(ds.y_l[rows[i]]);
    tu.push_back(ds.y_u[rows[i]]);
    gap.push_back(ds.gap[rows[i]]);
  }
  IntervalMetrics out{metrics(pl, tl), metrics(pu, tu)};
  const double v = violation_rate(pl, pu, gap);
  out.lower.violation_rate = v;
  out.upper.violation_rate = v;
  return out;
}

std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::Full: return "full";
    case Variant::NoModule1: return "no_module1";
    case Variant::NoModule2: return "no_module2";
    case Variant::NoModule3: return "no_module3";
    case Variant::PlainDnn: return "plain_dnn";
    case Variant::Knn: return "knn";
    case Variant::AustinOnly: return "austin_only";
  }
  return "?";
}

Variant variant_from_name(std::string_view name) {
  for (Variant v : kAllVariants) {
    if (variant_name(v) == name) return v;
  }
  throw ConfigError("unknown variant " + std::string(name));
}

bool variant_is_trained(Variant v) { return v != Variant::Knn && v != Variant::AustinOnly; }

void apply_variant(Variant v, ModelConfig& model, TrainConfig& train) {
  const bool drop_fusion = v == Variant::NoModule1 || v == Variant::PlainDnn;
  const bool drop_mechanism = v == Variant::NoModule2 || v == Variant::PlainDnn;
  const bool drop_physics = v == Variant::NoModule3 || v == Variant::PlainDnn;
  if (drop_fusion) model.use_fusion = false;
  if (drop_mechanism) model.trunk.use_mechanism_node = false;
  if (drop_physics) train.loss = LossWeights{0.0, 0.0};
}

Tensor knn_baseline(const Tensor& train_x, const Tensor& train_y, const Tensor& test_x,
                    std::size_t k) {
  const std::size_t n = train_x.rows();
  if (k == 0 || k > n) {
    throw ContractError("knn needs 1 <= k <= " + std::to_string(n) + ", got " + std::to_string(k));
  }
  if (train_y.rows() != n || train_x.cols() != test_x.cols()) {
    throw ShapeError("knn: inconsistent train/test shapes");
  }
  const std::size_t f = train_x.cols(), outs = train_y.cols();
  Tensor pred(Tensor::Shape{test_x.rows(), outs});
  std::vector<std::pair<double, std::size_t>> dist(n);
  for (std::size_t q = 0; q < test_x.rows(); ++q) {
    for (std::size_t i = 0; i < n; ++i) {
      double d = 0.0;
      for (std::size_t c = 0; c < f; ++c) {
        const double diff = test_x.at(q, c) - train_x.at(i, c);
        d += diff * diff;
      }
      dist[i] = {d, i};
    }
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
    for (std::size_t o = 0; o < outs; ++o) {
      double total = 0.0;
      for (std::size_t j = 0; j < k; ++j) total += train_y.at(dist[j].second, o);
      pred.at(q, o) = total / static_cast<double>(k);
    }
  }
  return pred;
}

Quartiles quartiles(std::vector<double> values) {
  if (values.empty()) throw ContractError("quartiles of nothing");
  std::sort(values.begin(), values.end());
  auto at = [&](double p) {
    const double pos = p * static_cast<double>(values.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
  };
  return Quartiles{values.front(), at(0.25), at(0.5), at(0.75), values.back()};
}

std::optional<double> metric_value(const MetricSet& m, std::string_view metric) {
  if (metric == "rmse") return m.rmse;
  if (metric == "mae") return m.mae;
  if (metric == "mape") return m.mape;
  if (metric == "rmsre") return m.rmsre;
  if (metric == "violation_rate") return m.violation_rate;
  throw ContractError("unknown metric " + std::string(metric));
}

// ---------------------------------------------------------------------------
// Report

namespace {

const MetricSet& pick(const CellResult& c, Limit limit) {
  return limit == Limit::Lower ? c.metrics.lower : c.metrics.upper;
}

constexpr std::array<std::pair<Limit, std::string_view>, 2> kLimits = {
    {{Limit::Lower, "lower"}, {Limit::Upper, "upper"}}};

Json metric_json(const MetricSet& m) {
  Json j = Json::object();
  for (std::string_view name : kMetricNames) {
    const auto v = metric_value(m, name);
    j[std::string(name)] = v ? Json(*v) : Json(nullptr);
  }
  return j;
}

std::vector<Variant> variants_in(const EvalReport& r) {
  std::vector<Variant> out;
  for (const auto& c : r.cells) {
    if (std::find(out.begin(), out.end(), c.variant) == out.end()) out.push_back(c.variant);
  }
  return out;
}

}  // namespace

std::vector<const CellResult*> EvalReport::cells_for(Variant v) const {
  std::vector<const CellResult*> out;
  for (const auto& c : cells) {
    if (c.variant == v) out.push_back(&c);
  }
  return out;
}

std::optional<Quartiles> EvalReport::summary(Variant v, Limit limit,
                                             std::string_view metric) const {
  std::vector<double> values;
  for (const CellResult* c : cells_for(v)) {
    const auto value = metric_value(pick(*c, limit), metric);
    if (!value) return std::nullopt;
    values.push_back(*value);
  }
  if (values.empty()) return std::nullopt;
  return quartiles(std::move(values));
}

Json EvalReport::to_json() const {
  Json variants = Json::object();
  Json summary_doc = Json::object();
  for (Variant v : variants_in(*this)) {
    const std::string name(variant_name(v));
    Json per_limit = Json::object();
    Json per_limit_summary = Json::object();
    for (const auto& [limit, limit_name] : kLimits) {
      Json runs = Json::array();
      for (const CellResult* c : cells_for(v)) {
        Json run = metric_json(pick(*c, limit));
        run["seed"] = c->seed;
        run["rotation"] = c->rotation;
        runs.push_back(std::move(run));
      }
      per_limit[std::string(limit_name)] = std::move(runs);
      Json metric_summary = Json::object();
      for (std::string_view metric : kMetricNames) {
        const auto q = summary(v, limit, metric);
        metric_summary[std::string(metric)] =
            q ? Json{{"min", q->min}, {"q1", q->q1}, {"median", q->median}, {"q3", q->q3},
                     {"max", q->max}}
              : Json(nullptr);
      }
      per_limit_summary[std::string(limit_name)] = std::move(metric_summary);
    }
    variants[name] = std::move(per_limit);
    summary_doc[name] = std::move(per_limit_summary);
  }
  return Json{{"provenance", provenance}, {"variants", std::move(variants)},
              {"summary", std::move(summary_doc)}};
}

void EvalReport::write_csv(std::ostream& out) const {
  out << "variant,limit,seed,metric,value\n";
  for (const auto& c : cells) {
    for (const auto& [limit, limit_name] : kLimits) {
      for (std::string_view metric : kMetricNames) {
        const auto v = metric_value(pick(c, limit), metric);
        out << variant_name(c.variant) << ',' << limit_name << ',' << c.seed << ',' << metric
            << ',' << (v ? format_double(*v) : std::string()) << '\n';
      }
    }
  }
}

void EvalReport::write_quartiles_csv(std::ostream& out) const {
  out << "variant,limit,metric,min,q1,median,q3,max\n";
  for (Variant v : variants_in(*this)) {
    for (const auto& [limit, limit_name] : kLimits) {
      for (std::string_view metric : kMetricNames) {
        const auto q = summary(v, limit, metric);
        if (!q) continue;
        out << variant_name(v) << ',' << limit_name << ',' << metric << ','
            << format_double(q->min) << ',' << format_double(q->q1) << ','
            << format_double(q->median) << ',' << format_double(q->q3) << ','
            << format_double(q->max) << '\n';
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Experiment driver

namespace {

CellResult run_cell(const ExperimentConfig& config, const Dataset& ds, const SplitPlan& split,
                    Variant variant, std::uint64_t seed) {
  CellResult cell;
  cell.variant = variant;
  cell.seed = seed;
  cell.rotation = split.rotation;

  if (variant == Variant::AustinOnly) {
    const auto ym = austin_column(ds, split.test);
    Tensor pred(Tensor::Shape{split.test.size(), 2});
    for (std::size_t i = 0; i < split.test.size(); ++i) {
      pred.at(i, 0) = ym[i];
      pred.at(i, 1) = ym[i] + ds.gap[split.test[i]];
    }
    cell.metrics = interval_metrics(pred, ds, split.test);
    return cell;
  }

  if (variant == Variant::Knn) {
    const NormStats stats = fit_norm_stats(ds, split.train);
    Tensor train_y(Tensor::Shape{split.train.size(), 2});
    for (std::size_t i = 0; i < split.train.size(); ++i) {
      train_y.at(i, 0) = ds.y_l[split.train[i]];
      train_y.at(i, 1) = ds.y_u[split.train[i]];
    }
    const Tensor pred = knn_baseline(standardize(ds, split.train, stats), train_y,
                                     standardize(ds, split.test, stats), config.knn_k);
    cell.metrics = interval_metrics(pred, ds, split.test);
    return cell;
  }

  ModelConfig model_config = config.model;
  TrainConfig train_config = config.train;
  model_config.seed = seed;
  train_config.seed = seed;
  apply_variant(variant, model_config, train_config);

  TrainResult result =
      train(make_model(model_config, ds, split), ds, split, train_config);
  const Model& model = result.checkpoint.model;
  const Batch test = make_batch(ds, split.test, model.norm(), model_config.trunk.use_mechanism_node);
  cell.metrics = interval_metrics(model.predict(test.input), ds, split.test);
  cell.final_epoch = result.checkpoint.training.final_epoch;
  if (config.keep_histories) cell.history = std::move(result.history);
  return cell;
}

}  // namespace

EvalReport run_experiment(const ExperimentConfig& config, const Dataset& ds) {
  if (config.seeds.empty()) throw ConfigError("experiment needs at least one seed");
  const auto plans = kfold_split(ds.rows(), config.split_seed);

  struct Job {
    Variant variant;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (Variant v : config.variants) {
    for (std::uint64_t s : config.seeds) jobs.push_back({v, s});
  }

  EvalReport report;
  report.cells.resize(jobs.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      try {
        const SplitPlan& split = plans[jobs[i].seed % kFolds];
        report.cells[i] = run_cell(config, ds, split, jobs[i].variant, jobs[i].seed);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = jobs.size();
      }
    }
  };

  const unsigned threads =
      std::max(1u, std::min<unsigned>(config.threads, static_cast<unsigned>(jobs.size())));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
  return report;
}

}  // namespace mixlen
