#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "mixlen/data.hpp"
#include "mixlen/train.hpp"

namespace mixlen {

// Relative metrics are empty when any true value is zero.
struct MetricSet {
  double rmse = 0.0;
  double mae = 0.0;
  std::optional<double> mape;
  std::optional<double> rmsre;
  double violation_rate = 0.0;

  friend bool operator==(const MetricSet&, const MetricSet&) = default;
};

// Error metrics of pred against truth; violation_rate is left at 0.
// Throws ContractError on empty or misaligned input.
MetricSet metrics(std::span<const double> pred, std::span<const double> truth);

// Fraction of rows with pred_u < pred_l + gap.
double violation_rate(std::span<const double> pred_l, std::span<const double> pred_u,
                      std::span<const double> gap);

struct IntervalMetrics {
  MetricSet lower;
  MetricSet upper;
};

// Metrics for [N x 2] predictions against the dataset rows they were made for.
IntervalMetrics interval_metrics(const Tensor& pred, const Dataset& ds,
                                 std::span<const std::size_t> rows);

enum class Variant { Full, NoModule1, NoModule2, NoModule3, PlainDnn, Knn, AustinOnly };

inline constexpr std::array<Variant, 7> kAllVariants = {
    Variant::Full,     Variant::NoModule1, Variant::NoModule2, Variant::NoModule3,
    Variant::PlainDnn, Variant::Knn,       Variant::AustinOnly};

std::string_view variant_name(Variant v);
// Throws ConfigError for unknown names.
Variant variant_from_name(std::string_view name);
bool variant_is_trained(Variant v);

// Switches off the modules a trained variant removes.
void apply_variant(Variant v, ModelConfig& model, TrainConfig& train);

// Unweighted mean of the k nearest training targets by Euclidean distance;
// ties resolve to the lower training index. Throws ContractError when
// k == 0 or k exceeds the training size.
Tensor knn_baseline(const Tensor& train_x, const Tensor& train_y, const Tensor& test_x,
                    std::size_t k = 5);

struct ExperimentConfig {
  ModelConfig model;
  TrainConfig train;
  std::vector<Variant> variants{kAllVariants.begin(), kAllVariants.end()};
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  std::uint64_t split_seed = 0;
  std::size_t knn_k = 5;
  unsigned threads = 1;
  bool keep_histories = false;
};

struct CellResult {
  Variant variant = Variant::Full;
  std::uint64_t seed = 0;
  std::size_t rotation = 0;
  IntervalMetrics metrics;
  std::optional<EpochRecord> final_epoch;
  LossHistory history;  // only with keep_histories
};

enum class Limit { Lower, Upper };

struct Quartiles {
  double min = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double max = 0.0;
};

// Linear-interpolation quartiles. Throws ContractError on empty input.
Quartiles quartiles(std::vector<double> values);

inline constexpr std::array<std::string_view, 5> kMetricNames = {"rmse", "mae", "mape", "rmsre",
                                                                 "violation_rate"};

std::optional<double> metric_value(const MetricSet& m, std::string_view metric);

struct EvalReport {
  std::vector<CellResult> cells;
  Json provenance = Json::object();

  std::vector<const CellResult*> cells_for(Variant v) const;
  // Empty when the metric is undefined for any seed of this variant.
  std::optional<Quartiles> summary(Variant v, Limit limit, std::string_view metric) const;

  Json to_json() const;
  // Flat rows: variant,limit,seed,metric,value.
  void write_csv(std::ostream& out) const;
  // Box-plot rows: variant,limit,metric,min,q1,median,q3,max.
  void write_quartiles_csv(std::ostream& out) const;
};

// Trains/evaluates every (variant, seed) cell. Seed s uses fold rotation
// s mod 10 of kfold_split(n, split_seed) and seeds both initialization and
// dropout. Cells run on up to `threads` workers; results are placed by cell
// index, so the report does not depend on scheduling.
EvalReport run_experiment(const ExperimentConfig& config, const Dataset& ds);

}  // namespace mixlen
