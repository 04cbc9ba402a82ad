#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mixlen/data.hpp"
#include "mixlen/loss.hpp"
#include "mixlen/model.hpp"
#include "mixlen/optim.hpp"

namespace mixlen {

struct TrainConfig {
  LossWeights loss;
  AdamConfig adam;
  std::size_t epochs = 2000;
  std::uint64_t seed = 0;  // dropout stream
};

// Losses observed during one epoch, before that epoch's update. val_total is
// NaN when the validation split has fewer than two rows.
struct EpochRecord {
  std::size_t epoch = 0;
  double data = 0.0;
  double difference = 0.0;
  double correlation = 0.0;
  double total = 0.0;
  double val_total = 0.0;

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

using LossHistory = std::vector<EpochRecord>;

struct TrainingMetadata {
  std::size_t epochs_run = 0;
  std::optional<EpochRecord> final_epoch;
};

inline constexpr std::string_view kCheckpointFormat = "mixlen-checkpoint";
inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  Model model;
  LossWeights loss;
  TrainingMetadata training;
  Json provenance = Json::object();
};

// Serialized form; see README for field names.
Json checkpoint_to_json(const Checkpoint& ckpt);
// Throws LoadError on a wrong format/version tag, a missing field, or a
// parameter array whose shape disagrees with the config (the message names
// the array).
Checkpoint checkpoint_from_json(const Json& doc);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
// Also maps JSON syntax errors (truncated files) to LoadError.
Checkpoint load_checkpoint(const std::filesystem::path& path);
Checkpoint parse_checkpoint(std::string_view text);

// Model whose normalization is fitted on split.train.
Model make_model(const ModelConfig& config, const Dataset& ds, const SplitPlan& split);

struct TrainResult {
  Checkpoint checkpoint;
  LossHistory history;
};

// Full-batch Adam on split.train for config.epochs rounds; returns the
// final-epoch parameters. Throws TrainingError with the epoch index when a
// loss or gradient goes non-finite.
TrainResult train(Model model, const Dataset& ds, const SplitPlan& split,
                  const TrainConfig& config);

void write_history_csv(std::ostream& out, const LossHistory& history,
                       const std::vector<std::string>& comments = {});

}  // namespace mixlen
