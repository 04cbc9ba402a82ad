#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "mixlen/model.hpp"
#include "mixlen/train.hpp"

namespace mixlen {

// Training settings shared by `train`, `benchmark` and the acceptance suite.
// Built-in defaults are the published hyperparameters; a JSON document
// overrides them, and CLI flags override the document.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;

  Json to_json() const;
  // Overrides only the keys present in `doc`. Unknown keys are rejected with
  // ConfigError so typos do not silently fall back to defaults.
  void apply_json(const Json& doc);
  void set_seed(std::uint64_t seed);
  void validate() const;

  // Digest of the canonical JSON form.
  std::string hash() const;
};

RunConfig load_run_config(const std::filesystem::path& path);

// Provenance block stamped on every output file.
Json provenance(const RunConfig& config, std::string_view command);
std::vector<std::string> provenance_lines(const Json& prov);

}  // namespace mixlen
