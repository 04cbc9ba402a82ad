#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "mixlen/schema.hpp"
#include "mixlen/tape.hpp"

namespace mixlen {

struct FusionConfig {
  // Hidden width of each modality extractor, in canonical modality order.
  std::array<std::size_t, 4> extractor_widths{12, 8, 10, 5};
  std::size_t fusion_width = 20;
  double dropout_rate = 0.1;

  friend bool operator==(const FusionConfig&, const FusionConfig&) = default;
};

struct TrunkConfig {
  std::vector<std::size_t> hidden_widths{60, 10};
  bool use_mechanism_node = true;

  friend bool operator==(const TrunkConfig&, const TrunkConfig&) = default;
};

inline constexpr std::size_t kOutputWidth = 2;  // (lower, upper)

struct ModelConfig {
  FusionConfig fusion;
  TrunkConfig trunk;
  bool use_fusion = true;
  std::uint64_t seed = 0;

  void validate() const;
  Json to_json() const;
  static ModelConfig from_json(const Json& doc);

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// One batch of standardized features split by modality, plus the raw Austin
// lengths (meters) for the mechanism node.
struct ModelInput {
  std::array<Tensor, 4> modalities;
  std::optional<Tensor> austin;  // shape [N]

  std::size_t rows() const { return modalities[0].rows(); }
};

struct FusionNodes {
  NodeId concatenated;  // V
  NodeId weights;       // softmax(V)
  NodeId weighted;      // V (x) W
  NodeId output;        // weighted, after dropout in train mode
};

// Standardized mechanism input: (y_m - mean) / std as an [N x 1] constant.
NodeId mechanism_node(Tape& tape, const Tensor& austin, const NormStats& norm);

// Extractors -> softmax fusion -> fusion layer -> trunk (+ mechanism node) ->
// 2 standardized outputs, de-normalized to meters with fixed constants.
class Model {
 public:
  Model(ModelConfig config, ModalityManifest manifest, NormStats norm);

  const ModelConfig& config() const { return config_; }
  const ModalityManifest& manifest() const { return manifest_; }
  const NormStats& norm() const { return norm_; }

  // Requires use_fusion. `dropout_rng` is only read in train mode.
  FusionNodes fusion_forward(Tape& tape, const ModelInput& input, Mode mode,
                             Rng* dropout_rng = nullptr) const;

  // [N x 2] predictions in meters. Throws ContractError if the mechanism
  // node is enabled and input.austin is missing.
  NodeId forward(Tape& tape, const ModelInput& input, Mode mode,
                 Rng* dropout_rng = nullptr) const;

  // Eval-mode forward on a private tape.
  Tensor predict(const ModelInput& input) const;

  // All trainable arrays in a fixed order; the correlation head comes last.
  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
  std::size_t parameter_count() const;
  std::size_t extractor_parameter_count() const;
  std::size_t output_input_width() const;

  Parameter& correlation_weight() { return w_c_; }
  Parameter& correlation_bias() { return b_c_; }
  const Parameter& correlation_weight() const { return w_c_; }
  const Parameter& correlation_bias() const { return b_c_; }

  Parameter* find(std::string_view name);

 private:
  struct Layer {
    Parameter weight;
    Parameter bias;
  };

  void validate_input(const ModelInput& input) const;

  ModelConfig config_;
  ModalityManifest manifest_;
  NormStats norm_;
  std::vector<Layer> extractors_;
  Layer fusion_;
  std::vector<Layer> trunk_;
  Layer output_;
  Parameter w_c_;
  Parameter b_c_;
};

}  // namespace mixlen
