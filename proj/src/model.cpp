#include "mixlen/model.hpp"

#include <cmath>
#include <numeric>

#include "mixlen/errors.hpp"

namespace mixlen {

void ModelConfig::validate() const {
  for (std::size_t w : fusion.extractor_widths) {
    if (w < 1) throw ConfigError("extractor widths must be >= 1");
  }
  if (fusion.fusion_width < 1) throw ConfigError("fusion width must be >= 1");
  if (!(fusion.dropout_rate >= 0.0 && fusion.dropout_rate < 1.0)) {
    throw ConfigError("dropout rate must lie in [0, 1)");
  }
  for (std::size_t w : trunk.hidden_widths) {
    if (w < 1) throw ConfigError("trunk widths must be >= 1");
  }
}

Json ModelConfig::to_json() const {
  return Json{{"extractor_widths", fusion.extractor_widths},
              {"fusion_width", fusion.fusion_width},
              {"dropout_rate", fusion.dropout_rate},
              {"trunk_widths", trunk.hidden_widths},
              {"use_mechanism_node", trunk.use_mechanism_node},
              {"use_fusion", use_fusion},
              {"seed", seed}};
}

ModelConfig ModelConfig::from_json(const Json& doc) {
  ModelConfig c;
  c.fusion.extractor_widths = doc.at("extractor_widths").get<std::array<std::size_t, 4>>();
  c.fusion.fusion_width = doc.at("fusion_width").get<std::size_t>();
  c.fusion.dropout_rate = doc.at("dropout_rate").get<double>();
  c.trunk.hidden_widths = doc.at("trunk_widths").get<std::vector<std::size_t>>();
  c.trunk.use_mechanism_node = doc.at("use_mechanism_node").get<bool>();
  c.use_fusion = doc.at("use_fusion").get<bool>();
  c.seed = doc.at("seed").get<std::uint64_t>();
  return c;
}

NodeId mechanism_node(Tape& tape, const Tensor& austin, const NormStats& norm) {
  if (!(norm.ym_std > 0.0)) throw DataError("mechanism deviation must be positive");
  const std::size_t n = austin.size();
  Tensor z(Tensor::Shape{n, 1});
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(austin[i])) throw DomainError("non-finite Austin length");
    z[i] = (austin[i] - norm.ym_mean) / norm.ym_std;
  }
  return tape.constant(std::move(z));
}

namespace {

// Uniform(-bound, bound) weights with bound = sqrt(gain / fan_in); zero bias.
void init_layer(Parameter& w, Parameter& b, std::size_t out, std::size_t in, double gain,
                Rng& rng) {
  const double bound = std::sqrt(gain / static_cast<double>(in));
  w.value = Tensor(Tensor::Shape{out, in});
  for (double& v : w.value.values()) v = rng.uniform(-bound, bound);
  b.value = Tensor(Tensor::Shape{out}, 0.0);
}

constexpr double kReluGain = 6.0;
constexpr double kLinearGain = 3.0;
constexpr double kMechanismWeight = 1.0;

}  // namespace

Model::Model(ModelConfig config, ModalityManifest manifest, NormStats norm)
    : config_(std::move(config)), manifest_(std::move(manifest)), norm_(std::move(norm)) {
  config_.validate();
  norm_.validate(manifest_.feature_count());
  Rng rng(derive_seed(config_.seed, 0));

  std::size_t rep_width = 0;
  if (config_.use_fusion) {
    for (std::size_t g = 0; g < kModalityNames.size(); ++g) {
      const std::string prefix = "extractor." + std::string(kModalityNames[g]);
      Layer l{{prefix + ".weight", {}}, {prefix + ".bias", {}}};
      const std::size_t width = config_.fusion.extractor_widths[g];
      init_layer(l.weight, l.bias, width, manifest_.groups()[g].columns.size(), kReluGain,
                 rng);
      extractors_.push_back(std::move(l));
      rep_width += width;
    }
  } else {
    rep_width = manifest_.feature_count();
  }

  fusion_ = Layer{{"fusion.weight", {}}, {"fusion.bias", {}}};
  init_layer(fusion_.weight, fusion_.bias, config_.fusion.fusion_width, rep_width, kReluGain, rng);

  std::size_t width = config_.fusion.fusion_width;
  for (std::size_t i = 0; i < config_.trunk.hidden_widths.size(); ++i) {
    const std::string prefix = "trunk." + std::to_string(i);
    Layer l{{prefix + ".weight", {}}, {prefix + ".bias", {}}};
    init_layer(l.weight, l.bias, config_.trunk.hidden_widths[i], width, kReluGain, rng);
    width = config_.trunk.hidden_widths[i];
    trunk_.push_back(std::move(l));
  }

  output_ = Layer{{"output.weight", {}}, {"output.bias", {}}};
  init_layer(output_.weight, output_.bias, kOutputWidth,
             width + (config_.trunk.use_mechanism_node ? 1 : 0), kLinearGain, rng);

  // Both limits start from the same row; the mechanism column starts at unit weight.
  const std::size_t out_in = output_.weight.value.cols();
  for (std::size_t c = 0; c < out_in; ++c) {
    output_.weight.value.at(1, c) = output_.weight.value.at(0, c);
  }
  if (config_.trunk.use_mechanism_node) {
    output_.weight.value.at(0, out_in - 1) = kMechanismWeight;
    output_.weight.value.at(1, out_in - 1) = kMechanismWeight;
  }

  w_c_ = Parameter{"correlation.w_c", Tensor(Tensor::Shape{1, 1}, 1.0)};
  b_c_ = Parameter{"correlation.b_c", Tensor(Tensor::Shape{1}, 0.0)};
}

void Model::validate_input(const ModelInput& input) const {
  const std::size_t n = input.rows();
  for (std::size_t g = 0; g < kModalityNames.size(); ++g) {
    const Tensor& x = input.modalities[g];
    const std::size_t want = manifest_.groups()[g].columns.size();
    if (x.rank() != 2 || x.cols() != want || x.rows() != n) {
      throw ShapeError("modality " + std::string(kModalityNames[g]) + " expects [" +
                       std::to_string(n) + "x" + std::to_string(want) + "], got " +
                       x.shape_string());
    }
  }
  if (config_.trunk.use_mechanism_node) {
    if (!input.austin) throw ContractError("mechanism node enabled but no Austin lengths given");
    if (input.austin->size() != n) {
      throw ShapeError("Austin lengths " + input.austin->shape_string() + " for " +
                       std::to_string(n) + " rows");
    }
  }
}

FusionNodes Model::fusion_forward(Tape& tape, const ModelInput& input, Mode mode,
                                  Rng* dropout_rng) const {
  if (!config_.use_fusion) throw ContractError("fusion_forward on a model without fusion");
  validate_input(input);
  std::vector<NodeId> hidden;
  for (std::size_t g = 0; g < extractors_.size(); ++g) {
    const NodeId x = tape.constant(input.modalities[g]);
    const NodeId h = tape.affine(x, tape.parameter(extractors_[g].weight),
                                 tape.parameter(extractors_[g].bias));
    hidden.push_back(tape.relu(h));
  }
  FusionNodes f{};
  f.concatenated = tape.concat(hidden);
  f.weights = tape.softmax(f.concatenated);
  f.weighted = tape.mul(f.concatenated, f.weights);
  f.output = f.weighted;
  if (mode == Mode::Train && config_.fusion.dropout_rate > 0.0) {
    if (dropout_rng == nullptr) throw ContractError("train mode needs a dropout rng");
    f.output = tape.dropout(
        f.weighted, dropout_mask(*dropout_rng, tape.value(f.weighted).shape(),
                                 config_.fusion.dropout_rate));
  }
  return f;
}

NodeId Model::forward(Tape& tape, const ModelInput& input, Mode mode, Rng* dropout_rng) const {
  validate_input(input);
  NodeId rep;
  if (config_.use_fusion) {
    rep = fusion_forward(tape, input, mode, dropout_rng).output;
  } else {
    std::vector<NodeId> parts;
    for (const Tensor& x : input.modalities) parts.push_back(tape.constant(x));
    rep = tape.concat(parts);
  }

  auto dense = [&](NodeId x, const Layer& l) {
    return tape.relu(tape.affine(x, tape.parameter(l.weight), tape.parameter(l.bias)));
  };
  NodeId h = dense(rep, fusion_);
  for (const Layer& l : trunk_) h = dense(h, l);
  if (config_.trunk.use_mechanism_node) {
    h = tape.concat({h, mechanism_node(tape, *input.austin, norm_)});
  }
  const NodeId z =
      tape.affine(h, tape.parameter(output_.weight), tape.parameter(output_.bias));

  // Fixed de-normalization into meters.
  const std::size_t n = input.rows();
  Tensor scale(Tensor::Shape{n, kOutputWidth});
  Tensor offset(Tensor::Shape{n, kOutputWidth});
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < kOutputWidth; ++c) {
      scale.at(r, c) = norm_.target_std[c];
      offset.at(r, c) = norm_.target_mean[c];
    }
  }
  return tape.add(tape.mul(z, tape.constant(std::move(scale))), tape.constant(std::move(offset)));
}

Tensor Model::predict(const ModelInput& input) const {
  Tape tape;
  return tape.value(forward(tape, input, Mode::Eval));
}

std::vector<Parameter*> Model::parameters() {
  std::vector<Parameter*> out;
  for (Layer& l : extractors_) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
  out.push_back(&fusion_.weight);
  out.push_back(&fusion_.bias);
  for (Layer& l : trunk_) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
  out.push_back(&output_.weight);
  out.push_back(&output_.bias);
  out.push_back(&w_c_);
  out.push_back(&b_c_);
  return out;
}

std::vector<const Parameter*> Model::parameters() const {
  auto mutable_params = const_cast<Model*>(this)->parameters();
  return {mutable_params.begin(), mutable_params.end()};
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const Parameter* p : parameters()) n += p->value.size();
  return n;
}

std::size_t Model::extractor_parameter_count() const {
  std::size_t n = 0;
  for (const Layer& l : extractors_) n += l.weight.value.size() + l.bias.value.size();
  return n;
}

std::size_t Model::output_input_width() const { return output_.weight.value.cols(); }

Parameter* Model::find(std::string_view name) {
  for (Parameter* p : parameters()) {
    if (p->name == name) return p;
  }
  return nullptr;
}

}  // namespace mixlen
