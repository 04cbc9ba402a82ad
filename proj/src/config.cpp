#include "mixlen/config.hpp"

#include <fstream>
#include <set>

#include "mixlen/errors.hpp"
#include "mixlen/util.hpp"

namespace mixlen {

namespace {

void reject_unknown(const Json& obj, const std::set<std::string>& known, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [key, _] : obj.items()) {
    if (!known.contains(key)) throw ConfigError("unknown config key " + where + "." + key);
  }
}

template <typename T>
void take(const Json& obj, const char* key, T& into) {
  if (obj.contains(key)) into = obj.at(key).get<T>();
}

}  // namespace

Json RunConfig::to_json() const {
  return Json{{"model",
               {{"extractor_widths", model.fusion.extractor_widths},
                {"fusion_width", model.fusion.fusion_width},
                {"dropout_rate", model.fusion.dropout_rate},
                {"trunk_widths", model.trunk.hidden_widths},
                {"use_fusion", model.use_fusion},
                {"use_mechanism_node", model.trunk.use_mechanism_node}}},
              {"loss", {{"lambda_dc", train.loss.lambda_dc}, {"lambda_cor", train.loss.lambda_cor}}},
              {"optimizer",
               {{"learning_rate", train.adam.learning_rate},
                {"beta1", train.adam.beta1},
                {"beta2", train.adam.beta2},
                {"epsilon", train.adam.epsilon},
                {"epochs", train.epochs}}},
              {"seed", model.seed}};
}

void RunConfig::apply_json(const Json& doc) {
  try {
    reject_unknown(doc, {"model", "loss", "optimizer", "seed"}, "config");
    if (doc.contains("model")) {
      const Json& m = doc.at("model");
      reject_unknown(m,
                     {"extractor_widths", "fusion_width", "dropout_rate", "trunk_widths",
                      "use_fusion", "use_mechanism_node"},
                     "model");
      take(m, "extractor_widths", model.fusion.extractor_widths);
      take(m, "fusion_width", model.fusion.fusion_width);
      take(m, "dropout_rate", model.fusion.dropout_rate);
      take(m, "trunk_widths", model.trunk.hidden_widths);
      take(m, "use_fusion", model.use_fusion);
      take(m, "use_mechanism_node", model.trunk.use_mechanism_node);
    }
    if (doc.contains("loss")) {
      const Json& l = doc.at("loss");
      reject_unknown(l, {"lambda_dc", "lambda_cor"}, "loss");
      take(l, "lambda_dc", train.loss.lambda_dc);
      take(l, "lambda_cor", train.loss.lambda_cor);
    }
    if (doc.contains("optimizer")) {
      const Json& o = doc.at("optimizer");
      reject_unknown(o, {"learning_rate", "beta1", "beta2", "epsilon", "epochs"}, "optimizer");
      take(o, "learning_rate", train.adam.learning_rate);
      take(o, "beta1", train.adam.beta1);
      take(o, "beta2", train.adam.beta2);
      take(o, "epsilon", train.adam.epsilon);
      take(o, "epochs", train.epochs);
    }
    if (doc.contains("seed")) set_seed(doc.at("seed").get<std::uint64_t>());
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
  validate();
}

void RunConfig::set_seed(std::uint64_t seed) {
  model.seed = seed;
  train.seed = seed;
}

void RunConfig::validate() const {
  model.validate();
  train.loss.validate();
  if (!(train.adam.learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (!(train.adam.beta1 >= 0.0 && train.adam.beta1 < 1.0) ||
      !(train.adam.beta2 >= 0.0 && train.adam.beta2 < 1.0)) {
    throw ConfigError("Adam betas must lie in [0, 1)");
  }
  if (!(train.adam.epsilon > 0.0)) throw ConfigError("Adam epsilon must be positive");
}

std::string RunConfig::hash() const { return fnv1a_hex(to_json().dump()); }

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  Json doc;
  try {
    doc = Json::parse(in);
  } catch (const Json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  RunConfig c;
  c.apply_json(doc);
  return c;
}

Json provenance(const RunConfig& config, std::string_view command) {
  return Json{{"tool", "mixlen"},
              {"version", kVersion},
              {"command", command},
              {"seed", config.model.seed},
              {"config_hash", config.hash()}};
}

std::vector<std::string> provenance_lines(const Json& prov) {
  std::vector<std::string> lines;
  std::string line;
  for (const auto& [key, value] : prov.items()) {
    if (!line.empty()) line += ' ';
    line += key + "=" + (value.is_string() ? value.get<std::string>() : value.dump());
  }
  lines.push_back(line);
  return lines;
}

}  // namespace mixlen
