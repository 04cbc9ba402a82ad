#include "mixlen/schema.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "mixlen/errors.hpp"

namespace mixlen {

ModalityManifest::ModalityManifest(std::vector<ModalityGroup> groups) {
  if (groups.size() != kModalityNames.size()) {
    throw SchemaError("manifest needs exactly 4 modalities, got " +
                      std::to_string(groups.size()));
  }
  std::set<std::string> seen;
  for (std::string_view name : kModalityNames) {
    auto it = std::find_if(groups.begin(), groups.end(),
                           [&](const ModalityGroup& g) { return g.name == name; });
    if (it == groups.end()) throw SchemaError("manifest is missing modality " + std::string(name));
    if (it->columns.empty()) throw SchemaError("modality " + it->name + " has no columns");
    offsets_.push_back(columns_.size());
    for (const auto& c : it->columns) {
      if (!seen.insert(c).second) throw SchemaError("duplicate feature column " + c);
      columns_.push_back(c);
    }
    groups_.push_back(std::move(*it));
  }
}

ModalityManifest ModalityManifest::default_schema() {
  return ModalityManifest({
      {"hydrothermal", {"flow_rate", "reynolds", "oil_temperature", "pressure", "mean_viscosity"}},
      {"pipeline", {"diameter", "length", "elevation_diff", "roughness"}},
      {"product_properties", {"density_a", "density_b", "viscosity_a", "viscosity_b"}},
      {"initial_condition", {"initial_mix_length", "upstream_batch_volume", "injection_temp"}},
  });
}

ModalityManifest ModalityManifest::from_json(const Json& doc) {
  if (!doc.is_object()) throw SchemaError("manifest must be a JSON object");
  std::vector<ModalityGroup> groups;
  for (const auto& [name, cols] : doc.items()) {
    if (!cols.is_array()) throw SchemaError("modality " + name + " must list column names");
    ModalityGroup g{name, {}};
    for (const auto& c : cols) {
      if (!c.is_string()) throw SchemaError("modality " + name + " has a non-string column");
      g.columns.push_back(c.get<std::string>());
    }
    groups.push_back(std::move(g));
  }
  return ModalityManifest(std::move(groups));
}

Json ModalityManifest::to_json() const {
  Json doc = Json::object();
  for (const auto& g : groups_) doc[g.name] = g.columns;
  return doc;
}

std::size_t ModalityManifest::offset(std::size_t g) const { return offsets_.at(g); }

std::optional<std::size_t> ModalityManifest::column_index(std::string_view name) const {
  auto it = std::find(columns_.begin(), columns_.end(), name);
  if (it == columns_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - columns_.begin());
}

bool ModalityManifest::has_mechanism_columns() const {
  return column_index(kDiameterColumn) && column_index(kLengthColumn) &&
         column_index(kReynoldsColumn);
}

void NormStats::validate(std::size_t feature_count) const {
  if (feature_mean.size() != feature_count || feature_std.size() != feature_count) {
    throw DataError("normalization stats cover " + std::to_string(feature_std.size()) +
                    " features, expected " + std::to_string(feature_count));
  }
  auto positive = [](double s) { return std::isfinite(s) && s > 0.0; };
  for (std::size_t i = 0; i < feature_count; ++i) {
    if (!positive(feature_std[i]) || !std::isfinite(feature_mean[i])) {
      throw DataError("feature " + std::to_string(i) + " has a degenerate deviation");
    }
  }
  if (!positive(target_std[0]) || !positive(target_std[1]) || !positive(ym_std)) {
    throw DataError("target or mechanism deviation must be positive");
  }
}

Json NormStats::to_json() const {
  return Json{{"feature_mean", feature_mean}, {"feature_std", feature_std},
              {"target_mean", target_mean},   {"target_std", target_std},
              {"ym_mean", ym_mean},           {"ym_std", ym_std}};
}

NormStats NormStats::from_json(const Json& doc) {
  NormStats s;
  s.feature_mean = doc.at("feature_mean").get<std::vector<double>>();
  s.feature_std = doc.at("feature_std").get<std::vector<double>>();
  s.target_mean = doc.at("target_mean").get<std::array<double, 2>>();
  s.target_std = doc.at("target_std").get<std::array<double, 2>>();
  s.ym_mean = doc.at("ym_mean").get<double>();
  s.ym_std = doc.at("ym_std").get<double>();
  return s;
}

}  // namespace mixlen
