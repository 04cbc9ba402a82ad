#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace mixlen {

using Json = nlohmann::ordered_json;

inline constexpr std::array<std::string_view, 4> kModalityNames = {
    "hydrothermal", "pipeline", "product_properties", "initial_condition"};

// Columns the Austin formula reads when the mechanism node is enabled.
inline constexpr std::string_view kDiameterColumn = "diameter";
inline constexpr std::string_view kLengthColumn = "length";
inline constexpr std::string_view kReynoldsColumn = "reynolds";

struct ModalityGroup {
  std::string name;
  std::vector<std::string> columns;
};

// Ordered grouping of feature columns into the four modalities. Feature
// order is the concatenation of the groups in canonical modality order.
class ModalityManifest {
 public:
  // Throws SchemaError unless there are exactly the four canonical groups,
  // each non-empty, with column names unique across groups. Groups are
  // reordered into canonical order.
  explicit ModalityManifest(std::vector<ModalityGroup> groups);

  // The 16-column synthetic schema produced by generate_synthetic.
  static ModalityManifest default_schema();

  static ModalityManifest from_json(const Json& doc);
  Json to_json() const;

  const std::vector<ModalityGroup>& groups() const { return groups_; }
  const std::vector<std::string>& feature_columns() const { return columns_; }
  std::size_t feature_count() const { return columns_.size(); }
  // First feature index of group g.
  std::size_t offset(std::size_t g) const;
  std::optional<std::size_t> column_index(std::string_view name) const;
  bool has_mechanism_columns() const;

  friend bool operator==(const ModalityManifest& a, const ModalityManifest& b) {
    return a.columns_ == b.columns_ && a.offsets_ == b.offsets_;
  }

 private:
  std::vector<ModalityGroup> groups_;
  std::vector<std::string> columns_;
  std::vector<std::size_t> offsets_;
};

// Standardization constants, fitted on training rows only.
struct NormStats {
  std::vector<double> feature_mean;
  std::vector<double> feature_std;
  std::array<double, 2> target_mean{0.0, 0.0};
  std::array<double, 2> target_std{1.0, 1.0};
  double ym_mean = 0.0;
  double ym_std = 1.0;

  // Throws DataError on non-positive or non-finite deviations.
  void validate(std::size_t feature_count) const;

  Json to_json() const;
  static NormStats from_json(const Json& doc);

  friend bool operator==(const NormStats&, const NormStats&) = default;
};

}  // namespace mixlen
