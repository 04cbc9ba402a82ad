#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "mixlen/model.hpp"
#include "mixlen/schema.hpp"

namespace mixlen {

inline constexpr std::string_view kLowerColumn = "y_l";
inline constexpr std::string_view kUpperColumn = "y_u";
inline constexpr std::string_view kFlowColumn = "q_min";
inline constexpr std::string_view kDelayColumn = "t_delay";

// Feature rows in manifest column order plus per-row targets and the
// operating-plan columns that define the interval gap. Missing cells are NaN
// until preprocess() removes them.
struct Dataset {
  ModalityManifest manifest = ModalityManifest::default_schema();
  std::vector<double> features;  // row-major, rows() x cols()
  std::vector<double> y_l;
  std::vector<double> y_u;
  std::vector<double> q_min;
  std::vector<double> t_delay;
  std::vector<double> gap;

  std::size_t rows() const { return y_l.size(); }
  std::size_t cols() const { return manifest.feature_count(); }
  double feature(std::size_t r, std::size_t c) const { return features[r * cols() + c]; }

  // Copy of the given rows, in the given order.
  Dataset subset(std::span<const std::size_t> rows) const;
};

enum class CsvContent { WithTargets, FeaturesOnly };

// Header must contain every manifest column, and with WithTargets also
// y_l, y_u, q_min, t_delay. Lines starting with '#' are skipped. Empty cells
// load as NaN. Throws SchemaError naming a missing column and ParseError with
// the 1-based file line for unparseable cells.
Dataset read_csv(std::istream& in, const ModalityManifest& manifest,
                 CsvContent content = CsvContent::WithTargets);
Dataset load_csv(const std::filesystem::path& path, const ModalityManifest& manifest,
                 CsvContent content = CsvContent::WithTargets);

// Full-precision CSV; `comments` become leading "# " lines.
void write_csv(std::ostream& out, const Dataset& ds, const std::vector<std::string>& comments = {});

ModalityManifest load_manifest(const std::filesystem::path& path);

struct PreprocessReport {
  std::size_t missing = 0;
  std::size_t outliers = 0;
  std::size_t inverted = 0;  // y_u < y_l or negative gap
};

inline constexpr double kOutlierZ = 4.0;

// Drops rows with missing cells, then inverted intervals, then rows whose
// |z| > 4 on any feature (z against the surviving rows). Throws DataError if
// nothing survives.
Dataset preprocess(const Dataset& ds, PreprocessReport* report = nullptr);

struct SplitPlan {
  std::size_t rotation = 0;
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;
};

inline constexpr std::size_t kFolds = 10;

// Ten rotations over a seeded shuffle: rotation r tests on fold r and
// validates on fold r+1 (mod 10). Throws ContractError for n < 10.
std::vector<SplitPlan> kfold_split(std::size_t n, std::uint64_t seed);

// Synthetic rows over the default schema whose ground truth is driven by
// the Austin formula. Every row satisfies y_u - y_l >= gap.
// Throws DomainError for n == 0 or noise outside [0, 0.5].
Dataset generate_synthetic(std::size_t n, std::uint64_t seed, double noise_level);

// Deterministic part of the synthetic lower limit: y_base * (1 + alpha * s).
// Exposed so tests can regenerate ground truth independently of sampling.
inline constexpr double kSyntheticAlpha = 0.25;
double synthetic_mixing(const Dataset& ds, std::size_t row);

// Population mean/std over `rows`. Throws DataError naming a constant column.
NormStats fit_norm_stats(const Dataset& ds, std::span<const std::size_t> rows);

// [rows x cols] z-scores using `stats`.
Tensor standardize(const Dataset& ds, std::span<const std::size_t> rows, const NormStats& stats);

// Austin length per row. Throws SchemaError if the manifest lacks the
// diameter/length/reynolds columns.
std::vector<double> austin_column(const Dataset& ds, std::span<const std::size_t> rows);

struct Batch {
  ModelInput input;
  Tensor target;  // [N x 2] meters
  Tensor gap;     // [N]
};

Batch make_batch(const Dataset& ds, std::span<const std::size_t> rows, const NormStats& stats,
                 bool with_austin);

std::vector<std::size_t> all_rows(const Dataset& ds);

}  // namespace mixlen
