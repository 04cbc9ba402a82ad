#include "mixlen/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>

#include "mixlen/errors.hpp"
#include "mixlen/mechanism.hpp"
#include "mixlen/rng.hpp"
#include "mixlen/util.hpp"

namespace mixlen {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double parse_cell(const std::string& raw, const std::string& column, std::size_t line) {
  const std::string cell = trim(raw);
  if (cell.empty()) return kNaN;
  double v = 0.0;
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  if (*begin == '+') ++begin;
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end) {
    throw ParseError("cannot parse '" + cell + "' in column " + column, line);
  }
  return v;
}

double gap_or_nan(double q, double t) {
  if (std::isnan(q) || std::isnan(t)) return kNaN;
  return mechanism::interval_gap({q, t});
}

bool row_complete(const Dataset& ds, std::size_t r) {
  for (std::size_t c = 0; c < ds.cols(); ++c) {
    if (std::isnan(ds.feature(r, c))) return false;
  }
  return !std::isnan(ds.y_l[r]) && !std::isnan(ds.y_u[r]) && !std::isnan(ds.q_min[r]) &&
         !std::isnan(ds.t_delay[r]);
}

}  // namespace

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  Dataset out;
  out.manifest = manifest;
  const std::size_t f = cols();
  out.features.reserve(rows.size() * f);
  for (std::size_t r : rows) {
    out.features.insert(out.features.end(), features.begin() + r * f,
                        features.begin() + (r + 1) * f);
    out.y_l.push_back(y_l[r]);
    out.y_u.push_back(y_u[r]);
    out.q_min.push_back(q_min[r]);
    out.t_delay.push_back(t_delay[r]);
    out.gap.push_back(gap[r]);
  }
  return out;
}

std::vector<std::size_t> all_rows(const Dataset& ds) {
  std::vector<std::size_t> idx(ds.rows());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return idx;
}

// ---------------------------------------------------------------------------
// CSV

Dataset read_csv(std::istream& in, const ModalityManifest& manifest, CsvContent content) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    for (auto& h : split_line(line)) header.push_back(trim(h));
    break;
  }
  if (header.empty()) throw SchemaError("CSV has no header row");

  auto locate = [&](std::string_view name) -> std::size_t {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw SchemaError("missing column " + std::string(name));
    return static_cast<std::size_t>(it - header.begin());
  };
  std::vector<std::size_t> feature_at;
  for (const auto& c : manifest.feature_columns()) feature_at.push_back(locate(c));
  const bool targets = content == CsvContent::WithTargets;
  std::array<std::size_t, 4> extra_at{};
  if (targets) {
    extra_at = {locate(kLowerColumn), locate(kUpperColumn), locate(kFlowColumn),
                locate(kDelayColumn)};
  }

  Dataset ds;
  ds.manifest = manifest;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty() || line[0] == '#') continue;
    const auto cells = split_line(line);
    if (cells.size() != header.size()) {
      throw ParseError("expected " + std::to_string(header.size()) + " cells, got " +
                           std::to_string(cells.size()),
                       line_no);
    }
    for (std::size_t i = 0; i < feature_at.size(); ++i) {
      ds.features.push_back(parse_cell(cells[feature_at[i]], header[feature_at[i]], line_no));
    }
    if (targets) {
      std::array<double, 4> v{};
      for (std::size_t i = 0; i < 4; ++i) {
        v[i] = parse_cell(cells[extra_at[i]], header[extra_at[i]], line_no);
      }
      if ((!std::isnan(v[2]) && v[2] < 0.0) || (!std::isnan(v[3]) && v[3] < 0.0)) {
        throw ParseError("q_min and t_delay must be non-negative", line_no);
      }
      ds.y_l.push_back(v[0]);
      ds.y_u.push_back(v[1]);
      ds.q_min.push_back(v[2]);
      ds.t_delay.push_back(v[3]);
      ds.gap.push_back(gap_or_nan(v[2], v[3]));
    } else {
      ds.y_l.push_back(kNaN);
      ds.y_u.push_back(kNaN);
      ds.q_min.push_back(kNaN);
      ds.t_delay.push_back(kNaN);
      ds.gap.push_back(kNaN);
    }
  }
  return ds;
}

Dataset load_csv(const std::filesystem::path& path, const ModalityManifest& manifest,
                 CsvContent content) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return read_csv(in, manifest, content);
}

void write_csv(std::ostream& out, const Dataset& ds, const std::vector<std::string>& comments) {
  for (const auto& c : comments) out << "# " << c << '\n';
  for (const auto& c : ds.manifest.feature_columns()) out << c << ',';
  out << kLowerColumn << ',' << kUpperColumn << ',' << kFlowColumn << ',' << kDelayColumn << '\n';
  for (std::size_t r = 0; r < ds.rows(); ++r) {
    for (std::size_t c = 0; c < ds.cols(); ++c) out << format_double(ds.feature(r, c)) << ',';
    out << format_double(ds.y_l[r]) << ',' << format_double(ds.y_u[r]) << ','
        << format_double(ds.q_min[r]) << ',' << format_double(ds.t_delay[r]) << '\n';
  }
}

ModalityManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  Json doc;
  try {
    doc = Json::parse(in);
  } catch (const Json::exception& e) {
    throw SchemaError("manifest " + path.string() + ": " + e.what());
  }
  return ModalityManifest::from_json(doc);
}

// ---------------------------------------------------------------------------
// Preprocessing

Dataset preprocess(const Dataset& ds, PreprocessReport* report) {
  PreprocessReport rep;
  std::vector<std::size_t> keep;
  for (std::size_t r = 0; r < ds.rows(); ++r) {
    if (!row_complete(ds, r)) {
      ++rep.missing;
    } else if (ds.y_u[r] < ds.y_l[r] || ds.gap[r] < 0.0) {
      ++rep.inverted;
    } else {
      keep.push_back(r);
    }
  }

  const std::size_t f = ds.cols();
  std::vector<double> mean(f, 0.0), sd(f, 0.0);
  for (std::size_t c = 0; c < f && !keep.empty(); ++c) {
    for (std::size_t r : keep) mean[c] += ds.feature(r, c);
    mean[c] /= static_cast<double>(keep.size());
    for (std::size_t r : keep) sd[c] += std::pow(ds.feature(r, c) - mean[c], 2);
    sd[c] = std::sqrt(sd[c] / static_cast<double>(keep.size()));
  }
  std::vector<std::size_t> survivors;
  for (std::size_t r : keep) {
    bool outlier = false;
    for (std::size_t c = 0; c < f && !outlier; ++c) {
      if (sd[c] > 0.0 && std::fabs(ds.feature(r, c) - mean[c]) / sd[c] > kOutlierZ) outlier = true;
    }
    if (outlier) {
      ++rep.outliers;
    } else {
      survivors.push_back(r);
    }
  }
  if (report) *report = rep;
  if (survivors.empty()) throw DataError("preprocessing dropped every row");
  return ds.subset(survivors);
}

// ---------------------------------------------------------------------------
// Splitting

std::vector<SplitPlan> kfold_split(std::size_t n, std::uint64_t seed) {
  if (n < kFolds) {
    throw ContractError("k-fold split needs at least 10 rows, got " + std::to_string(n));
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng.engine());

  std::vector<std::vector<std::size_t>> folds(kFolds);
  std::size_t pos = 0;
  for (std::size_t k = 0; k < kFolds; ++k) {
    const std::size_t size = n / kFolds + (k < n % kFolds ? 1 : 0);
    folds[k].assign(order.begin() + pos, order.begin() + pos + size);
    pos += size;
  }

  std::vector<SplitPlan> plans;
  for (std::size_t r = 0; r < kFolds; ++r) {
    SplitPlan p;
    p.rotation = r;
    p.test = folds[r];
    p.validation = folds[(r + 1) % kFolds];
    for (std::size_t k = 0; k < kFolds; ++k) {
      if (k != r && k != (r + 1) % kFolds) {
        p.train.insert(p.train.end(), folds[k].begin(), folds[k].end());
      }
    }
    plans.push_back(std::move(p));
  }
  return plans;
}

// ---------------------------------------------------------------------------
// Synthetic generator

namespace {

struct FeatureRange {
  double lo;
  double hi;
  bool log_scale = false;
};

// Sampling ranges, in default-schema column order.
constexpr std::array<FeatureRange, 16> kRanges = {{
    {300.0, 2000.0},       // flow_rate, m3/h
    {5e3, 5e5, true},      // reynolds
    {5.0, 35.0},           // oil_temperature, C
    {2.0, 10.0},           // pressure, MPa
    {0.8, 8.0},            // mean_viscosity, cSt
    {0.2, 0.6},            // diameter, m
    {1e4, 2e5},            // length, m
    {-200.0, 400.0},       // elevation_diff, m
    {0.02, 0.2},           // roughness, mm
    {720.0, 760.0},        // density_a, kg/m3
    {820.0, 860.0},        // density_b, kg/m3
    {0.6, 1.2},            // viscosity_a, cSt
    {2.5, 7.0},            // viscosity_b, cSt
    {20.0, 200.0},         // initial_mix_length, m
    {5000.0, 60000.0},     // upstream_batch_volume, m3
    {5.0, 35.0},           // injection_temp, C
}};

// Maps a column value onto [-1, 1] across its sampling range.
double centered(double v, double lo, double hi) { return 2.0 * (v - lo) / (hi - lo) - 1.0; }

std::size_t col(const Dataset& ds, std::string_view name) {
  auto idx = ds.manifest.column_index(name);
  if (!idx) throw SchemaError("missing column " + std::string(name));
  return *idx;
}

}  // namespace

double synthetic_mixing(const Dataset& ds, std::size_t row) {
  auto c = [&](std::string_view name, std::size_t range) {
    return centered(ds.feature(row, col(ds, name)), kRanges[range].lo, kRanges[range].hi);
  };
  const double density_gap =
      centered(ds.feature(row, col(ds, "density_b")) - ds.feature(row, col(ds, "density_a")), 60.0,
               140.0);
  const double z = 0.8 * c("oil_temperature", 2) + 0.6 * c("mean_viscosity", 4) * density_gap +
                   0.7 * c("initial_mix_length", 13) +
                   0.5 * std::sin(std::numbers::pi * c("elevation_diff", 7)) -
                   0.4 * c("pressure", 3) +
                   0.3 * c("upstream_batch_volume", 14) * c("injection_temp", 15);
  return std::tanh(z);
}

Dataset generate_synthetic(std::size_t n, std::uint64_t seed, double noise_level) {
  if (n == 0) throw DomainError("synthetic dataset needs at least one row");
  if (!(noise_level >= 0.0 && noise_level <= 0.5)) {
    throw DomainError("noise level must lie in [0, 0.5], got " + std::to_string(noise_level));
  }
  Dataset ds;
  ds.manifest = ModalityManifest::default_schema();
  const std::size_t f = ds.cols();
  const std::size_t d_col = col(ds, kDiameterColumn);
  const std::size_t l_col = col(ds, kLengthColumn);
  const std::size_t re_col = col(ds, kReynoldsColumn);
  const std::size_t q_col = col(ds, "flow_rate");
  const std::size_t v_col = col(ds, "upstream_batch_volume");
  Rng rng(seed);

  ds.features.reserve(n * f);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < f; ++c) {
      const FeatureRange& range = kRanges[c];
      ds.features.push_back(range.log_scale
                                ? std::exp(rng.uniform(std::log(range.lo), std::log(range.hi)))
                                : rng.uniform(range.lo, range.hi));
    }
    const double flow = ds.feature(r, q_col);
    const double volume = ds.feature(r, v_col);
    const double q_min = flow * rng.uniform(0.58, 0.62);
    const double t_delay =
        (30.0 + 10.0 * centered(volume, kRanges[14].lo, kRanges[14].hi)) * rng.uniform(0.95, 1.05);
    const double q_actual = q_min * rng.uniform(1.1, 1.5);
    const double eps1 = std::clamp(rng.normal(), -1.4, 1.4);
    const double eps2 = rng.normal();

    const double y_base = mechanism::austin_length(
        {ds.feature(r, d_col), ds.feature(r, l_col)}, {ds.feature(r, re_col)});
    const double lower =
        y_base * (1.0 + kSyntheticAlpha * synthetic_mixing(ds, r) + noise_level * eps1);
    const double upper = lower + q_actual * t_delay / 600.0 * (1.0 + std::fabs(noise_level * eps2));

    ds.y_l.push_back(lower);
    ds.y_u.push_back(upper);
    ds.q_min.push_back(q_min);
    ds.t_delay.push_back(t_delay);
    ds.gap.push_back(mechanism::interval_gap({q_min, t_delay}));
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Standardization

NormStats fit_norm_stats(const Dataset& ds, std::span<const std::size_t> rows) {
  if (rows.empty()) throw DataError("cannot fit normalization on zero rows");
  const double n = static_cast<double>(rows.size());
  auto moments = [&](auto value, const std::string& name) {
    double mean = 0.0;
    for (std::size_t r : rows) mean += value(r);
    mean /= n;
    double var = 0.0;
    for (std::size_t r : rows) var += (value(r) - mean) * (value(r) - mean);
    const double sd = std::sqrt(var / n);
    if (!(sd > 0.0) || !std::isfinite(sd)) {
      throw DataError("column " + name + " is constant on the training rows");
    }
    return std::pair{mean, sd};
  };

  NormStats s;
  const auto& names = ds.manifest.feature_columns();
  for (std::size_t c = 0; c < ds.cols(); ++c) {
    auto [m, sd] = moments([&](std::size_t r) { return ds.feature(r, c); }, names[c]);
    s.feature_mean.push_back(m);
    s.feature_std.push_back(sd);
  }
  std::tie(s.target_mean[0], s.target_std[0]) =
      moments([&](std::size_t r) { return ds.y_l[r]; }, std::string(kLowerColumn));
  std::tie(s.target_mean[1], s.target_std[1]) =
      moments([&](std::size_t r) { return ds.y_u[r]; }, std::string(kUpperColumn));
  if (ds.manifest.has_mechanism_columns()) {
    const auto ym = austin_column(ds, rows);
    double mean = std::accumulate(ym.begin(), ym.end(), 0.0) / n;
    double var = 0.0;
    for (double v : ym) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / n);
    if (!(sd > 0.0)) throw DataError("Austin length is constant on the training rows");
    s.ym_mean = mean;
    s.ym_std = sd;
  }
  return s;
}

Tensor standardize(const Dataset& ds, std::span<const std::size_t> rows, const NormStats& stats) {
  stats.validate(ds.cols());
  const std::size_t f = ds.cols();
  Tensor z(Tensor::Shape{rows.size(), f});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t c = 0; c < f; ++c) {
      z.at(i, c) = (ds.feature(rows[i], c) - stats.feature_mean[c]) / stats.feature_std[c];
    }
  }
  return z;
}

std::vector<double> austin_column(const Dataset& ds, std::span<const std::size_t> rows) {
  if (!ds.manifest.has_mechanism_columns()) {
    throw SchemaError("manifest lacks diameter/length/reynolds columns for the Austin formula");
  }
  const std::size_t d = col(ds, kDiameterColumn);
  const std::size_t l = col(ds, kLengthColumn);
  const std::size_t re = col(ds, kReynoldsColumn);
  std::vector<double> out;
  out.reserve(rows.size());
  for (std::size_t r : rows) {
    out.push_back(mechanism::austin_length({ds.feature(r, d), ds.feature(r, l)},
                                           {ds.feature(r, re)}));
  }
  return out;
}

Batch make_batch(const Dataset& ds, std::span<const std::size_t> rows, const NormStats& stats,
                 bool with_austin) {
  const Tensor z = standardize(ds, rows, stats);
  const std::size_t n = rows.size();
  Batch b;
  for (std::size_t g = 0; g < kModalityNames.size(); ++g) {
    const std::size_t begin = ds.manifest.offset(g);
    const std::size_t width = ds.manifest.groups()[g].columns.size();
    Tensor x(Tensor::Shape{n, width});
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t c = 0; c < width; ++c) x.at(i, c) = z.at(i, begin + c);
    }
    b.input.modalities[g] = std::move(x);
  }
  if (with_austin) b.input.austin = Tensor::vector(austin_column(ds, rows));
  b.target = Tensor(Tensor::Shape{n, 2});
  b.gap = Tensor(Tensor::Shape{n});
  for (std::size_t i = 0; i < n; ++i) {
    b.target.at(i, 0) = ds.y_l[rows[i]];
    b.target.at(i, 1) = ds.y_u[rows[i]];
    b.gap[i] = ds.gap[rows[i]];
  }
  return b;
}

}  // namespace mixlen
