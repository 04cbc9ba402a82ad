#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "mixlen/data.hpp"
#include "mixlen/model.hpp"
#include "mixlen/rng.hpp"

namespace mixlen::testing {

struct OracleRow {
  double d, length, re, q_min, t_delay, re_j;
  bool turbulent;
  double y_m, y_ig;
};

inline std::vector<OracleRow> load_mechanism_oracle() {
  std::ifstream in(std::string(MIXLEN_TEST_DATA_DIR) + "/mechanism_oracle.csv");
  std::vector<OracleRow> rows;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back({std::stod(cells[0]), std::stod(cells[1]), std::stod(cells[2]),
                    std::stod(cells[3]), std::stod(cells[4]), std::stod(cells[5]),
                    cells[6] == "turbulent", std::stod(cells[7]), std::stod(cells[8])});
  }
  return rows;
}

inline double rel_error(double a, double b) {
  const double scale = std::max(std::fabs(a), std::fabs(b));
  return scale == 0.0 ? 0.0 : std::fabs(a - b) / scale;
}

inline ModalityManifest toy_manifest() {
  return ModalityManifest({{"hydrothermal", {"h0", "h1", "h2"}},
                           {"pipeline", {"diameter", "length", "reynolds"}},
                           {"product_properties", {"p0", "p1"}},
                           {"initial_condition", {"i0"}}});
}

inline NormStats unit_norm(std::size_t features) {
  NormStats s;
  s.feature_mean.assign(features, 0.0);
  s.feature_std.assign(features, 1.0);
  s.target_mean = {800.0, 850.0};
  s.target_std = {150.0, 150.0};
  s.ym_mean = 800.0;
  s.ym_std = 150.0;
  return s;
}

inline ModelInput random_input(const ModalityManifest& m, std::size_t rows, Rng& rng,
                               bool with_austin = true) {
  ModelInput in;
  for (std::size_t g = 0; g < 4; ++g) {
    Tensor x(Tensor::Shape{rows, m.groups()[g].columns.size()});
    for (double& v : x.values()) v = rng.uniform(-2.0, 2.0);
    in.modalities[g] = std::move(x);
  }
  if (with_austin) {
    Tensor a(Tensor::Shape{rows});
    for (double& v : a.values()) v = rng.uniform(400.0, 1200.0);
    in.austin = std::move(a);
  }
  return in;
}

}  // namespace mixlen::testing
