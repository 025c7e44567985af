#pragma once

#include <optional>
#include <string>
#include <vector>

#include "slos/bspline.hpp"

namespace slos {

// Scalar responses paired with covariate curves sampled on a common grid.
struct FunctionalDataset {
  Vector grid;        // K sorted time points within [t_start, t_end]
  Matrix curves;      // n x K samples of X_i
  Vector responses;   // n scalars Y_i
  double t_start = 0.0;
  double t_end = 1.0;
  std::vector<std::string> labels;  // optional sample identifiers

  int n() const { return static_cast<int>(curves.rows()); }
  int k() const { return static_cast<int>(grid.size()); }
};

void validate(const FunctionalDataset& data);

// Declares how CSV columns map to the dataset: every column whose header
// parses as a number is a grid sample; the response (and optional id) column
// are named.
struct CsvLayout {
  std::string response_column;
  std::optional<std::string> id_column;
  // Domain defaults to the grid span when unset.
  std::optional<double> domain_start;
  std::optional<double> domain_end;
};

FunctionalDataset load_csv(const std::string& path, const CsvLayout& layout);

// Decimal serialization with 17 significant digits (round-trips doubles).
std::string format_full(double v);

}  // namespace slos
