#pragma once

#include <utility>
#include <vector>

#include "slos/solver.hpp"

namespace slos {

// Closed intervals of [t_start, t_end] where the true coefficient function is
// known to vanish (simulation only).
struct NullRegionSpec {
  std::vector<std::pair<double, double>> intervals;
};

// Unpenalized fit: gamma = lambda = 0.
FitResult fit_ols(const FunctionalDataset& data, int M, int d);

// Roughness-penalized fit: lambda = 0.
FitResult fit_smooth(const FunctionalDataset& data, int M, int d,
                     double gamma);

// The oracle places an independent clamped basis on each connected component
// of the non-null region (knots proportional to component length) and fits a
// roughness-penalized least squares on the concatenated design; beta_hat is
// exactly zero on the null region by construction.
struct OracleFit {
  std::vector<std::pair<double, double>> components;  // S(beta)
  std::vector<BSplineBasis> bases;
  std::vector<Vector> coefs;
  double mu_hat = 0.0;
  double rss = 0.0;
  Vector fitted;

  double beta_value(double t) const;
  Vector predict(const Matrix& curves, const Vector& grid) const;
};

// num_knots is the total subinterval count distributed across components. An
// empty interval list degenerates to fit_smooth on the full domain.
OracleFit fit_oracle(const FunctionalDataset& data,
                     const NullRegionSpec& null_region, int num_knots, int d,
                     double gamma);

}  // namespace slos
