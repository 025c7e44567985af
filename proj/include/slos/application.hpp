#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "slos/tuning.hpp"

namespace slos {

// Coefficient of determination 1 - RSS/TSS with TSS about the response mean.
// A constant response (TSS == 0) yields 0.
double r_squared(const Vector& fitted, const Vector& responses);

// Maximal intervals on which the fitted coefficient function is not
// identically zero, read off the subinterval activity mask.
std::vector<std::pair<double, double>> active_regions(const FitResult& fit);

struct PermutationConfig {
  int num_permutations = 200;
  std::uint64_t seed = 1;
  // When set, permuted fits reuse the penalties selected on the observed
  // data instead of re-running the full grid search per permutation.
  bool reuse_selected_penalties = false;
  bool parallel = true;
};

struct PermutationReport {
  double observed_r2 = 0.0;
  std::vector<double> permuted_r2;  // successful permutations only
  int num_permutations = 0;         // requested
  int num_failures = 0;
  double p_value = 1.0;
  double selected_gamma = 0.0;
  double selected_lambda = 0.0;
};

// Permutation test of no association: refit under response permutations and
// compare R^2 values. p = (1 + #{permuted >= observed}) / (1 + #successful).
// More than 5% failed permutations aborts the test.
PermutationReport permutation_test(const FunctionalDataset& data,
                                   const FitConfig& config_template,
                                   const TuningGrid& grid,
                                   const PermutationConfig& pcfg);

}  // namespace slos
