#include "slos/application.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>

#include "slos/rng.hpp"

namespace slos {

double r_squared(const Vector& fitted, const Vector& responses) {
  if (fitted.size() != responses.size())
    throw std::invalid_argument(
        "r_squared: fitted values and responses disagree in length");
  if (responses.size() < 1)
    throw std::invalid_argument("r_squared: empty response vector");
  const double mean = responses.mean();
  const double tss = (responses.array() - mean).square().sum();
  if (tss <= 0.0) return 0.0;
  const double rss = (responses - fitted).squaredNorm();
  return 1.0 - rss / tss;
}

std::vector<std::pair<double, double>> active_regions(const FitResult& fit) {
  std::vector<std::pair<double, double>> out;
  const int M = fit.basis.num_subintervals();
  int j = 0;
  while (j < M) {
    if (!fit.active_mask[j]) {
      ++j;
      continue;
    }
    int end = j;
    while (end + 1 < M && fit.active_mask[end + 1]) ++end;
    out.emplace_back(fit.basis.knot_at(j), fit.basis.knot_at(end + 1));
    j = end + 1;
  }
  return out;
}

namespace {

Vector permuted_responses(const Vector& y, Rng& rng) {
  Vector out = y;
  for (int i = static_cast<int>(out.size()) - 1; i > 0; --i) {
    const int j = static_cast<int>(rng.uniform() * (i + 1));
    std::swap(out[i], out[std::min(j, i)]);
  }
  return out;
}

}  // namespace

PermutationReport permutation_test(const FunctionalDataset& data,
                                   const FitConfig& config_template,
                                   const TuningGrid& grid,
                                   const PermutationConfig& pcfg) {
  if (pcfg.num_permutations < 1)
    throw std::invalid_argument(
        "permutation_test: need at least one permutation");
  const SelectionResult observed =
      grid_search(data, config_template, grid, pcfg.parallel);
  PermutationReport report;
  report.observed_r2 = r_squared(observed.best.fitted, data.responses);
  report.num_permutations = pcfg.num_permutations;
  report.selected_gamma = observed.gamma;
  report.selected_lambda = observed.lambda;

  FitConfig fixed = observed.best.config;
  std::vector<double> r2(pcfg.num_permutations,
                         std::numeric_limits<double>::quiet_NaN());
  std::vector<char> ok(pcfg.num_permutations, 0);

#pragma omp parallel for schedule(dynamic) if (pcfg.parallel)
  for (int b = 0; b < pcfg.num_permutations; ++b) {
    try {
      Rng rng(stream_key(pcfg.seed, b, StreamRole::Permutation));
      FunctionalDataset shuffled = data;
      shuffled.responses = permuted_responses(data.responses, rng);
      double value;
      if (pcfg.reuse_selected_penalties) {
        const FitResult fit = slos::fit(shuffled, fixed);
        value = r_squared(fit.fitted, shuffled.responses);
      } else {
        const SelectionResult sel =
            grid_search(shuffled, config_template, grid, false);
        value = r_squared(sel.best.fitted, shuffled.responses);
      }
      r2[b] = value;
      ok[b] = 1;
    } catch (const std::exception&) {
      ok[b] = 0;
    }
  }

  int exceed = 0;
  for (int b = 0; b < pcfg.num_permutations; ++b) {
    if (!ok[b]) {
      ++report.num_failures;
      continue;
    }
    report.permuted_r2.push_back(r2[b]);
    if (r2[b] >= report.observed_r2) ++exceed;
  }
  if (report.num_failures * 20 > pcfg.num_permutations)
    throw std::runtime_error(
        "permutation_test: more than 5% of permutations failed to fit");
  const int successes = static_cast<int>(report.permuted_r2.size());
  report.p_value = (1.0 + exceed) / (1.0 + successes);
  return report;
}

}  // namespace slos
