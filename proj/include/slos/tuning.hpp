#pragma once

#include <string>
#include <vector>

#include "slos/solver.hpp"

namespace slos {

enum class Criterion { BIC, AIC, GCV, CV };

// Degrees of freedom for a SCAD-penalized fit can be counted two ways:
//  - LqaHat: trace of U (U^T U + n gamma V + n W)^-1 U^T over live columns,
//    the hat matrix of the final reweighted solve. This is the df the
//    information criteria and the residual variance use. Groups that survive
//    in SCAD's flat region carry W = 0, so for them the LQA term vanishes.
//  - RefitTrace: the same trace without the LQA term, i.e. the df of the
//    selected model refit on its live columns. Diagnostic alternative; it
//    charges partially shrunk groups as if they were refit unpenalized. The
//    two coincide at lambda = 0.
enum class DfMode { LqaHat, RefitTrace };

struct TuningGrid {
  std::vector<double> gamma_values;   // sorted ascending
  std::vector<double> lambda_values;  // sorted ascending
  // When true, lambda_values are multiples of s_hat, the largest subinterval
  // norm of the initial smooth fit at lambda_anchor_gamma; lambda's effective
  // scale tracks beta's magnitude.
  bool lambdas_relative = true;
  double lambda_anchor_gamma = 1e-8;
  Criterion criterion = Criterion::BIC;
  int cv_folds = 5;
  DfMode df_mode = DfMode::LqaHat;
};

// Default grids: gamma 10^-8..10^-1 (8 points), lambda 10^-4..10^0 x s_hat
// (10 points).
TuningGrid default_grid();

std::vector<double> logspace(double log10_lo, double log10_hi, int count);

// M = max(50, nearest integer to 20 n^(1/4)).
int m_heuristic(int n);

// s_hat: max subinterval norm of the roughness-only fit at the given gamma.
double initial_scale(const FunctionalDataset& data, const FitConfig& config,
                     double gamma);

double degrees_of_freedom(const FitResult& fit, const FunctionalDataset& data,
                          DfMode mode = DfMode::LqaHat);

// BIC = n log(RSS/n) + log(n) df; AIC = n log(RSS/n) + 2 df;
// GCV = (RSS/n)/(1 - df/n)^2; CV = pooled held-out MSE over cv_folds
// order-stratified folds with refitting. RSS is floored at 1e-12 var(y) n;
// df >= n disqualifies (+infinity).
double score(const FitResult& fit, const FunctionalDataset& data,
             Criterion criterion, int cv_folds = 5,
             DfMode df_mode = DfMode::LqaHat);

struct ScoreRow {
  double gamma = 0.0;
  double lambda = 0.0;
  double score = 0.0;
  double df = 0.0;
  bool converged = false;
};

struct SelectionResult {
  FitResult best;
  double gamma = 0.0;
  double lambda = 0.0;
  double lambda_scale = 1.0;  // s_hat used to form absolute lambdas
  std::vector<ScoreRow> table;
};

// Fits every (gamma, lambda) pair (concurrently; rows keyed by grid index)
// and returns the minimizer. Scores within 1e-9 relative of the minimum are
// ties, broken toward larger lambda then larger gamma. Throws when no
// configuration converges.
SelectionResult grid_search(const FunctionalDataset& data,
                            const FitConfig& config_template,
                            const TuningGrid& grid, bool parallel = true);

std::string score_table_csv(const std::vector<ScoreRow>& table);

}  // namespace slos
