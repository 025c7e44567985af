#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "slos/baselines.hpp"
#include "slos/rng.hpp"
#include "slos/tuning.hpp"

namespace slos {

// The three simulation cases differ in the shape of the true coefficient
// function: identically zero (I), zero on the middle of the domain only (II),
// and nowhere zero (III).
enum class SimCase { I, II, III };

std::string case_name(SimCase c);
SimCase case_from_string(const std::string& name);

// True coefficient function on [0, 1] for the given case.
double true_beta(SimCase c, double t);

// Intervals on which the true coefficient vanishes: [0,1] for Case I,
// [0.3, 0.7] for Case II, none for Case III.
std::vector<std::pair<double, double>> true_null_region(SimCase c);

// Random covariate curves: linear combinations of a degree-4 spline basis on
// [0, 1] with 70 subintervals (74 basis functions), standard normal
// coefficients drawn curve-by-curve. Rows are curves, columns grid points.
Matrix gen_covariates(int n, const Vector& grid, Rng& rng);

struct ResponseDraw {
  Vector responses;
  double noise_sd = 0.0;
};

// Responses y_i = mu + \int X_i beta + noise_sd * e_i. Case I pins the noise
// standard deviation at 1; otherwise it is sd(signal) / sqrt(snr).
ResponseDraw gen_responses(const Matrix& curves, const Vector& grid,
                           const std::function<double(double)>& beta,
                           double mu, SimCase c, double snr, Rng& rng);

// Trapezoid-rule integrals \int X_i(t) f(t) dt, one entry per curve.
Vector integrate_curves_against(const Matrix& curves, const Vector& grid,
                                const std::function<double(double)>& f);

struct IseMetrics {
  double null_region;    // NaN when the null region is empty
  double active_region;  // NaN when the active region is empty
};

// Length-normalised integrated squared error of beta_hat against beta_true,
// reported separately over the null intervals and their complement in
// [t_start, t_end]. Each interval is integrated with a 2001-point trapezoid
// rule.
IseMetrics integrated_squared_error(
    const std::function<double(double)>& beta_hat,
    const std::function<double(double)>& beta_true,
    const std::vector<std::pair<double, double>>& null_intervals,
    double t_start, double t_end);

// Fraction of points in the null region, stepped at `step`, where beta_hat is
// exactly zero.
double null_proportion(const std::function<double(double)>& beta_hat,
                       const std::vector<std::pair<double, double>>& null_intervals,
                       double step = 0.001);

// Mean squared prediction error of the model (mu_hat, beta_hat) on the given
// curves and responses.
double prediction_mse(double mu_hat,
                      const std::function<double(double)>& beta_hat,
                      const Matrix& curves, const Vector& grid,
                      const Vector& responses);

enum class Method { Slos, Smooth, Ols, Oracle };

std::string method_name(Method m);
Method method_from_string(const std::string& name);

// Fully tuned estimators as used in the simulation study. Basis sizes follow
// m_heuristic(n) with cubic splines except where the tuning grid itself
// varies them.
SelectionResult run_slos(const FunctionalDataset& data, bool parallel = true);
SelectionResult run_smooth_baseline(const FunctionalDataset& data,
                                    bool parallel = true);
FitResult run_ols_baseline(const FunctionalDataset& data);
OracleFit run_oracle_baseline(const FunctionalDataset& data,
                              const NullRegionSpec& null_region);

struct StudyScenario {
  SimCase sim_case = SimCase::II;
  int n = 150;
  int num_replicates = 100;
  std::uint64_t seed = 1;
  double snr = 4.0;
  double mu = 1.0;
  int num_grid_points = 101;
  int test_n = 5000;
};

struct ReplicateRow {
  int replicate = 0;
  bool ok = false;
  double ise_null = 0.0;
  double ise_active = 0.0;
  double null_prop = 0.0;
  double pmse = 0.0;
  std::string error;
};

struct MethodReport {
  Method method = Method::Slos;
  std::vector<ReplicateRow> rows;
};

struct StudyReport {
  StudyScenario scenario;
  std::vector<MethodReport> methods;
};

// Monte Carlo study: per replicate, draw a training set, fit every requested
// method, and score it on a fresh noiseless test set of scenario.test_n
// curves. Replicates whose fit fails are excluded; more than 20% failures for
// any method aborts the study.
StudyReport run_study(const StudyScenario& scenario,
                      const std::vector<Method>& methods, bool parallel = true);

// Metrics reported for a case: ise_null/null_prop only when a null region
// exists, ise_active only when the active region is non-empty, pmse always.
std::vector<std::string> metrics_for_case(SimCase c);
double metric_value(const ReplicateRow& row, const std::string& metric);

struct SummaryStat {
  double mean = 0.0;
  double sd = 0.0;
  int count = 0;
};

SummaryStat summarize(const std::vector<double>& values);

// Replicate-level long format: case,n,method,metric,replicate,value.
std::string study_long_csv(const StudyReport& report);
// Aggregated format: case,n,method,metric,mean,sd,replicates.
std::string study_summary_csv(const StudyReport& report);

}  // namespace slos
