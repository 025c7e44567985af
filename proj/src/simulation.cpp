#include "slos/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <stdexcept>

namespace slos {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

// Connected components of [t0, t1] minus the given intervals.
std::vector<std::pair<double, double>> complement_intervals(
    std::vector<std::pair<double, double>> intervals, double t0, double t1) {
  std::sort(intervals.begin(), intervals.end());
  std::vector<std::pair<double, double>> out;
  const double tiny = 1e-12 * (t1 - t0);
  double cursor = t0;
  for (const auto& [a, b] : intervals) {
    const double lo = std::max(a, t0);
    const double hi = std::min(b, t1);
    if (lo > cursor + tiny) out.emplace_back(cursor, lo);
    cursor = std::max(cursor, hi);
  }
  if (t1 > cursor + tiny) out.emplace_back(cursor, t1);
  return out;
}

// Mean of f^2 over a union of intervals, each integrated with a 2001-point
// trapezoid rule and the total normalised by the union's length.
double region_mean_square(const std::function<double(double)>& f,
                          const std::vector<std::pair<double, double>>& intervals) {
  if (intervals.empty()) return kNan;
  double integral = 0.0;
  double length = 0.0;
  for (const auto& [a, b] : intervals) {
    const int pts = 2001;
    const double h = (b - a) / (pts - 1);
    double acc = 0.0;
    for (int k = 0; k < pts; ++k) {
      const double t = (k == pts - 1) ? b : a + k * h;
      const double v = f(t);
      acc += (k == 0 || k == pts - 1 ? 0.5 : 1.0) * v * v;
    }
    integral += acc * h;
    length += b - a;
  }
  return integral / length;
}

FunctionalDataset subset_rows(const FunctionalDataset& data,
                              const std::vector<int>& idx) {
  FunctionalDataset out;
  out.grid = data.grid;
  out.t_start = data.t_start;
  out.t_end = data.t_end;
  out.curves.resize(static_cast<int>(idx.size()), data.curves.cols());
  out.responses.resize(static_cast<int>(idx.size()));
  for (std::size_t r = 0; r < idx.size(); ++r) {
    out.curves.row(static_cast<int>(r)) = data.curves.row(idx[r]);
    out.responses[static_cast<int>(r)] = data.responses[idx[r]];
  }
  return out;
}

}  // namespace

std::string case_name(SimCase c) {
  switch (c) {
    case SimCase::I: return "I";
    case SimCase::II: return "II";
    case SimCase::III: return "III";
  }
  throw std::invalid_argument("case_name: unknown simulation case");
}

SimCase case_from_string(const std::string& name) {
  if (name == "I" || name == "1") return SimCase::I;
  if (name == "II" || name == "2") return SimCase::II;
  if (name == "III" || name == "3") return SimCase::III;
  throw std::invalid_argument("unknown simulation case '" + name +
                              "' (expected I, II, or III)");
}

double true_beta(SimCase c, double t) {
  constexpr double pi = std::numbers::pi;
  switch (c) {
    case SimCase::I:
      return 0.0;
    case SimCase::II:
      if (t <= 0.3) return 2.0 * (1.0 - t) * std::sin(2.0 * pi * (t + 0.2));
      if (t < 0.7) return 0.0;
      return 2.0 * t * std::sin(2.0 * pi * (t - 0.2));
    case SimCase::III:
      return 4.0 * t * t * t + 2.0 * std::sin(4.0 * pi * t + 0.2);
  }
  throw std::invalid_argument("true_beta: unknown simulation case");
}

std::vector<std::pair<double, double>> true_null_region(SimCase c) {
  switch (c) {
    case SimCase::I: return {{0.0, 1.0}};
    case SimCase::II: return {{0.3, 0.7}};
    case SimCase::III: return {};
  }
  throw std::invalid_argument("true_null_region: unknown simulation case");
}

Matrix gen_covariates(int n, const Vector& grid, Rng& rng) {
  if (n < 1) throw std::invalid_argument("gen_covariates: need at least one curve");
  if (grid.size() < 2)
    throw std::invalid_argument("gen_covariates: need at least two grid points");
  const BSplineBasis basis(0.0, 1.0, 70, 4);
  const Matrix B = basis.eval_matrix(grid);  // grid points x 74 functions
  Matrix coef(n, basis.size());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < basis.size(); ++j) coef(i, j) = rng.normal();
  return coef * B.transpose();
}

ResponseDraw gen_responses(const Matrix& curves, const Vector& grid,
                           const std::function<double(double)>& beta,
                           double mu, SimCase c, double snr, Rng& rng) {
  const Vector signal = integrate_curves_against(curves, grid, beta);
  const int n = static_cast<int>(signal.size());
  double sigma = 1.0;  // Case I has no signal to scale against
  if (c != SimCase::I) {
    if (snr <= 0.0)
      throw std::invalid_argument("gen_responses: snr must be positive");
    if (n < 2)
      throw std::invalid_argument(
          "gen_responses: need at least two curves to scale the noise");
    const double mean = signal.mean();
    const double var = (signal.array() - mean).square().sum() / (n - 1);
    if (var <= 0.0)
      throw std::invalid_argument(
          "gen_responses: signal variance is zero, cannot set the noise level");
    sigma = std::sqrt(var / snr);
  }
  ResponseDraw out;
  out.noise_sd = sigma;
  out.responses.resize(n);
  for (int i = 0; i < n; ++i)
    out.responses[i] = mu + signal[i] + sigma * rng.normal();
  return out;
}

Vector integrate_curves_against(const Matrix& curves, const Vector& grid,
                                const std::function<double(double)>& f) {
  if (curves.cols() != grid.size())
    throw std::invalid_argument(
        "integrate_curves_against: curves and grid disagree on the number of points");
  const Vector w = trapezoid_weights(grid);
  Vector fw(grid.size());
  for (int k = 0; k < grid.size(); ++k) fw[k] = f(grid[k]) * w[k];
  return curves * fw;
}

IseMetrics integrated_squared_error(
    const std::function<double(double)>& beta_hat,
    const std::function<double(double)>& beta_true,
    const std::vector<std::pair<double, double>>& null_intervals,
    double t_start, double t_end) {
  if (!(t_end > t_start))
    throw std::invalid_argument("integrated_squared_error: empty domain");
  std::vector<std::pair<double, double>> nulls;
  for (const auto& [a, b] : null_intervals) {
    const double lo = std::max(a, t_start);
    const double hi = std::min(b, t_end);
    if (hi > lo) nulls.emplace_back(lo, hi);
  }
  const auto active = complement_intervals(nulls, t_start, t_end);
  if (nulls.empty() && active.empty())
    throw std::invalid_argument(
        "integrated_squared_error: both regions are empty");
  const auto diff = [&](double t) { return beta_hat(t) - beta_true(t); };
  return {region_mean_square(diff, nulls), region_mean_square(diff, active)};
}

double null_proportion(
    const std::function<double(double)>& beta_hat,
    const std::vector<std::pair<double, double>>& null_intervals, double step) {
  if (null_intervals.empty())
    throw std::invalid_argument("null_proportion: the null region is empty");
  if (step <= 0.0)
    throw std::invalid_argument("null_proportion: step must be positive");
  long zeros = 0;
  long total = 0;
  for (const auto& [a, b] : null_intervals) {
    if (b < a)
      throw std::invalid_argument("null_proportion: malformed interval");
    const long count = static_cast<long>(std::floor((b - a) / step + 1e-9)) + 1;
    for (long k = 0; k < count; ++k) {
      const double t = a + static_cast<double>(k) * step;
      ++total;
      if (beta_hat(t) == 0.0) ++zeros;
    }
  }
  return static_cast<double>(zeros) / static_cast<double>(total);
}

double prediction_mse(double mu_hat,
                      const std::function<double(double)>& beta_hat,
                      const Matrix& curves, const Vector& grid,
                      const Vector& responses) {
  if (curves.rows() != responses.size())
    throw std::invalid_argument(
        "prediction_mse: curves and responses disagree on the sample count");
  const Vector pred =
      (integrate_curves_against(curves, grid, beta_hat).array() + mu_hat)
          .matrix();
  return (pred - responses).squaredNorm() /
         static_cast<double>(responses.size());
}

std::string method_name(Method m) {
  switch (m) {
    case Method::Slos: return "slos";
    case Method::Smooth: return "smooth";
    case Method::Ols: return "ols";
    case Method::Oracle: return "oracle";
  }
  throw std::invalid_argument("method_name: unknown method");
}

Method method_from_string(const std::string& name) {
  if (name == "slos") return Method::Slos;
  if (name == "smooth") return Method::Smooth;
  if (name == "ols") return Method::Ols;
  if (name == "oracle") return Method::Oracle;
  throw std::invalid_argument("unknown method '" + name +
                              "' (expected slos, smooth, ols, or oracle)");
}

SelectionResult run_slos(const FunctionalDataset& data, bool parallel) {
  FitConfig cfg;
  cfg.num_subintervals = static_cast<int>(m_heuristic(data.n()));
  cfg.degree = 3;
  TuningGrid grid;
  grid.gamma_values = {1e-9, 1e-8};
  grid.lambda_values = logspace(-4.0, 0.0, 19);
  grid.lambdas_relative = true;
  grid.lambda_anchor_gamma = 1e-8;
  grid.criterion = Criterion::BIC;
  return grid_search(data, cfg, grid, parallel);
}

SelectionResult run_smooth_baseline(const FunctionalDataset& data,
                                    bool parallel) {
  FitConfig cfg;
  cfg.num_subintervals = static_cast<int>(m_heuristic(data.n()));
  cfg.degree = 3;
  TuningGrid grid;
  grid.gamma_values = logspace(-8.0, -1.0, 8);
  grid.lambda_values = {0.0};
  grid.lambdas_relative = false;
  grid.criterion = Criterion::AIC;
  return grid_search(data, cfg, grid, parallel);
}

FitResult run_ols_baseline(const FunctionalDataset& data) {
  validate(data);
  const int degrees[] = {2, 3, 4, 5};
  const int sizes[] = {5, 10, 15, 20, 25, 30};
  std::optional<FitResult> best;
  double best_score = std::numeric_limits<double>::infinity();
  for (int d : degrees) {
    for (int M : sizes) {
      if (data.n() < M + d) continue;
      try {
        FitResult f = fit_ols(data, M, d);
        const double s = score(f, data, Criterion::AIC);
        if (s < best_score) {
          best_score = s;
          best = std::move(f);
        }
      } catch (const std::exception&) {
        // a singular configuration simply drops out of the competition
      }
    }
  }
  if (!best)
    throw std::runtime_error(
        "run_ols_baseline: no basis configuration could be fitted");
  return *best;
}

OracleFit run_oracle_baseline(const FunctionalDataset& data,
                              const NullRegionSpec& null_region) {
  validate(data);
  const int n = data.n();
  const int folds = 5;
  if (n < folds)
    throw std::invalid_argument(
        "run_oracle_baseline: need at least 5 samples for 5-fold cross-validation");
  const std::vector<int> knot_budgets = {10, 20, 30, 40, 50};
  const std::vector<double> gammas = logspace(-10.0, -4.0, 7);
  double best_cv = std::numeric_limits<double>::infinity();
  int best_budget = 0;
  double best_gamma = 0.0;
  bool found = false;
  for (int budget : knot_budgets) {
    for (double gamma : gammas) {
      double sse = 0.0;
      bool ok = true;
      for (int f = 0; f < folds && ok; ++f) {
        std::vector<int> train, held;
        for (int i = 0; i < n; ++i)
          (i % folds == f ? held : train).push_back(i);
        if (held.empty() || static_cast<int>(train.size()) < 2) {
          ok = false;
          break;
        }
        try {
          const FunctionalDataset sub = subset_rows(data, train);
          const OracleFit fit = fit_oracle(sub, null_region, budget, 3, gamma);
          const FunctionalDataset out = subset_rows(data, held);
          sse += (fit.predict(out.curves, out.grid) - out.responses).squaredNorm();
        } catch (const std::exception&) {
          ok = false;
        }
      }
      if (!ok) continue;
      const double cv = sse / n;
      if (std::isfinite(cv) && cv < best_cv) {
        best_cv = cv;
        best_budget = budget;
        best_gamma = gamma;
        found = true;
      }
    }
  }
  if (!found)
    throw std::runtime_error(
        "run_oracle_baseline: cross-validation failed for every configuration");
  return fit_oracle(data, null_region, best_budget, 3, best_gamma);
}

StudyReport run_study(const StudyScenario& scenario,
                      const std::vector<Method>& methods, bool parallel) {
  if (methods.empty())
    throw std::invalid_argument("run_study: no methods requested");
  if (scenario.n < 2 || scenario.test_n < 2)
    throw std::invalid_argument(
        "run_study: need at least two training and two test curves");
  if (scenario.num_replicates < 1)
    throw std::invalid_argument("run_study: need at least one replicate");
  if (scenario.num_grid_points < 2)
    throw std::invalid_argument("run_study: need at least two grid points");
  for (Method m : methods)
    if (m == Method::Oracle && scenario.sim_case != SimCase::II)
      throw std::invalid_argument(
          "run_study: the oracle baseline needs a case with both null and "
          "active regions");

  const auto nulls = true_null_region(scenario.sim_case);
  StudyReport report;
  report.scenario = scenario;
  report.methods.resize(methods.size());
  for (std::size_t m = 0; m < methods.size(); ++m) {
    report.methods[m].method = methods[m];
    report.methods[m].rows.resize(scenario.num_replicates);
  }
  const Vector grid = Vector::LinSpaced(scenario.num_grid_points, 0.0, 1.0);
  const auto beta_fn = [&](double t) {
    return true_beta(scenario.sim_case, t);
  };

#pragma omp parallel for schedule(dynamic) if (parallel)
  for (int r = 0; r < scenario.num_replicates; ++r) {
    try {
      Rng cov_rng(stream_key(scenario.seed, r, StreamRole::TrainCovariates));
      FunctionalDataset train;
      train.grid = grid;
      train.curves = gen_covariates(scenario.n, grid, cov_rng);
      Rng noise_rng(stream_key(scenario.seed, r, StreamRole::TrainNoise));
      const ResponseDraw draw =
          gen_responses(train.curves, grid, beta_fn, scenario.mu,
                        scenario.sim_case, scenario.snr, noise_rng);
      train.responses = draw.responses;
      Rng test_rng(stream_key(scenario.seed, r, StreamRole::TestCovariates));
      const Matrix test_curves = gen_covariates(scenario.test_n, grid, test_rng);
      // Noiseless test responses: the comparison targets estimation error,
      // not the irreducible noise floor.
      const Vector test_y =
          (integrate_curves_against(test_curves, grid, beta_fn).array() +
           scenario.mu)
              .matrix();

      for (std::size_t m = 0; m < methods.size(); ++m) {
        ReplicateRow& row = report.methods[m].rows[r];
        row.replicate = r;
        try {
          std::function<double(double)> est;
          Vector pred;
          switch (methods[m]) {
            case Method::Slos: {
              const SelectionResult sel = run_slos(train, !parallel);
              const FitResult fit = sel.best;
              est = [fit](double t) { return fit.beta_value(t); };
              pred = predict(fit, test_curves, grid);
            } break;
            case Method::Smooth: {
              const SelectionResult sel = run_smooth_baseline(train, !parallel);
              const FitResult fit = sel.best;
              est = [fit](double t) { return fit.beta_value(t); };
              pred = predict(fit, test_curves, grid);
            } break;
            case Method::Ols: {
              const FitResult fit = run_ols_baseline(train);
              est = [fit](double t) { return fit.beta_value(t); };
              pred = predict(fit, test_curves, grid);
            } break;
            case Method::Oracle: {
              NullRegionSpec region;
              region.intervals = nulls;
              const OracleFit fit = run_oracle_baseline(train, region);
              est = [fit](double t) { return fit.beta_value(t); };
              pred = fit.predict(test_curves, grid);
            } break;
          }
          const IseMetrics ise =
              integrated_squared_error(est, beta_fn, nulls, 0.0, 1.0);
          row.ise_null = ise.null_region;
          row.ise_active = ise.active_region;
          row.null_prop = nulls.empty() ? kNan : null_proportion(est, nulls);
          row.pmse = (pred - test_y).squaredNorm() /
                     static_cast<double>(test_y.size());
          row.ok = true;
        } catch (const std::exception& e) {
          row.ok = false;
          row.error = e.what();
        }
      }
    } catch (const std::exception& e) {
      for (std::size_t m = 0; m < methods.size(); ++m) {
        report.methods[m].rows[r].replicate = r;
        report.methods[m].rows[r].ok = false;
        report.methods[m].rows[r].error = e.what();
      }
    }
  }

  for (const MethodReport& mr : report.methods) {
    int failures = 0;
    std::string first_error;
    for (const ReplicateRow& row : mr.rows)
      if (!row.ok) {
        ++failures;
        if (first_error.empty()) first_error = row.error;
      }
    if (failures * 5 > scenario.num_replicates)
      throw std::runtime_error("study failed: more than 20% of replicates "
                               "failed for " + method_name(mr.method) +
                               " (first error: " + first_error + ")");
  }
  return report;
}

std::vector<std::string> metrics_for_case(SimCase c) {
  switch (c) {
    case SimCase::I: return {"ise_null", "null_prop", "pmse"};
    case SimCase::II: return {"ise_null", "ise_active", "null_prop", "pmse"};
    case SimCase::III: return {"ise_active", "pmse"};
  }
  throw std::invalid_argument("metrics_for_case: unknown simulation case");
}

double metric_value(const ReplicateRow& row, const std::string& metric) {
  if (metric == "ise_null") return row.ise_null;
  if (metric == "ise_active") return row.ise_active;
  if (metric == "null_prop") return row.null_prop;
  if (metric == "pmse") return row.pmse;
  throw std::invalid_argument("metric_value: unknown metric '" + metric + "'");
}

SummaryStat summarize(const std::vector<double>& values) {
  SummaryStat s;
  s.count = static_cast<int>(values.size());
  if (values.empty()) {
    s.mean = kNan;
    s.sd = kNan;
    return s;
  }
  double acc = 0.0;
  for (double v : values) acc += v;
  s.mean = acc / s.count;
  if (s.count < 2) {
    s.sd = kNan;
    return s;
  }
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.sd = std::sqrt(ss / (s.count - 1));
  return s;
}

std::string study_long_csv(const StudyReport& report) {
  std::ostringstream out;
  out << "case,n,method,metric,replicate,value\n";
  const auto metrics = metrics_for_case(report.scenario.sim_case);
  for (const MethodReport& mr : report.methods)
    for (const ReplicateRow& row : mr.rows) {
      if (!row.ok) continue;
      for (const std::string& metric : metrics)
        out << case_name(report.scenario.sim_case) << ',' << report.scenario.n
            << ',' << method_name(mr.method) << ',' << metric << ','
            << row.replicate << ',' << format_full(metric_value(row, metric))
            << '\n';
    }
  return out.str();
}

std::string study_summary_csv(const StudyReport& report) {
  std::ostringstream out;
  out << "case,n,method,metric,mean,sd,replicates\n";
  const auto metrics = metrics_for_case(report.scenario.sim_case);
  for (const MethodReport& mr : report.methods)
    for (const std::string& metric : metrics) {
      std::vector<double> vals;
      for (const ReplicateRow& row : mr.rows)
        if (row.ok) vals.push_back(metric_value(row, metric));
      const SummaryStat s = summarize(vals);
      out << case_name(report.scenario.sim_case) << ',' << report.scenario.n
          << ',' << method_name(mr.method) << ',' << metric << ','
          << format_full(s.mean) << ',' << format_full(s.sd) << ',' << s.count
          << '\n';
    }
  return out.str();
}

}  // namespace slos
