#include "slos/tuning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>

#include "slos/dataset.hpp"

namespace slos {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

FunctionalDataset take_rows(const FunctionalDataset& data,
                            const std::vector<int>& rows) {
  FunctionalDataset out;
  out.grid = data.grid;
  out.t_start = data.t_start;
  out.t_end = data.t_end;
  out.curves.resize(rows.size(), data.curves.cols());
  out.responses.resize(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.curves.row(i) = data.curves.row(rows[i]);
    out.responses[i] = data.responses[rows[i]];
  }
  return out;
}

double information_score(double rss, double df, int n, Criterion criterion) {
  if (!std::isfinite(df) || df >= n) return kInf;
  switch (criterion) {
    case Criterion::BIC:
      return n * std::log(rss / n) + std::log(static_cast<double>(n)) * df;
    case Criterion::AIC:
      return n * std::log(rss / n) + 2.0 * df;
    case Criterion::GCV: {
      const double denom = 1.0 - df / n;
      return (rss / n) / (denom * denom);
    }
    case Criterion::CV:
      break;
  }
  throw std::invalid_argument("information_score: CV handled separately");
}

double cv_score(const FitResult& fit, const FunctionalDataset& data,
                int folds) {
  if (folds < 2) throw std::invalid_argument("score: CV needs >= 2 folds");
  const int n = data.n();
  double pooled = 0.0;
  int held_out = 0;
  for (int f = 0; f < folds; ++f) {
    std::vector<int> train, test;
    for (int i = 0; i < n; ++i)
      (i % folds == f ? test : train).push_back(i);
    if (test.empty() || static_cast<int>(train.size()) < 2) continue;
    const FunctionalDataset sub = take_rows(data, train);
    const FitResult refit = slos::fit(sub, fit.config);
    const FunctionalDataset hold = take_rows(data, test);
    const Vector pred = predict(refit, hold.curves, hold.grid);
    pooled += (pred - hold.responses).squaredNorm();
    held_out += static_cast<int>(test.size());
  }
  if (held_out == 0) throw std::runtime_error("score: no held-out samples in CV");
  return pooled / held_out;
}

}  // namespace

std::vector<double> logspace(double log10_lo, double log10_hi, int count) {
  if (count < 1) throw std::invalid_argument("logspace: count must be positive");
  std::vector<double> out(count);
  if (count == 1) {
    out[0] = std::pow(10.0, log10_hi);
    return out;
  }
  const double step = (log10_hi - log10_lo) / (count - 1);
  for (int i = 0; i < count; ++i)
    out[i] = std::pow(10.0, log10_lo + step * i);
  return out;
}

TuningGrid default_grid() {
  TuningGrid grid;
  grid.gamma_values = logspace(-8.0, -1.0, 8);
  grid.lambda_values = logspace(-4.0, 0.0, 10);
  return grid;
}

int m_heuristic(int n) {
  if (n < 1) throw std::invalid_argument("m_heuristic: n must be positive");
  const double m = 20.0 * std::pow(static_cast<double>(n), 0.25);
  return std::max(50L, std::lround(m));
}

double initial_scale(const FunctionalDataset& data, const FitConfig& config,
                     double gamma) {
  FitConfig cfg = config;
  cfg.gamma = gamma;
  cfg.scad.lambda = 0.0;
  const FitResult smooth = fit(data, cfg);
  return subinterval_norms(smooth.basis, smooth.beta_coef).maxCoeff();
}

double degrees_of_freedom(const FitResult& fit, const FunctionalDataset& data,
                          DfMode mode) {
  const auto sys = detail::assemble_system(data, fit.config);
  const double n = data.n();
  Matrix A = sys.U.transpose() * sys.U + n * sys.Vg;
  if (mode == DfMode::LqaHat)
    A += n * detail::assemble_lqa(sys.basis, fit.lqa_weights, sys.fold,
                                  sys.spline_cols, sys.intercept);
  const std::vector<int>& live = fit.live_columns;
  Matrix All(live.size(), live.size());
  Matrix Ul(sys.U.rows(), live.size());
  for (std::size_t i = 0; i < live.size(); ++i) {
    Ul.col(i) = sys.U.col(live[i]);
    for (std::size_t j = 0; j < live.size(); ++j)
      All(i, j) = A(live[i], live[j]);
  }
  Eigen::LLT<Matrix> llt(All);
  if (llt.info() != Eigen::Success)
    return std::numeric_limits<double>::quiet_NaN();
  return llt.solve(Ul.transpose() * Ul).trace();
}

double score(const FitResult& fit, const FunctionalDataset& data,
             Criterion criterion, int cv_folds, DfMode df_mode) {
  if (criterion == Criterion::CV) return cv_score(fit, data, cv_folds);
  const int n = data.n();
  const double mean = data.responses.mean();
  const double var =
      (data.responses.array() - mean).square().sum() / n;
  const double rss = std::max(fit.rss, 1e-12 * var * n);
  const double df = degrees_of_freedom(fit, data, df_mode);
  return information_score(rss, df, n, criterion);
}

SelectionResult grid_search(const FunctionalDataset& data,
                            const FitConfig& config_template,
                            const TuningGrid& grid, bool parallel) {
  if (grid.gamma_values.empty() || grid.lambda_values.empty())
    throw std::invalid_argument("grid_search: grids must be nonempty");
  double s_hat = 1.0;
  if (grid.lambdas_relative)
    s_hat = initial_scale(data, config_template, grid.lambda_anchor_gamma);

  const int ng = static_cast<int>(grid.gamma_values.size());
  const int nl = static_cast<int>(grid.lambda_values.size());
  const int total = ng * nl;
  std::vector<std::optional<FitResult>> fits(total);
  std::vector<ScoreRow> rows(total);

  // Candidates are independent; results are keyed by grid index so the
  // reduction is deterministic for any thread count.
#pragma omp parallel for schedule(dynamic) if (parallel)
  for (int idx = 0; idx < total; ++idx) {
    const int gi = idx / nl, li = idx % nl;
    const double gamma = grid.gamma_values[gi];
    const double lambda =
        grid.lambda_values[li] * (grid.lambdas_relative ? s_hat : 1.0);
    ScoreRow row;
    row.gamma = gamma;
    row.lambda = lambda;
    row.score = kInf;
    row.df = std::numeric_limits<double>::quiet_NaN();
    try {
      FitConfig cfg = config_template;
      cfg.gamma = gamma;
      cfg.scad.lambda = lambda;
      FitResult fit = slos::fit(data, cfg);
      row.converged = fit.converged;
      if (fit.converged) {
        row.score = score(fit, data, grid.criterion, grid.cv_folds,
                          grid.df_mode);
        row.df = degrees_of_freedom(fit, data, grid.df_mode);
      }
      fits[idx] = std::move(fit);
    } catch (const std::exception&) {
      row.converged = false;
    }
    rows[idx] = row;
  }

  double best_score = kInf;
  for (int idx = 0; idx < total; ++idx)
    if (rows[idx].converged && rows[idx].score < best_score)
      best_score = rows[idx].score;
  if (!std::isfinite(best_score))
    throw std::runtime_error(
        "grid_search: no valid configuration (no candidate converged with a "
        "finite score)");

  // Ties within 1e-9 relative prefer larger lambda, then larger gamma
  // (sparser, smoother).
  const double tol = 1e-9 * std::max(1.0, std::abs(best_score));
  int best_idx = -1;
  for (int gi = 0; gi < ng; ++gi) {
    for (int li = 0; li < nl; ++li) {
      const int idx = gi * nl + li;
      if (!rows[idx].converged || rows[idx].score > best_score + tol) continue;
      if (best_idx < 0) {
        best_idx = idx;
        continue;
      }
      const int bgi = best_idx / nl, bli = best_idx % nl;
      if (li > bli || (li == bli && gi > bgi)) best_idx = idx;
    }
  }

  SelectionResult out{std::move(*fits[best_idx]), rows[best_idx].gamma,
                      rows[best_idx].lambda, s_hat, std::move(rows)};
  return out;
}

std::string score_table_csv(const std::vector<ScoreRow>& table) {
  std::ostringstream os;
  os << "gamma,lambda,score,df,converged\n";
  for (const ScoreRow& row : table) {
    os << format_full(row.gamma) << ',' << format_full(row.lambda) << ','
       << format_full(row.score) << ',' << format_full(row.df) << ','
       << (row.converged ? 1 : 0) << '\n';
  }
  return os.str();
}

}  // namespace slos
