#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "doctest.h"
#include "slos/simulation.hpp"
#include "slos/tuning.hpp"
#include "test_helpers.hpp"

using namespace slos;
using testutil::make_case_data;

namespace {

FitConfig smooth_config(int M, double gamma) {
  FitConfig cfg;
  cfg.num_subintervals = M;
  cfg.gamma = gamma;
  cfg.scad.lambda = 0.0;
  return cfg;
}

// Independent hat-trace: df = tr[U (U^T U + n gamma Vhat)^-1 U^T] with
// U = [1 | design] and the intercept left unpenalized.
double brute_force_df(const FunctionalDataset& data, const FitConfig& cfg) {
  const BSplineBasis basis(data.t_start, data.t_end, cfg.num_subintervals,
                           cfg.degree);
  const Matrix U0 = design_matrix(basis, data.curves, data.grid);
  const int p = basis.size();
  Matrix U(data.n(), p + 1);
  U.col(0).setOnes();
  U.rightCols(p) = U0;
  Matrix A = U.transpose() * U;
  A.bottomRightCorner(p, p) +=
      data.n() * cfg.gamma * basis.penalty_matrix(cfg.deriv_order);
  return A.ldlt().solve(U.transpose() * U).trace();
}

}  // namespace

TEST_CASE("basis-size heuristic") {
  CHECK(m_heuristic(150) == 70);
  CHECK(m_heuristic(215) == 77);
  CHECK(m_heuristic(450) == 92);
  CHECK(m_heuristic(1000) == 112);
  // Small samples bottom out at 50.
  CHECK(m_heuristic(1) == 50);
  CHECK(m_heuristic(39) == 50);
  CHECK_THROWS_AS(m_heuristic(0), std::invalid_argument);
  CHECK_THROWS_AS(m_heuristic(-5), std::invalid_argument);
}

TEST_CASE("logspace endpoints and errors") {
  const auto g = logspace(-8.0, -1.0, 8);
  REQUIRE(g.size() == 8);
  CHECK(g.front() == doctest::Approx(1e-8).epsilon(1e-12));
  CHECK(g.back() == doctest::Approx(1e-1).epsilon(1e-12));
  CHECK(g[1] / g[0] == doctest::Approx(10.0).epsilon(1e-12));
  CHECK(logspace(0.0, 0.0, 1).size() == 1);
  CHECK_THROWS_AS(logspace(0.0, 1.0, 0), std::invalid_argument);
}

TEST_CASE("degrees of freedom") {
  const FunctionalDataset data = make_case_data(SimCase::III, 60, 51, 11);

  SUBCASE("unpenalized fit counts its columns") {
    const FitResult res = fit(data, smooth_config(10, 0.0));
    // 10 + 3 spline functions plus the intercept.
    CHECK(degrees_of_freedom(res, data) == doctest::Approx(14.0).epsilon(1e-8));
  }

  SUBCASE("ridge trace matches an independent assembly") {
    for (double gamma : {1e-8, 1e-5, 1e-2}) {
      const FitConfig cfg = smooth_config(12, gamma);
      const FitResult res = fit(data, cfg);
      const double expected = brute_force_df(data, cfg);
      CHECK(degrees_of_freedom(res, data, DfMode::LqaHat) ==
            doctest::Approx(expected).epsilon(1e-8));
    }
  }

  SUBCASE("both modes coincide when lambda is zero") {
    const FitResult res = fit(data, smooth_config(12, 1e-6));
    CHECK(degrees_of_freedom(res, data, DfMode::LqaHat) ==
          doctest::Approx(degrees_of_freedom(res, data, DfMode::RefitTrace))
              .epsilon(1e-12));
  }

  SUBCASE("df decreases monotonically in gamma toward the linear limit") {
    const auto gammas = logspace(-8.0, 3.0, 12);
    double prev = std::numeric_limits<double>::infinity();
    double last = 0.0;
    for (double gamma : gammas) {
      const FitResult res = fit(data, smooth_config(20, gamma));
      const double df = degrees_of_freedom(res, data);
      // Allow a little numerical slack near the large-gamma plateau, where
      // the trace is the difference of ill-conditioned solves.
      CHECK(df <= prev + 1e-4);
      prev = df;
      last = df;
    }
    // gamma -> infinity leaves the intercept plus the two-dimensional
    // nullspace of the curvature penalty.
    CHECK(last > 2.0);
    CHECK(last < 3.4);
    // The small-gamma end recovers most of the effective rank of the
    // functional design (fewer than the 24 columns: integrating smooth
    // curves against neighbouring B-splines yields nearly collinear
    // regressors, so some directions carry almost no information).
    const FitResult rich = fit(data, smooth_config(20, 1e-8));
    CHECK(degrees_of_freedom(rich, data) > 10.0);
  }

  SUBCASE("a model too rich for the data disqualifies itself") {
    const FitResult res = fit(data, smooth_config(10, 0.0));
    FunctionalDataset tiny;
    tiny.grid = data.grid;
    tiny.curves = data.curves.topRows(2);
    tiny.responses = data.responses.head(2);
    CHECK(std::isnan(degrees_of_freedom(res, tiny)));
    CHECK(std::isinf(score(res, tiny, Criterion::BIC)));
  }
}

TEST_CASE("information criteria formulas") {
  const FunctionalDataset data = make_case_data(SimCase::III, 80, 61, 21);
  const FitResult res = fit(data, smooth_config(10, 1e-6));
  const int n = data.n();
  const double df = degrees_of_freedom(res, data, DfMode::LqaHat);
  const double rss = res.rss;
  CHECK(score(res, data, Criterion::BIC) ==
        doctest::Approx(n * std::log(rss / n) + std::log(double(n)) * df)
            .epsilon(1e-12));
  CHECK(score(res, data, Criterion::AIC) ==
        doctest::Approx(n * std::log(rss / n) + 2.0 * df).epsilon(1e-12));
  const double denom = 1.0 - df / n;
  CHECK(score(res, data, Criterion::GCV) ==
        doctest::Approx((rss / n) / (denom * denom)).epsilon(1e-12));
}

TEST_CASE("near-zero RSS is floored before the log") {
  // Noiseless spline-generated responses: the OLS fit is exact and the raw
  // RSS underflows the information criteria.
  const int n = 60, K = 61;
  FunctionalDataset data;
  data.grid = testutil::linspace(0.0, 1.0, K);
  Rng cov(stream_key(5, 0, StreamRole::TrainCovariates));
  data.curves = gen_covariates(n, data.grid, cov);
  const BSplineBasis basis(0.0, 1.0, 8, 3);
  Rng rng(6);
  const Vector b = testutil::random_coef(basis, rng);
  data.responses =
      (design_matrix(basis, data.curves, data.grid) * b).array() + 1.0;

  const FitResult res = fit(data, smooth_config(8, 0.0));
  REQUIRE(res.rss < 1e-14);
  const double mean = data.responses.mean();
  const double var = (data.responses.array() - mean).square().sum() / n;
  const double df = degrees_of_freedom(res, data);
  const double expected = n * std::log(1e-12 * var) + std::log(double(n)) * df;
  CHECK(score(res, data, Criterion::BIC) ==
        doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("cross-validation pools held-out squared error over folds") {
  const FunctionalDataset data = make_case_data(SimCase::III, 50, 41, 31);
  const FitConfig cfg = smooth_config(10, 1e-6);
  const FitResult res = fit(data, cfg);

  // Independent re-implementation of the order-stratified fold loop.
  const int folds = 5;
  double pooled = 0.0;
  int held = 0;
  for (int f = 0; f < folds; ++f) {
    std::vector<int> train, test;
    for (int i = 0; i < data.n(); ++i)
      (i % folds == f ? test : train).push_back(i);
    FunctionalDataset tr, te;
    tr.grid = te.grid = data.grid;
    tr.curves.resize(train.size(), data.curves.cols());
    tr.responses.resize(train.size());
    for (std::size_t i = 0; i < train.size(); ++i) {
      tr.curves.row(i) = data.curves.row(train[i]);
      tr.responses[i] = data.responses[train[i]];
    }
    te.curves.resize(test.size(), data.curves.cols());
    te.responses.resize(test.size());
    for (std::size_t i = 0; i < test.size(); ++i) {
      te.curves.row(i) = data.curves.row(test[i]);
      te.responses[i] = data.responses[test[i]];
    }
    const FitResult refit = fit(tr, cfg);
    const Vector pred = predict(refit, te.curves, te.grid);
    pooled += (pred - te.responses).squaredNorm();
    held += static_cast<int>(test.size());
  }
  CHECK(score(res, data, Criterion::CV, folds) ==
        doctest::Approx(pooled / held).epsilon(1e-12));

  CHECK_THROWS_AS(score(res, data, Criterion::CV, 1), std::invalid_argument);

  // Oversmoothing a strongly nonlinear signal must lose to a moderate ridge.
  const FitResult mid = fit(data, smooth_config(10, 1e-5));
  const FitResult flat = fit(data, smooth_config(10, 10.0));
  CHECK(score(mid, data, Criterion::CV, folds) <
        score(flat, data, Criterion::CV, folds));
}

TEST_CASE("initial scale is the largest subinterval norm of the smooth fit") {
  const FunctionalDataset data = make_case_data(SimCase::II, 70, 61, 41);
  FitConfig cfg;
  cfg.num_subintervals = 15;
  const double s = initial_scale(data, cfg, 1e-8);
  const FitResult smooth = fit(data, smooth_config(15, 1e-8));
  CHECK(s == subinterval_norms(smooth.basis, smooth.beta_coef).maxCoeff());
  CHECK(s > 0.0);
}

TEST_CASE("grid search") {
  const FunctionalDataset data = make_case_data(SimCase::II, 60, 61, 51);
  FitConfig tmpl;
  tmpl.num_subintervals = 15;

  SUBCASE("single-point absolute grid reproduces the direct fit") {
    TuningGrid grid;
    grid.gamma_values = {1e-6};
    grid.lambda_values = {0.0};
    grid.lambdas_relative = false;
    const SelectionResult sel = grid_search(data, tmpl, grid, false);
    CHECK(sel.gamma == 1e-6);
    CHECK(sel.lambda == 0.0);
    CHECK(sel.lambda_scale == 1.0);
    REQUIRE(sel.table.size() == 1);
    CHECK(sel.table[0].converged);
    const FitResult direct = fit(data, smooth_config(15, 1e-6));
    CHECK((sel.best.beta_coef - direct.beta_coef).cwiseAbs().maxCoeff() == 0.0);
    CHECK(sel.best.mu_hat == direct.mu_hat);
  }

  SUBCASE("relative lambdas are scaled by the anchored initial scale") {
    TuningGrid grid;
    grid.gamma_values = {1e-8, 1e-6};
    grid.lambda_values = {1e-3, 1e-2};
    const SelectionResult sel = grid_search(data, tmpl, grid, false);
    const double s = initial_scale(data, tmpl, grid.lambda_anchor_gamma);
    CHECK(sel.lambda_scale == s);
    REQUIRE(sel.table.size() == 4);
    for (std::size_t gi = 0; gi < grid.gamma_values.size(); ++gi)
      for (std::size_t li = 0; li < grid.lambda_values.size(); ++li) {
        const ScoreRow& row = sel.table[gi * 2 + li];
        CHECK(row.gamma == grid.gamma_values[gi]);
        CHECK(row.lambda == grid.lambda_values[li] * s);
      }
  }

  SUBCASE("exact ties prefer larger lambda then larger gamma") {
    // Lambdas far past saturation kill every spline coefficient, so all four
    // candidates collapse to the intercept-only model with identical scores.
    const double s = initial_scale(data, tmpl, 1e-8);
    TuningGrid grid;
    grid.gamma_values = {1e-8, 1e-7};
    grid.lambda_values = {10.0 * s, 20.0 * s};
    grid.lambdas_relative = false;
    const SelectionResult sel = grid_search(data, tmpl, grid, false);
    for (const ScoreRow& row : sel.table) {
      CHECK(row.converged);
      CHECK(row.score == doctest::Approx(sel.table[0].score).epsilon(1e-12));
    }
    CHECK(sel.best.beta_coef.cwiseAbs().maxCoeff() == 0.0);
    CHECK(sel.lambda == 20.0 * s);
    CHECK(sel.gamma == 1e-7);
  }

  SUBCASE("parallel and serial searches agree exactly") {
    TuningGrid grid;
    grid.gamma_values = {1e-8, 1e-6};
    grid.lambda_values = {1e-2, 1e-1, 1.0};
    const SelectionResult par = grid_search(data, tmpl, grid, true);
    const SelectionResult ser = grid_search(data, tmpl, grid, false);
    CHECK(par.gamma == ser.gamma);
    CHECK(par.lambda == ser.lambda);
    CHECK((par.best.beta_coef - ser.best.beta_coef).cwiseAbs().maxCoeff() ==
          0.0);
    REQUIRE(par.table.size() == ser.table.size());
    for (std::size_t i = 0; i < par.table.size(); ++i)
      CHECK(par.table[i].score == ser.table[i].score);
  }

  SUBCASE("a grid with no viable candidate reports failure") {
    FunctionalDataset tiny;
    tiny.grid = data.grid;
    tiny.curves = data.curves.topRows(3);
    tiny.responses = data.responses.head(3);
    TuningGrid grid;
    grid.gamma_values = {0.0};
    grid.lambda_values = {0.0};
    grid.lambdas_relative = false;
    FitConfig wide = tmpl;
    wide.num_subintervals = 20;
    CHECK_THROWS_AS(grid_search(tiny, wide, grid, false), std::runtime_error);
  }

  SUBCASE("empty grids are rejected") {
    TuningGrid grid;
    grid.gamma_values = {};
    grid.lambda_values = {1e-2};
    CHECK_THROWS_AS(grid_search(data, tmpl, grid, false),
                    std::invalid_argument);
    grid.gamma_values = {1e-6};
    grid.lambda_values = {};
    CHECK_THROWS_AS(grid_search(data, tmpl, grid, false),
                    std::invalid_argument);
  }
}

TEST_CASE("default grid matches the documented shape") {
  const TuningGrid grid = default_grid();
  REQUIRE(grid.gamma_values.size() == 8);
  REQUIRE(grid.lambda_values.size() == 10);
  CHECK(grid.gamma_values.front() == doctest::Approx(1e-8).epsilon(1e-12));
  CHECK(grid.gamma_values.back() == doctest::Approx(1e-1).epsilon(1e-12));
  CHECK(grid.lambda_values.front() == doctest::Approx(1e-4).epsilon(1e-12));
  CHECK(grid.lambda_values.back() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(grid.lambdas_relative);
  CHECK(grid.criterion == Criterion::BIC);
  CHECK(grid.df_mode == DfMode::LqaHat);
}

TEST_CASE("score table serializes with full precision") {
  std::vector<ScoreRow> table(2);
  table[0] = {1e-8, 0.123456789012345678, -42.5, 7.25, true};
  table[1] = {1e-7, 0.0, std::numeric_limits<double>::infinity(), 3.0, false};
  const std::string csv = score_table_csv(table);
  std::istringstream is(csv);
  std::string line;
  REQUIRE(std::getline(is, line));
  CHECK(line == "gamma,lambda,score,df,converged");
  REQUIRE(std::getline(is, line));
  // Round-trip the lambda field through stod.
  std::istringstream fields(line);
  std::string cell;
  std::getline(fields, cell, ',');
  CHECK(std::stod(cell) == 1e-8);
  std::getline(fields, cell, ',');
  CHECK(std::stod(cell) == 0.123456789012345678);
  std::getline(fields, cell, ',');
  CHECK(std::stod(cell) == -42.5);
  std::getline(fields, cell, ',');
  CHECK(std::stod(cell) == 7.25);
  std::getline(fields, cell, ',');
  CHECK(cell == "1");
  REQUIRE(std::getline(is, line));
  CHECK(line.back() == '0');
}
