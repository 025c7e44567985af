#pragma once

#include <vector>

#include "slos/bspline.hpp"
#include "slos/dataset.hpp"
#include "slos/scad.hpp"

namespace slos {

struct FitConfig {
  double gamma = 0.0;           // roughness weight
  ScadParams scad{0.0, 3.7};    // lambda = 0 disables local sparsity
  int num_subintervals = 50;    // M
  int degree = 3;               // d
  int deriv_order = 2;          // m in the roughness penalty, m <= d
  int max_iterations = 100;
  double convergence_tol = 1e-6;  // relative change of the coefficient vector
  // A subinterval dies during the iteration when its scaled norm c_j falls to
  // max(death_factor * c0max, death_floor), where c0max is the largest c_j of
  // the initial (roughness-only) fit. Anchoring at the initial fit keeps the
  // rule meaningful when the whole field collapses together (no-signal data).
  double death_factor = 1e-8;
  double death_floor = 1e-12;
  // After convergence: subintervals with c_j <= final_shrink_factor * c0max
  // are zeroed, then coefficients below coef_cleanup_factor * max|b| are
  // zeroed. Both stages apply only when lambda > 0; set to 0 to disable.
  double final_shrink_factor = 1e-2;
  double coef_cleanup_factor = 1e-2;
  bool fit_intercept = true;
  bool periodic = false;  // enforce beta(t_start) = beta(t_end)
};

struct FitResult {
  BSplineBasis basis;
  Vector beta_coef;  // M+d spline coefficients (after shrink/cleanup)
  double mu_hat = 0.0;
  std::vector<bool> active_mask;  // per subinterval; false => beta == 0 there
  int iterations = 0;
  bool converged = true;
  std::vector<double> objective_trace;  // Q per iteration, starting at b^(0)
  double residual_variance = 0.0;       // RSS / (n - df)
  double rss = 0.0;
  Vector fitted;        // in-sample predictions
  Vector lqa_weights;   // final per-subinterval LQA weights (dead => 0)
  // Columns of the final reduced system, in the folded global indexing used
  // by the solver (intercept first when present).
  std::vector<int> live_columns;
  // Spline coefficient indices (unfolded) that remained in the system.
  std::vector<int> live_coef;
  bool surrogate_descent_ok = true;
  FitConfig config;

  double beta_value(double t, int deriv = 0) const {
    return basis.value(beta_coef, t, deriv);
  }
  SplineFunction beta() const { return SplineFunction{&basis, beta_coef}; }
};

// One covariate process: curves sampled on a sorted grid spanning the domain.
struct Regressor {
  Matrix curves;
  Vector grid;
  double t_start = 0.0;
  double t_end = 1.0;
};

struct MultiFitResult {
  std::vector<FitResult> components;  // one per regressor, sharing mu_hat
  double mu_hat = 0.0;
  int iterations = 0;
  bool converged = true;
  std::vector<double> objective_trace;
  double rss = 0.0;
  Vector fitted;
  double residual_variance = 0.0;
  bool surrogate_descent_ok = true;
};

// Eq. (6) value: mean squared residual + gamma * roughness + the subinterval
// fSCAD approximation (what the iteration actually minimizes).
double objective(const SplineFunction& beta, double mu,
                 const FunctionalDataset& data, const FitConfig& config);

// Iterated LQA fit: initial roughness-only solve, then reweighted reduced
// solves with monotone subinterval death, then the final shrink/cleanup pass.
FitResult fit(const FunctionalDataset& data, const FitConfig& config);

// Multi-regressor extension: block-diagonal penalties, column-catenated
// design, shared intercept, independent per-regressor dead sets.
MultiFitResult fit_multi(const std::vector<Regressor>& regressors,
                         const Vector& y,
                         const std::vector<FitConfig>& configs);

// mu_hat + Integral of X beta_hat by trapezoid on the given grid.
Vector predict(const FitResult& fit, const Matrix& curves, const Vector& grid);

namespace detail {

// Intercept-augmented, optionally periodic-folded design and roughness
// matrices for a single-regressor fit; shared with the tuning module so
// degrees-of-freedom computations see exactly the solver's system.
struct AssembledSystem {
  BSplineBasis basis;
  Matrix U;                // n x cols, intercept column first when enabled
  Matrix Vg;               // cols x cols, gamma-weighted, zero intercept row
  std::vector<int> fold;   // unfolded spline index -> folded spline index
  int spline_cols = 0;     // folded spline column count
  bool intercept = true;
};
AssembledSystem assemble_system(const FunctionalDataset& data,
                                const FitConfig& config);

// Embeds per-subinterval LQA weights into the assembled (folded, augmented)
// coordinates.
Matrix assemble_lqa(const BSplineBasis& basis, const Vector& weights,
                    const std::vector<int>& fold, int spline_cols,
                    bool intercept);

// trace of U_l A_ll^-1 U_l^T via a Jacobi-scaled Cholesky solve. LQA weights
// for nearly dead groups can dwarf the design scale by many orders of
// magnitude; scaling A to unit diagonal keeps the factorization stable where
// a raw LLT breaks down. Returns NaN only on genuine breakdown.
double hat_trace(const Matrix& A_ll, const Matrix& U_l);

}  // namespace detail

}  // namespace slos
