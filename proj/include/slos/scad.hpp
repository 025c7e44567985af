#pragma once

#include <vector>

#include "slos/bspline.hpp"

namespace slos {

struct ScadParams {
  double lambda = 0.0;  // penalty level; 0 disables the penalty entirely
  double a = 3.7;       // concavity parameter, must exceed 2
};

void validate(const ScadParams& params);

// SCAD penalty: lambda*u on [0, lambda]; quadratic blend on (lambda,
// a*lambda); constant (a+1)*lambda^2/2 beyond. Continuous, non-decreasing.
double scad(double u, const ScadParams& params);

// Derivative: lambda, then (a*lambda - u)/(a - 1), then 0. Continuous,
// non-negative, non-increasing.
double scad_deriv(double u, const ScadParams& params);

// A spline beta(t) = Sum_k coef_k B_k(t); the basis must outlive the
// function.
struct SplineFunction {
  const BSplineBasis* basis = nullptr;
  Vector coef;
  double operator()(double t) const { return basis->value(coef, t); }
};

// Scaled subinterval norms c_j = sqrt(M/T) * ||beta restricted to
// subinterval j||_2; c_j approximates the magnitude of beta on subinterval j.
Vector subinterval_norms(const BSplineBasis& basis, const Vector& coef);

// Functional SCAD (1/T) * Integral of p_lambda(|beta(t)|) dt by composite
// trapezoid on a uniform grid; the slow oracle the subinterval approximation
// is tested against.
double fscad_value(const SplineFunction& beta, const ScadParams& params,
                   long grid_points = 100000);

// Subinterval approximation Sum_j p_lambda(c_j) using exact subinterval
// Grams; (1/M) times this converges to fscad_value as M grows.
double fscad_approx(const BSplineBasis& basis, const Vector& coef,
                    const ScadParams& params);

struct LqaResult {
  Matrix W;               // (M+d)x(M+d) PSD weight matrix
  std::vector<int> dead;  // subintervals excluded as effectively zero
};

// Local quadratic approximation weights: W = Sum over live j of
// p'(c_j) / (2 * c_j * T/M) * W_j. Subintervals with c_j <= shrink_threshold
// are marked dead and excluded (the solver pins their coefficients to zero);
// this replaces the divergent 1/c_j ridge term near zero.
LqaResult lqa_matrix(const BSplineBasis& basis, const Vector& coef0,
                     const ScadParams& params, double shrink_threshold);

}  // namespace slos
