#include "slos/scad.hpp"

#include <cmath>
#include <stdexcept>

namespace slos {

void validate(const ScadParams& params) {
  if (!(params.a > 2.0))
    throw std::invalid_argument("ScadParams: a must exceed 2");
  if (params.lambda < 0.0)
    throw std::invalid_argument("ScadParams: lambda must be non-negative");
}

double scad(double u, const ScadParams& params) {
  validate(params);
  if (u < 0.0) throw std::invalid_argument("scad: u must be non-negative");
  const double l = params.lambda, a = params.a;
  if (l == 0.0) return 0.0;
  if (u <= l) return l * u;
  if (u < a * l) return -(u * u - 2.0 * a * l * u + l * l) / (2.0 * (a - 1.0));
  return (a + 1.0) * l * l / 2.0;
}

double scad_deriv(double u, const ScadParams& params) {
  validate(params);
  if (u < 0.0) throw std::invalid_argument("scad_deriv: u must be non-negative");
  const double l = params.lambda, a = params.a;
  if (l == 0.0) return 0.0;
  if (u <= l) return l;
  if (u < a * l) return (a * l - u) / (a - 1.0);
  return 0.0;
}

Vector subinterval_norms(const BSplineBasis& basis, const Vector& coef) {
  const int M = basis.num_subintervals();
  const double scale = M / basis.length();
  Vector c(M);
  const std::vector<Matrix> blocks = basis.gram_blocks();
  const int w = basis.degree() + 1;
  for (int j = 0; j < M; ++j) {
    const Vector b = coef.segment(j, w);
    c[j] = std::sqrt(std::max(0.0, scale * b.dot(blocks[j] * b)));
  }
  return c;
}

double fscad_value(const SplineFunction& beta, const ScadParams& params,
                   long grid_points) {
  validate(params);
  if (grid_points < 100)
    throw std::invalid_argument("fscad_value: need at least 100 grid points");
  const double t0 = beta.basis->t_start(), t1 = beta.basis->t_end();
  const double h = (t1 - t0) / static_cast<double>(grid_points - 1);
  double sum = 0.0;
  for (long k = 0; k < grid_points; ++k) {
    const double t = (k == grid_points - 1) ? t1 : t0 + h * k;
    const double p = scad(std::abs(beta(t)), params);
    sum += (k == 0 || k == grid_points - 1) ? 0.5 * p : p;
  }
  return sum * h / (t1 - t0);
}

double fscad_approx(const BSplineBasis& basis, const Vector& coef,
                    const ScadParams& params) {
  const Vector c = subinterval_norms(basis, coef);
  double total = 0.0;
  for (int j = 0; j < c.size(); ++j) total += scad(c[j], params);
  return total;
}

LqaResult lqa_matrix(const BSplineBasis& basis, const Vector& coef0,
                     const ScadParams& params, double shrink_threshold) {
  validate(params);
  if (!(shrink_threshold > 0.0))
    throw std::invalid_argument("lqa_matrix: shrink_threshold must be positive");
  const int M = basis.num_subintervals();
  const int w = basis.degree() + 1;
  const double t_over_m = basis.length() / M;
  const Vector c = subinterval_norms(basis, coef0);
  LqaResult out;
  out.W = Matrix::Zero(basis.size(), basis.size());
  const std::vector<Matrix> blocks = basis.gram_blocks();
  for (int j = 0; j < M; ++j) {
    if (c[j] <= shrink_threshold) {
      out.dead.push_back(j);
      continue;
    }
    const double weight = 0.5 * scad_deriv(c[j], params) / (c[j] * t_over_m);
    if (weight != 0.0)
      out.W.block(j, j, w, w) += weight * blocks[j];
  }
  return out;
}

}  // namespace slos
