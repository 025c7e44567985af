#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

namespace slos {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Nodes and weights on [-1, 1]; exact for polynomials of degree 2n-1.
struct GaussLegendre {
  Vector nodes;
  Vector weights;
};
GaussLegendre gauss_legendre(int num_points);

// Clamped (open uniform) B-spline basis of degree d over M equal subintervals
// of [t_start, t_end]: M+1 distinct knots, boundary knots repeated d+1 times,
// M+d basis functions. Immutable after construction; safe for concurrent
// reads.
class BSplineBasis {
 public:
  BSplineBasis(double t_start, double t_end, int num_subintervals, int degree);

  double t_start() const { return t_start_; }
  double t_end() const { return t_end_; }
  double length() const { return t_end_ - t_start_; }
  int num_subintervals() const { return M_; }
  int degree() const { return d_; }
  int size() const { return M_ + d_; }
  double subinterval_width() const { return (t_end_ - t_start_) / M_; }
  // Full clamped knot vector, size M + 2d + 1.
  const std::vector<double>& knots() const { return knots_; }
  // Boundary of subinterval j (0-based): [knot_at(j), knot_at(j+1)].
  double knot_at(int i) const;
  // Greville abscissae; coefficients c0 + c1 * greville() reproduce the
  // linear function c0 + c1 * t exactly (d >= 1).
  Vector greville() const;

  // All M+d basis values (or deriv-th derivatives) at t. At most d+1 entries
  // are nonzero. t outside the domain or deriv > degree is an error.
  Vector eval(double t, int deriv = 0) const;
  // Nonzero window only: writes d+1 values for functions first..first+d.
  // `out` must hold degree+1 doubles.
  void eval_local(double t, int deriv, int* first, double* out) const;
  // Rows = evaluation points.
  Matrix eval_matrix(const Vector& ts, int deriv = 0) const;
  // Spline value Sum_k coef_k B_k(t) (or its derivative).
  double value(const Vector& coef, double t, int deriv = 0) const;

  // V with v_uv = Integral of B_u^(m) B_v^(m) over the domain, computed by
  // per-subinterval Gauss-Legendre with d+1 points (exact: integrands are
  // polynomials of degree <= 2d). PSD with nullspace dim m.
  Matrix penalty_matrix(int deriv_order) const;
  // (d+1)x(d+1) nonzero block of W_j = Integral over subinterval j of B B^T;
  // rows/cols correspond to basis functions j..j+d (0-based j in [0, M)).
  Matrix gram_block(int j) const;
  std::vector<Matrix> gram_blocks() const;
  // Full (M+d)x(M+d) W_j (zero outside the j..j+d block).
  Matrix subinterval_gram(int j) const;
  // sqrt(b^T W_j b) = L2 norm of the spline restricted to subinterval j.
  double l2_norm_on_subinterval(const Vector& coef, int j) const;
  // Integral of beta^2 over [a, b] within the domain, split at interior knots
  // so Gauss-Legendre stays exact on each polynomial piece.
  double l2_norm_sq_on_interval(const Vector& coef, double a, double b) const;

 private:
  int find_span(double t) const;
  // The NURBS-book triangular scheme: ders(k, j) = k-th derivative of basis
  // function span-d+j at t, for j = 0..d.
  void ders_basis_funs(int span, double t, int num_ders,
                       Eigen::Ref<Matrix> ders) const;

  double t_start_, t_end_;
  int M_, d_;
  std::vector<double> knots_;
};

// U with u_ij ~ Integral of X_i B_j, composite trapezoid on the observation
// grid. Rows are independent; the parallel version runs them under OpenMP and
// is bitwise identical to the serial reference.
Matrix design_matrix(const BSplineBasis& basis, const Matrix& curves,
                     const Vector& grid);
Matrix design_matrix_serial(const BSplineBasis& basis, const Matrix& curves,
                            const Vector& grid);

// Trapezoid weights for a sorted grid.
Vector trapezoid_weights(const Vector& grid);

}  // namespace slos
