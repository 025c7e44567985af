#include "slos/bspline.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace slos {

GaussLegendre gauss_legendre(int num_points) {
  if (num_points < 1) throw std::invalid_argument("gauss_legendre: need >= 1 point");
  GaussLegendre gl;
  gl.nodes.resize(num_points);
  gl.weights.resize(num_points);
  const int n = num_points;
  // Newton iteration on the Legendre polynomial, symmetric roots.
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      // Recurrence for P_n(x) and P_{n-1}(x).
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    gl.nodes[i] = -x;
    gl.nodes[n - 1 - i] = x;
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    gl.weights[i] = w;
    gl.weights[n - 1 - i] = w;
  }
  if (n % 2 == 1) gl.nodes[n / 2] = 0.0;
  return gl;
}

BSplineBasis::BSplineBasis(double t_start, double t_end, int num_subintervals,
                           int degree)
    : t_start_(t_start), t_end_(t_end), M_(num_subintervals), d_(degree) {
  if (!(t_end > t_start))
    throw std::invalid_argument("BSplineBasis: domain must have positive length");
  if (M_ < 1) throw std::invalid_argument("BSplineBasis: need at least one subinterval");
  if (d_ < 0) throw std::invalid_argument("BSplineBasis: negative degree");
  // Clamped knot vector: d+1 copies of each boundary, M-1 interior knots.
  knots_.resize(M_ + 2 * d_ + 1);
  const double h = (t_end_ - t_start_) / M_;
  for (int i = 0; i < d_ + 1; ++i) knots_[i] = t_start_;
  for (int i = 1; i < M_; ++i) knots_[d_ + i] = t_start_ + h * i;
  for (int i = 0; i < d_ + 1; ++i) knots_[M_ + d_ + i] = t_end_;
}

double BSplineBasis::knot_at(int i) const {
  if (i < 0 || i > M_) throw std::invalid_argument("knot_at: index out of range");
  if (i == M_) return t_end_;
  return t_start_ + (t_end_ - t_start_) / M_ * i;
}

Vector BSplineBasis::greville() const {
  Vector g(size());
  for (int k = 0; k < size(); ++k) {
    if (d_ == 0) {
      g[k] = 0.5 * (knots_[k] + knots_[k + 1]);
    } else {
      double s = 0.0;
      for (int j = 1; j <= d_; ++j) s += knots_[k + j];
      g[k] = s / d_;
    }
  }
  return g;
}

int BSplineBasis::find_span(double t) const {
  // Nonempty spans are knot indices d..M+d-1; t == t_end maps to the last.
  if (t >= t_end_) return M_ + d_ - 1;
  const double h = (t_end_ - t_start_) / M_;
  int j = static_cast<int>((t - t_start_) / h);
  j = std::clamp(j, 0, M_ - 1);
  // Guard against roundoff at interior knots.
  while (j > 0 && t < knots_[d_ + j]) --j;
  while (j < M_ - 1 && t >= knots_[d_ + j + 1]) ++j;
  return d_ + j;
}

void BSplineBasis::ders_basis_funs(int span, double t, int num_ders,
                                   Eigen::Ref<Matrix> ders) const {
  const int p = d_;
  Matrix ndu(p + 1, p + 1);
  Vector left(p + 1), right(p + 1);
  ndu(0, 0) = 1.0;
  for (int j = 1; j <= p; ++j) {
    left[j] = t - knots_[span + 1 - j];
    right[j] = knots_[span + j] - t;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      ndu(j, r) = right[r + 1] + left[j - r];
      const double temp = ndu(r, j - 1) / ndu(j, r);
      ndu(r, j) = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    ndu(j, j) = saved;
  }
  for (int j = 0; j <= p; ++j) ders(0, j) = ndu(j, p);
  // Derivative rows via the a-coefficient two-row recursion.
  Matrix a(2, p + 1);
  for (int r = 0; r <= p; ++r) {
    int s1 = 0, s2 = 1;
    a(0, 0) = 1.0;
    for (int k = 1; k <= num_ders; ++k) {
      double dsum = 0.0;
      const int rk = r - k, pk = p - k;
      if (r >= k) {
        a(s2, 0) = a(s1, 0) / ndu(pk + 1, rk);
        dsum = a(s2, 0) * ndu(rk, pk);
      }
      const int j1 = (rk >= -1) ? 1 : -rk;
      const int j2 = (r - 1 <= pk) ? k - 1 : p - r;
      for (int j = j1; j <= j2; ++j) {
        a(s2, j) = (a(s1, j) - a(s1, j - 1)) / ndu(pk + 1, rk + j);
        dsum += a(s2, j) * ndu(rk + j, pk);
      }
      if (r <= pk) {
        a(s2, k) = -a(s1, k - 1) / ndu(pk + 1, r);
        dsum += a(s2, k) * ndu(r, pk);
      }
      ders(k, r) = dsum;
      std::swap(s1, s2);
    }
  }
  double factor = p;
  for (int k = 1; k <= num_ders; ++k) {
    for (int j = 0; j <= p; ++j) ders(k, j) *= factor;
    factor *= (p - k);
  }
}

void BSplineBasis::eval_local(double t, int deriv, int* first,
                              double* out) const {
  if (deriv < 0 || deriv > d_)
    throw std::invalid_argument("eval_local: derivative order must be in [0, degree]");
  const double slack = 1e-9 * (t_end_ - t_start_);
  if (t < t_start_ - slack || t > t_end_ + slack)
    throw std::invalid_argument("eval_local: t=" + std::to_string(t) +
                                " outside domain [" + std::to_string(t_start_) +
                                ", " + std::to_string(t_end_) + "]");
  t = std::clamp(t, t_start_, t_end_);
  const int span = find_span(t);
  *first = span - d_;
  if (deriv == 0 && d_ == 0) {
    out[0] = 1.0;
    return;
  }
  Matrix ders(deriv + 1, d_ + 1);
  ders_basis_funs(span, t, deriv, ders);
  for (int j = 0; j <= d_; ++j) out[j] = ders(deriv, j);
}

Vector BSplineBasis::eval(double t, int deriv) const {
  Vector out = Vector::Zero(size());
  int first = 0;
  std::vector<double> local(d_ + 1);
  eval_local(t, deriv, &first, local.data());
  for (int j = 0; j <= d_; ++j) out[first + j] = local[j];
  return out;
}

Matrix BSplineBasis::eval_matrix(const Vector& ts, int deriv) const {
  Matrix out = Matrix::Zero(ts.size(), size());
  int first = 0;
  std::vector<double> local(d_ + 1);
  for (Eigen::Index i = 0; i < ts.size(); ++i) {
    eval_local(ts[i], deriv, &first, local.data());
    for (int j = 0; j <= d_; ++j) out(i, first + j) = local[j];
  }
  return out;
}

double BSplineBasis::value(const Vector& coef, double t, int deriv) const {
  if (coef.size() != size())
    throw std::invalid_argument("value: coefficient length != basis size");
  int first = 0;
  std::vector<double> local(d_ + 1);
  eval_local(t, deriv, &first, local.data());
  double v = 0.0;
  for (int j = 0; j <= d_; ++j) v += coef[first + j] * local[j];
  return v;
}

Matrix BSplineBasis::penalty_matrix(int deriv_order) const {
  if (deriv_order < 0 || deriv_order > d_)
    throw std::invalid_argument("penalty_matrix: derivative order must be in [0, degree]");
  const GaussLegendre gl = gauss_legendre(d_ + 1);
  Matrix V = Matrix::Zero(size(), size());
  int first = 0;
  std::vector<double> local(d_ + 1);
  for (int j = 0; j < M_; ++j) {
    const double a = knot_at(j), b = knot_at(j + 1);
    const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
    for (int q = 0; q < gl.nodes.size(); ++q) {
      const double t = mid + half * gl.nodes[q];
      eval_local(t, deriv_order, &first, local.data());
      const double w = half * gl.weights[q];
      for (int r = 0; r <= d_; ++r)
        for (int c = 0; c <= d_; ++c)
          V(first + r, first + c) += w * local[r] * local[c];
    }
  }
  return V;
}

Matrix BSplineBasis::gram_block(int j) const {
  if (j < 0 || j >= M_)
    throw std::invalid_argument("gram_block: subinterval index out of range");
  const GaussLegendre gl = gauss_legendre(d_ + 1);
  Matrix blk = Matrix::Zero(d_ + 1, d_ + 1);
  const double a = knot_at(j), b = knot_at(j + 1);
  const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
  int first = 0;
  std::vector<double> local(d_ + 1);
  for (int q = 0; q < gl.nodes.size(); ++q) {
    const double t = mid + half * gl.nodes[q];
    eval_local(t, 0, &first, local.data());
    // On the open subinterval the nonzero window is exactly j..j+d.
    const int off = first - j;
    const double w = half * gl.weights[q];
    for (int r = 0; r <= d_; ++r)
      for (int c = 0; c <= d_; ++c)
        blk(off + r, off + c) += w * local[r] * local[c];
  }
  return blk;
}

std::vector<Matrix> BSplineBasis::gram_blocks() const {
  std::vector<Matrix> blocks;
  blocks.reserve(M_);
  for (int j = 0; j < M_; ++j) blocks.push_back(gram_block(j));
  return blocks;
}

Matrix BSplineBasis::subinterval_gram(int j) const {
  Matrix W = Matrix::Zero(size(), size());
  W.block(j, j, d_ + 1, d_ + 1) = gram_block(j);
  return W;
}

double BSplineBasis::l2_norm_on_subinterval(const Vector& coef, int j) const {
  if (coef.size() != size())
    throw std::invalid_argument("l2_norm_on_subinterval: coefficient length != basis size");
  const Matrix blk = gram_block(j);
  const Vector b = coef.segment(j, d_ + 1);
  return std::sqrt(std::max(0.0, b.dot(blk * b)));
}

double BSplineBasis::l2_norm_sq_on_interval(const Vector& coef, double a,
                                            double b) const {
  a = std::max(a, t_start_);
  b = std::min(b, t_end_);
  if (!(b > a)) return 0.0;
  const GaussLegendre gl = gauss_legendre(d_ + 1);
  // Split [a, b] at interior knots so each piece is a single polynomial.
  std::vector<double> cuts{a};
  for (int i = 1; i < M_; ++i) {
    const double k = knot_at(i);
    if (k > a && k < b) cuts.push_back(k);
  }
  cuts.push_back(b);
  double total = 0.0;
  for (std::size_t s = 0; s + 1 < cuts.size(); ++s) {
    const double half = 0.5 * (cuts[s + 1] - cuts[s]);
    const double mid = 0.5 * (cuts[s + 1] + cuts[s]);
    for (int q = 0; q < gl.nodes.size(); ++q) {
      const double v = value(coef, mid + half * gl.nodes[q]);
      total += half * gl.weights[q] * v * v;
    }
  }
  return total;
}

Vector trapezoid_weights(const Vector& grid) {
  const Eigen::Index K = grid.size();
  if (K < 2) throw std::invalid_argument("trapezoid_weights: need at least 2 grid points");
  Vector w = Vector::Zero(K);
  for (Eigen::Index k = 0; k + 1 < K; ++k) {
    if (!(grid[k + 1] > grid[k]))
      throw std::invalid_argument("trapezoid_weights: grid must be strictly increasing");
    const double h = 0.5 * (grid[k + 1] - grid[k]);
    w[k] += h;
    w[k + 1] += h;
  }
  return w;
}

namespace {

Matrix design_matrix_impl(const BSplineBasis& basis, const Matrix& curves,
                          const Vector& grid, bool parallel) {
  if (curves.cols() != grid.size())
    throw std::invalid_argument("design_matrix: curves must have one column per grid point");
  const Vector w = trapezoid_weights(grid);
  const Matrix B = basis.eval_matrix(grid);  // K x (M+d)
  const Eigen::Index n = curves.rows(), K = grid.size(), p = basis.size();
  Matrix U(n, p);
  // Each row accumulates in fixed k order, so the result is bitwise identical
  // for any thread count.
#pragma omp parallel for schedule(static) if (parallel)
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(p);
    for (Eigen::Index k = 0; k < K; ++k)
      row.noalias() += (w[k] * curves(i, k)) * B.row(k);
    U.row(i) = row;
  }
  return U;
}

}  // namespace

Matrix design_matrix(const BSplineBasis& basis, const Matrix& curves,
                     const Vector& grid) {
  return design_matrix_impl(basis, curves, grid, true);
}

Matrix design_matrix_serial(const BSplineBasis& basis, const Matrix& curves,
                            const Vector& grid) {
  return design_matrix_impl(basis, curves, grid, false);
}

}  // namespace slos
