#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "slos/bspline.hpp"
#include "test_helpers.hpp"

using namespace slos;
using testutil::linspace;

namespace {

// Textbook Cox-de Boor recursion on the padded knot vector, as an independent
// reference. Half-open convention, so only valid strictly inside the domain.
double naive_bspline(const std::vector<double>& knots, int j, int d, double t) {
  if (d == 0) return (t >= knots[j] && t < knots[j + 1]) ? 1.0 : 0.0;
  double left = 0.0, right = 0.0;
  const double den1 = knots[j + d] - knots[j];
  if (den1 > 0.0)
    left = (t - knots[j]) / den1 * naive_bspline(knots, j, d - 1, t);
  const double den2 = knots[j + d + 1] - knots[j + 1];
  if (den2 > 0.0)
    right = (knots[j + d + 1] - t) / den2 * naive_bspline(knots, j + 1, d - 1, t);
  return left + right;
}

Matrix reference_penalty(const BSplineBasis& basis, int m, int quad_points) {
  const int p = basis.size();
  Matrix V = Matrix::Zero(p, p);
  const GaussLegendre gl = gauss_legendre(quad_points);
  for (int j = 0; j < basis.num_subintervals(); ++j) {
    const double a = basis.knot_at(j), b = basis.knot_at(j + 1);
    for (int q = 0; q < gl.nodes.size(); ++q) {
      const double t = 0.5 * (a + b) + 0.5 * (b - a) * gl.nodes[q];
      const double w = 0.5 * (b - a) * gl.weights[q];
      const Vector B = basis.eval(t, m);
      V.noalias() += w * B * B.transpose();
    }
  }
  return V;
}

}  // namespace

TEST_CASE("basis size and knot layout") {
  const BSplineBasis fig1(0.0, 1.0, 20, 3);
  CHECK(fig1.size() == 23);
  CHECK(fig1.num_subintervals() == 20);
  CHECK(fig1.degree() == 3);
  CHECK(fig1.knot_at(0) == 0.0);
  CHECK(fig1.knot_at(20) == 1.0);
  CHECK(fig1.subinterval_width() == doctest::Approx(0.05).epsilon(1e-12));

  const BSplineBasis yearly(0.0, 365.0, 50, 3);
  CHECK(yearly.size() == 53);
  CHECK(yearly.subinterval_width() == doctest::Approx(7.3).epsilon(1e-12));

  const BSplineBasis single(0.0, 1.0, 1, 0);
  CHECK(single.size() == 1);
  CHECK(single.eval(0.3, 0)[0] == doctest::Approx(1.0).epsilon(1e-15));

  // Uniform spacing of the simple knots.
  for (int i = 0; i <= 20; ++i)
    CHECK(fig1.knot_at(i) == doctest::Approx(i * 0.05).epsilon(1e-12));

  CHECK_THROWS_AS(BSplineBasis(0.0, 0.0, 10, 3), std::invalid_argument);
  CHECK_THROWS_AS(BSplineBasis(0.0, -1.0, 10, 3), std::invalid_argument);
  CHECK_THROWS_AS(BSplineBasis(0.0, 1.0, 0, 3), std::invalid_argument);
  CHECK_THROWS_AS(BSplineBasis(0.0, 1.0, 10, -1), std::invalid_argument);
}

TEST_CASE("partition of unity at 1000 random points") {
  for (const BSplineBasis& basis :
       {BSplineBasis(0.0, 1.0, 20, 3), BSplineBasis(0.0, 365.0, 50, 3),
        BSplineBasis(0.0, 2.0, 7, 4)}) {
    Rng rng(42);
    for (int i = 0; i < 1000; ++i) {
      const double t =
          basis.t_start() + rng.uniform() * (basis.t_end() - basis.t_start());
      CHECK(std::abs(basis.eval(t, 0).sum() - 1.0) < 1e-10);
      CHECK(basis.eval(t, 0).minCoeff() >= 0.0);
    }
  }
}

TEST_CASE("clamped endpoints interpolate") {
  const BSplineBasis basis(0.0, 1.0, 20, 3);
  const Vector at_start = basis.eval(0.0, 0);
  CHECK(at_start[0] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(at_start.tail(22).cwiseAbs().maxCoeff() == 0.0);
  const Vector at_end = basis.eval(1.0, 0);
  CHECK(at_end[22] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(at_end.head(22).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("compact support window") {
  const BSplineBasis basis(0.0, 1.0, 20, 3);
  const int M = basis.num_subintervals(), d = basis.degree();
  // Function j lives on [knot(max(0, j-d)), knot(min(M, j+1))]; it vanishes
  // identically outside. Probed at 400 points per function.
  for (int j = 0; j < basis.size(); ++j) {
    const double lo = basis.knot_at(std::max(0, j - d));
    const double hi = basis.knot_at(std::min(M, j + 1));
    const Vector ts = linspace(0.0, 1.0, 400);
    for (int i = 0; i < ts.size(); ++i) {
      if (ts[i] < lo - 1e-12 || ts[i] > hi + 1e-12)
        CHECK(basis.eval(ts[i], 0)[j] == 0.0);
    }
  }
  // The function supported on [0.1, 0.3] is nonzero in its interior.
  CHECK(basis.eval(0.2, 0)[5] > 0.0);
  CHECK(basis.eval(0.05, 0)[5] == 0.0);
  CHECK(basis.eval(0.35, 0)[5] == 0.0);
}

TEST_CASE("values match the naive Cox-de Boor recursion") {
  for (const BSplineBasis& basis :
       {BSplineBasis(0.0, 1.0, 7, 3), BSplineBasis(0.5, 3.5, 11, 4),
        BSplineBasis(0.0, 1.0, 4, 0)}) {
    const std::vector<double> knots = basis.knots();
    const Vector ts = linspace(basis.t_start() + 1e-7, basis.t_end() - 1e-7, 157);
    for (int i = 0; i < ts.size(); ++i) {
      const Vector vals = basis.eval(ts[i], 0);
      for (int j = 0; j < basis.size(); ++j)
        CHECK(vals[j] ==
              doctest::Approx(naive_bspline(knots, j, basis.degree(), ts[i]))
                  .epsilon(1e-12));
    }
  }
}

TEST_CASE("derivatives match finite differences away from knots") {
  const BSplineBasis basis(0.0, 1.0, 10, 3);
  const double h = 1e-6;
  for (int j = 0; j < basis.num_subintervals(); ++j) {
    for (double frac : {0.2, 0.5, 0.8}) {
      const double t = basis.knot_at(j) + frac * basis.subinterval_width();
      const Vector d1 = basis.eval(t, 1);
      const Vector fd1 =
          (basis.eval(t + h, 0) - basis.eval(t - h, 0)) / (2.0 * h);
      CHECK((d1 - fd1).cwiseAbs().maxCoeff() < 1e-5);
      const Vector d2 = basis.eval(t, 2);
      const Vector fd2 =
          (basis.eval(t + h, 1) - basis.eval(t - h, 1)) / (2.0 * h);
      CHECK((d2 - fd2).cwiseAbs().maxCoeff() < 1e-4);
    }
  }
}

TEST_CASE("evaluation rejects out-of-range inputs") {
  const BSplineBasis basis(0.0, 1.0, 10, 3);
  CHECK_THROWS_AS(basis.eval(-0.01, 0), std::invalid_argument);
  CHECK_THROWS_AS(basis.eval(1.01, 0), std::invalid_argument);
  CHECK_THROWS_AS(basis.eval(0.5, 4), std::invalid_argument);
  CHECK_THROWS_AS(basis.eval(0.5, -1), std::invalid_argument);
  CHECK_THROWS_AS(basis.penalty_matrix(4), std::invalid_argument);
  CHECK_THROWS_AS(basis.gram_block(-1), std::invalid_argument);
  CHECK_THROWS_AS(basis.gram_block(10), std::invalid_argument);
}

TEST_CASE("Gauss-Legendre rules integrate high-degree monomials") {
  const GaussLegendre gl = gauss_legendre(5);
  CHECK(gl.weights.sum() == doctest::Approx(2.0).epsilon(1e-14));
  double x8 = 0.0;
  for (int q = 0; q < gl.nodes.size(); ++q)
    x8 += gl.weights[q] * std::pow(gl.nodes[q], 8);
  CHECK(x8 == doctest::Approx(2.0 / 9.0).epsilon(1e-13));
  // Node symmetry about 0.
  for (int q = 0; q < gl.nodes.size(); ++q)
    CHECK(gl.nodes[q] == doctest::Approx(-gl.nodes[gl.nodes.size() - 1 - q])
                             .epsilon(1e-13));
}

TEST_CASE("quadrature order d+1 already exact: matches order 2(d+1)") {
  for (const BSplineBasis& basis :
       {BSplineBasis(0.0, 1.0, 6, 2), BSplineBasis(0.0, 2.0, 5, 3),
        BSplineBasis(0.0, 1.0, 4, 4)}) {
    for (int m = 0; m <= basis.degree(); ++m) {
      const Matrix V = basis.penalty_matrix(m);
      const Matrix ref = reference_penalty(basis, m, 2 * (basis.degree() + 1));
      const double scale = std::max(1.0, ref.cwiseAbs().maxCoeff());
      CHECK((V - ref).cwiseAbs().maxCoeff() / scale < 1e-12);
    }
  }
}

TEST_CASE("roughness penalty of known functions") {
  const BSplineBasis basis(0.0, 1.0, 50, 3);
  const Matrix V2 = basis.penalty_matrix(2);

  // Symmetry.
  CHECK((V2 - V2.transpose()).cwiseAbs().maxCoeff() <
        1e-12 * V2.cwiseAbs().maxCoeff());

  // Linear functions are in the nullspace of the second-derivative penalty;
  // Greville coefficients reproduce them exactly.
  const Vector g = basis.greville();
  const Vector lin = 0.7 * Vector::Ones(basis.size()) + 2.5 * g;
  CHECK(lin.dot(V2 * lin) < 1e-10);

  // beta(t) = sin(2 pi t): integral of (beta'')^2 is (2 pi)^4 / 2.
  constexpr double pi = std::numbers::pi;
  const Vector b = testutil::approx_coef(
      basis, [&](double t) { return std::sin(2.0 * pi * t); });
  const double target = std::pow(2.0 * pi, 4) / 2.0;
  CHECK(b.dot(V2 * b) == doctest::Approx(target).epsilon(5e-3));
  const double target1 = std::pow(2.0 * pi, 2) / 2.0;
  CHECK(b.dot(basis.penalty_matrix(1) * b) ==
        doctest::Approx(target1).epsilon(5e-3));
  CHECK(b.dot(basis.penalty_matrix(0) * b) == doctest::Approx(0.5).epsilon(5e-3));
}

TEST_CASE("subinterval gram matrices tile the full gram matrix") {
  const BSplineBasis basis(0.0, 1.5, 12, 3);
  const Matrix gram = basis.penalty_matrix(0);
  Matrix sum = Matrix::Zero(basis.size(), basis.size());
  for (int j = 0; j < basis.num_subintervals(); ++j) {
    const Matrix Wj = basis.subinterval_gram(j);
    sum += Wj;
    // Nonzero block confined to the d+1 functions alive on subinterval j.
    for (int u = 0; u < basis.size(); ++u)
      for (int v = 0; v < basis.size(); ++v)
        if (u < j || u > j + basis.degree() || v < j || v > j + basis.degree())
          CHECK(Wj(u, v) == 0.0);
  }
  CHECK((sum - gram).cwiseAbs().maxCoeff() < 1e-12 * gram.cwiseAbs().maxCoeff());
}

TEST_CASE("subinterval integrals of simple functions") {
  const BSplineBasis basis(0.0, 1.0, 5, 3);
  const Vector ones = Vector::Ones(basis.size());
  for (int j = 0; j < 5; ++j) {
    const double q = ones.dot(basis.subinterval_gram(j) * ones);
    CHECK(q == doctest::Approx(1.0 / 5.0).epsilon(1e-12));
    CHECK(basis.l2_norm_on_subinterval(ones, j) ==
          doctest::Approx(std::sqrt(1.0 / 5.0)).epsilon(1e-12));
  }

  // Degree 0, M=4: each subinterval gram has the single entry 0.25 at (j,j).
  const BSplineBasis boxes(0.0, 1.0, 4, 0);
  for (int j = 0; j < 4; ++j) {
    const Matrix Wj = boxes.subinterval_gram(j);
    CHECK(Wj(j, j) == doctest::Approx(0.25).epsilon(1e-14));
    CHECK(Wj.cwiseAbs().sum() == doctest::Approx(0.25).epsilon(1e-14));
  }

  // beta(t) = t on [0,1] with M=2: norm over the first subinterval is
  // sqrt(int_0^0.5 t^2 dt) = sqrt(1/24).
  const BSplineBasis lin(0.0, 1.0, 2, 1);
  const Vector b = lin.greville();  // reproduces t exactly for degree 1
  CHECK(lin.l2_norm_on_subinterval(b, 0) ==
        doctest::Approx(std::sqrt(1.0 / 24.0)).epsilon(1e-13));
  CHECK(lin.l2_norm_on_subinterval(Vector::Zero(3), 0) == 0.0);
  CHECK(lin.l2_norm_sq_on_interval(b, 0.0, 1.0) ==
        doctest::Approx(1.0 / 3.0).epsilon(1e-13));
  CHECK(lin.l2_norm_sq_on_interval(b, 0.25, 0.75) ==
        doctest::Approx((std::pow(0.75, 3) - std::pow(0.25, 3)) / 3.0)
            .epsilon(1e-13));
}

TEST_CASE("norm bound chain on subintervals holds for 200 random splines") {
  const BSplineBasis basis(0.0, 1.0, 10, 3);
  const int M = basis.num_subintervals();
  const double T = basis.length();
  Rng rng(7);
  for (int rep = 0; rep < 200; ++rep) {
    const Vector b = testutil::random_coef(basis, rng);
    for (int j = 0; j < M; ++j) {
      const Vector ts =
          linspace(basis.knot_at(j), basis.knot_at(j + 1), 1001);
      double lo = 1e300, hi = 0.0;
      for (int i = 0; i < ts.size(); ++i) {
        const double v = std::abs(basis.value(b, ts[i]));
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      const double mid =
          std::sqrt(M / T) * basis.l2_norm_on_subinterval(b, j);
      CHECK(lo <= mid + 1e-9);
      CHECK(mid <= hi + 1e-9);
    }
  }
}

TEST_CASE("design matrix approximates the cross integrals") {
  const BSplineBasis basis(0.0, 2.0, 9, 3);

  // Constant curves: each row sums to the domain length.
  const Vector grid = linspace(0.0, 2.0, 501);
  Matrix ones_curves = Matrix::Ones(3, grid.size());
  const Matrix U1 = design_matrix(basis, ones_curves, grid);
  for (int i = 0; i < U1.rows(); ++i)
    CHECK(U1.row(i).sum() == doctest::Approx(2.0).epsilon(1e-12));

  // Zero curve: zero row.
  Matrix zero_curve = Matrix::Zero(1, grid.size());
  CHECK(design_matrix(basis, zero_curve, grid).cwiseAbs().maxCoeff() == 0.0);

  // A curve equal to one basis function: the matching entry approximates the
  // gram diagonal.
  const BSplineBasis fig1(0.0, 1.0, 20, 3);
  const Vector dense = linspace(0.0, 1.0, 2001);
  Matrix b5(1, dense.size());
  for (int k = 0; k < dense.size(); ++k) b5(0, k) = fig1.eval(dense[k], 0)[5];
  const Matrix U5 = design_matrix(fig1, b5, dense);
  CHECK(std::abs(U5(0, 5) - fig1.penalty_matrix(0)(5, 5)) < 1e-6);

  // Entries against a direct trapezoid loop.
  Rng rng(11);
  Matrix curves(4, grid.size());
  for (int i = 0; i < curves.rows(); ++i)
    for (int k = 0; k < curves.cols(); ++k) curves(i, k) = rng.normal();
  const Matrix U = design_matrix(basis, curves, grid);
  const Vector w = trapezoid_weights(grid);
  for (int i = 0; i < curves.rows(); ++i)
    for (int j = 0; j < basis.size(); ++j) {
      double ref = 0.0;
      for (int k = 0; k < grid.size(); ++k)
        ref += w[k] * curves(i, k) * basis.eval(grid[k], 0)[j];
      CHECK(U(i, j) == doctest::Approx(ref).epsilon(1e-12));
    }

  // Serial reference is bitwise identical to the parallel kernel.
  const Matrix Us = design_matrix_serial(basis, curves, grid);
  CHECK((U.array() == Us.array()).all());

  // Mis-shapen input and unsorted grids are rejected.
  Matrix ragged(2, grid.size() - 1);
  CHECK_THROWS_AS(design_matrix(basis, ragged, grid), std::invalid_argument);
  Vector bad_grid = grid;
  std::swap(bad_grid[3], bad_grid[4]);
  Matrix okshape(2, grid.size());
  okshape.setZero();
  CHECK_THROWS_AS(design_matrix(basis, okshape, bad_grid),
                  std::invalid_argument);
}

TEST_CASE("trapezoid weights on non-uniform grids") {
  Vector grid(4);
  grid << 0.0, 0.1, 0.4, 1.0;
  const Vector w = trapezoid_weights(grid);
  CHECK(w.sum() == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(w[0] == doctest::Approx(0.05).epsilon(1e-14));
  CHECK(w[1] == doctest::Approx(0.2).epsilon(1e-14));
  CHECK(w[2] == doctest::Approx(0.45).epsilon(1e-14));
  CHECK(w[3] == doctest::Approx(0.3).epsilon(1e-14));
}

TEST_CASE("greville coefficients reproduce linear functions") {
  for (const BSplineBasis& basis :
       {BSplineBasis(0.0, 1.0, 5, 2), BSplineBasis(0.0, 3.0, 7, 3)}) {
    const Vector g = basis.greville();
    const Vector coef = (2.0 * g.array() - 0.5).matrix();  // 2t - 0.5
    const Vector ts = linspace(basis.t_start(), basis.t_end(), 101);
    for (int i = 0; i < ts.size(); ++i)
      CHECK(basis.value(coef, ts[i]) ==
            doctest::Approx(2.0 * ts[i] - 0.5).epsilon(1e-12));
  }
}
