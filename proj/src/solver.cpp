#include "slos/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>

namespace slos {

namespace {

// Positive-definite solve with an explicit residual check so near-singular
// systems are reported rather than silently returning garbage.
std::optional<Vector> solve_psd(const Matrix& A, const Vector& rhs) {
  if (A.rows() == 0) return Vector();
  Eigen::LLT<Matrix> llt(A);
  if (llt.info() != Eigen::Success) return std::nullopt;
  Vector x = llt.solve(rhs);
  if (!x.allFinite()) return std::nullopt;
  const double scale =
      A.cwiseAbs().rowwise().sum().maxCoeff() * x.norm() + rhs.norm() + 1e-300;
  if ((A * x - rhs).norm() > 1e-6 * scale) return std::nullopt;
  return x;
}

Matrix submatrix(const Matrix& A, const std::vector<int>& idx) {
  Matrix S(idx.size(), idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i)
    for (std::size_t j = 0; j < idx.size(); ++j)
      S(i, j) = A(idx[i], idx[j]);
  return S;
}

Vector subvector(const Vector& v, const std::vector<int>& idx) {
  Vector s(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) s[i] = v[idx[i]];
  return s;
}

// One regressor's assembled matrices plus its iteration state.
struct Block {
  BSplineBasis basis;
  Matrix U;   // n x pf, folded
  Matrix V;   // pf x pf, folded, without gamma
  std::vector<Matrix> wblk;
  std::vector<int> fold;  // unfolded spline index -> folded index
  std::vector<std::vector<int>> col_support;  // folded col -> subintervals
  int p_unf = 0, pf = 0;
  double gamma = 0.0;
  ScadParams scad;
  int col0 = 0;  // global column offset of this block
  // State.
  std::vector<char> dead;
  double thr = 0.0, c0max = 0.0;
  Vector weights;
};

Block make_block(const Matrix& curves, const Vector& grid, double t0,
                 double t1, const FitConfig& cfg) {
  if (cfg.deriv_order > cfg.degree || cfg.deriv_order < 0)
    throw std::invalid_argument("fit: deriv_order must be in [0, degree]");
  if (cfg.gamma < 0.0) throw std::invalid_argument("fit: gamma must be non-negative");
  validate(cfg.scad);
  Block blk{BSplineBasis(t0, t1, cfg.num_subintervals, cfg.degree),
            {}, {}, {}, {}, {}, 0, 0, cfg.gamma, cfg.scad,
            0, {}, 0.0, 0.0, {}};
  const int p = blk.basis.size();
  blk.p_unf = p;
  blk.fold.resize(p);
  for (int k = 0; k < p; ++k) blk.fold[k] = k;
  blk.pf = p;
  if (cfg.periodic) {
    // Clamped endpoint values equal the extreme coefficients, so
    // beta(t0) = beta(t1) folds the last coefficient into the first.
    blk.fold[p - 1] = 0;
    blk.pf = p - 1;
  }
  const Matrix U_unf = design_matrix(blk.basis, curves, grid);
  const Matrix V_unf = blk.basis.penalty_matrix(cfg.deriv_order);
  blk.U = Matrix::Zero(curves.rows(), blk.pf);
  blk.V = Matrix::Zero(blk.pf, blk.pf);
  for (int k = 0; k < p; ++k) blk.U.col(blk.fold[k]) += U_unf.col(k);
  for (int r = 0; r < p; ++r)
    for (int c = 0; c < p; ++c) blk.V(blk.fold[r], blk.fold[c]) += V_unf(r, c);
  blk.wblk = blk.basis.gram_blocks();
  const int M = blk.basis.num_subintervals(), d = blk.basis.degree();
  blk.col_support.resize(blk.pf);
  for (int k = 0; k < p; ++k)
    for (int j = std::max(0, k - d); j <= std::min(M - 1, k); ++j)
      blk.col_support[blk.fold[k]].push_back(j);
  blk.dead.assign(M, 0);
  blk.weights = Vector::Zero(M);
  return blk;
}

Vector unfold(const Block& blk, const Vector& b_global) {
  Vector out(blk.p_unf);
  for (int k = 0; k < blk.p_unf; ++k) out[k] = b_global[blk.col0 + blk.fold[k]];
  return out;
}

Vector block_norms(const Block& blk, const Vector& b_unf) {
  const int M = blk.basis.num_subintervals(), w = blk.basis.degree() + 1;
  const double scale = M / blk.basis.length();
  Vector c(M);
  for (int j = 0; j < M; ++j) {
    const Vector seg = b_unf.segment(j, w);
    c[j] = std::sqrt(std::max(0.0, scale * seg.dot(blk.wblk[j] * seg)));
  }
  return c;
}

struct CoreOut {
  Vector b;  // global folded solution after shrink/cleanup
  std::vector<Vector> coef;  // per-block unfolded spline coefficients
  double mu = 0.0;
  std::vector<std::vector<bool>> active;
  int iterations = 0;
  bool converged = true;
  std::vector<double> trace;
  double rss = 0.0;
  double residual_variance = 0.0;
  Vector fitted;
  std::vector<Vector> weights;
  std::vector<int> live_columns;
  std::vector<std::vector<int>> live_coef;
  bool descent_ok = true;
};

struct Core {
  Vector y;
  bool intercept;
  std::vector<Block>& blocks;
  int cols = 0;
  Matrix U;    // global [1 | U_1 | ... ]
  Matrix G;    // U^T U
  Vector rhs;  // U^T y
  Matrix Vg;   // gamma-weighted block roughness, zero intercept row/col

  Core(const Vector& y_in, bool intercept_in, std::vector<Block>& blocks_in)
      : y(y_in), intercept(intercept_in), blocks(blocks_in) {
    const Eigen::Index n = y.size();
    int off = intercept ? 1 : 0;
    for (Block& b : blocks) {
      if (b.U.rows() != n)
        throw std::invalid_argument("fit: regressors must share the sample count");
      b.col0 = off;
      off += b.pf;
    }
    cols = off;
    U = Matrix::Zero(n, cols);
    if (intercept) U.col(0).setOnes();
    Vg = Matrix::Zero(cols, cols);
    for (const Block& b : blocks) {
      U.middleCols(b.col0, b.pf) = b.U;
      Vg.block(b.col0, b.col0, b.pf, b.pf) = b.gamma * b.V;
    }
    G = U.transpose() * U;
    rhs = U.transpose() * y;
  }

  std::vector<int> live_list() const {
    std::vector<int> live;
    if (intercept) live.push_back(0);
    for (const Block& b : blocks) {
      for (int f = 0; f < b.pf; ++f) {
        bool ok = true;
        for (int j : b.col_support[f]) {
          if (b.dead[j]) {
            ok = false;
            break;
          }
        }
        if (ok) live.push_back(b.col0 + f);
      }
    }
    return live;
  }

  // LQA weights from the current iterate (dead subintervals excluded).
  void update_weights(const std::vector<Vector>& norms) {
    for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
      Block& b = blocks[bi];
      const double t_over_m = b.basis.length() / b.basis.num_subintervals();
      for (int j = 0; j < b.basis.num_subintervals(); ++j) {
        if (b.dead[j] || b.scad.lambda <= 0.0) {
          b.weights[j] = 0.0;
          continue;
        }
        const double c = norms[bi][j];
        b.weights[j] =
            c > 0.0 ? 0.5 * scad_deriv(c, b.scad) / (c * t_over_m) : 0.0;
      }
    }
  }

  Matrix lqa_global() const {
    Matrix W = Matrix::Zero(cols, cols);
    for (const Block& b : blocks) {
      const int w = b.basis.degree() + 1;
      for (int j = 0; j < b.basis.num_subintervals(); ++j) {
        if (b.weights[j] == 0.0) continue;
        for (int r = 0; r < w; ++r)
          for (int c = 0; c < w; ++c)
            W(b.col0 + b.fold[j + r], b.col0 + b.fold[j + c]) +=
                b.weights[j] * b.wblk[j](r, c);
      }
    }
    return W;
  }

  double rss_of(const Vector& b) const { return (y - U * b).squaredNorm(); }

  // Eq. (6): mean squared residual + roughness + subinterval fSCAD.
  double q_value(const Vector& b) const {
    double q = rss_of(b) / static_cast<double>(y.size());
    for (const Block& blk : blocks) {
      const Vector bf = b.segment(blk.col0, blk.pf);
      q += blk.gamma * bf.dot(blk.V * bf);
      if (blk.scad.lambda > 0.0) {
        const Vector c = block_norms(blk, unfold(blk, b));
        for (int j = 0; j < c.size(); ++j) q += scad(c[j], blk.scad);
      }
    }
    return q;
  }

  // Eq. (13) surrogate with the current weight matrix.
  double r_value(const Vector& b, const Matrix& W) const {
    return rss_of(b) / static_cast<double>(y.size()) +
           b.dot((Vg + W) * b);
  }
};

CoreOut run_core(const Vector& y, bool intercept, std::vector<Block>& blocks,
                 const FitConfig& knobs) {
  Core core(y, intercept, blocks);
  const double n = static_cast<double>(y.size());
  CoreOut out;

  // Step 1: roughness-penalized initial fit on the full system.
  const Matrix A0 = core.G + n * core.Vg;
  std::optional<Vector> b0 = solve_psd(A0, core.rhs);
  if (!b0)
    throw std::runtime_error(
        "ill-conditioned system in the initial roughness-penalized solve");
  Vector b = *b0;
  out.trace.push_back(core.q_value(b));

  bool any_scad = false;
  for (Block& blk : blocks) {
    if (blk.scad.lambda > 0.0) {
      const Vector c0 = block_norms(blk, unfold(blk, b));
      blk.c0max = c0.maxCoeff();
      blk.thr = std::max(knobs.death_factor * blk.c0max, knobs.death_floor);
      any_scad = true;
    }
  }

  std::vector<int> live = core.live_list();
  if (any_scad) {
    // Steps 2-3: reweighted reduced solves until the coefficients and the
    // dead sets both stabilize.
    bool converged = false;
    int it = 0;
    while (it < knobs.max_iterations) {
      ++it;
      std::vector<Vector> norms(blocks.size());
      bool dead_stable = true;
      for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
        Block& blk = blocks[bi];
        norms[bi] = block_norms(blk, unfold(blk, b));
        if (blk.scad.lambda <= 0.0) continue;
        for (int j = 0; j < norms[bi].size(); ++j) {
          if (!blk.dead[j] && norms[bi][j] <= blk.thr) {
            blk.dead[j] = 1;
            dead_stable = false;
          }
        }
      }
      core.update_weights(norms);
      live = core.live_list();
      Matrix W = core.lqa_global();
      Matrix A = core.G + n * (core.Vg + W);
      std::optional<Vector> bl =
          solve_psd(submatrix(A, live), subvector(core.rhs, live));
      if (!bl) {
        // One recovery pass at a 10x larger death threshold.
        for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
          Block& blk = blocks[bi];
          if (blk.scad.lambda <= 0.0) continue;
          for (int j = 0; j < norms[bi].size(); ++j) {
            if (!blk.dead[j] && norms[bi][j] <= 10.0 * blk.thr) {
              blk.dead[j] = 1;
              dead_stable = false;
            }
          }
        }
        core.update_weights(norms);
        live = core.live_list();
        W = core.lqa_global();
        A = core.G + n * (core.Vg + W);
        bl = solve_psd(submatrix(A, live), subvector(core.rhs, live));
        if (!bl)
          throw std::runtime_error("ill-conditioned system at LQA iteration " +
                                   std::to_string(it) +
                                   " (after one 10x shrink-threshold retry)");
      }
      Vector bn = Vector::Zero(core.cols);
      for (std::size_t i = 0; i < live.size(); ++i) bn[live[i]] = (*bl)[i];
      // The new iterate minimizes the convex surrogate over the live
      // subspace, so it cannot lose to the previous iterate projected there.
      Vector prev_proj = Vector::Zero(core.cols);
      for (int c : live) prev_proj[c] = b[c];
      const double r_new = core.r_value(bn, W);
      const double r_old = core.r_value(prev_proj, W);
      if (r_new > r_old + 1e-9 * std::max(1.0, std::abs(r_old)))
        out.descent_ok = false;
      const double rel = (bn - b).norm() / std::max(1.0, b.norm());
      b = bn;
      out.trace.push_back(core.q_value(b));
      if (rel < knobs.convergence_tol && dead_stable) {
        converged = true;
        break;
      }
    }
    out.iterations = it;
    out.converged = converged;

    // Final shrink: drop subintervals that stayed within final_shrink_factor
    // of the initial scale, then clean up stray small coefficients. This is
    // the manual shrink-to-zero step; it runs only on SCAD-penalized blocks.
    if (knobs.final_shrink_factor > 0.0) {
      for (Block& blk : blocks) {
        if (blk.scad.lambda <= 0.0) continue;
        const Vector c = block_norms(blk, unfold(blk, b));
        for (int j = 0; j < c.size(); ++j)
          if (c[j] <= knobs.final_shrink_factor * blk.c0max) blk.dead[j] = 1;
      }
      live = core.live_list();
      std::vector<char> is_live(core.cols, 0);
      for (int c : live) is_live[c] = 1;
      for (int c = 0; c < core.cols; ++c)
        if (!is_live[c]) b[c] = 0.0;
    }
    if (knobs.coef_cleanup_factor > 0.0) {
      for (Block& blk : blocks) {
        if (blk.scad.lambda <= 0.0) continue;
        const double mx = b.segment(blk.col0, blk.pf).cwiseAbs().maxCoeff();
        if (mx <= 0.0) continue;
        for (int f = 0; f < blk.pf; ++f) {
          double& v = b[blk.col0 + f];
          if (std::abs(v) <= knobs.coef_cleanup_factor * mx) v = 0.0;
        }
      }
    }
    // Dead subintervals contribute no weight to the final system.
    for (Block& blk : blocks)
      for (int j = 0; j < blk.basis.num_subintervals(); ++j)
        if (blk.dead[j]) blk.weights[j] = 0.0;
  } else {
    out.iterations = 0;
    out.converged = true;
  }

  out.b = b;
  out.mu = intercept ? b[0] : 0.0;
  out.live_columns = live;
  out.fitted = core.U * b;
  out.rss = (y - out.fitted).squaredNorm();
  for (const Block& blk : blocks) {
    const Vector b_unf = unfold(blk, b);
    out.coef.push_back(b_unf);
    out.weights.push_back(blk.weights);
    const int M = blk.basis.num_subintervals(), w = blk.basis.degree() + 1;
    std::vector<bool> act(M, false);
    for (int j = 0; j < M; ++j)
      for (int k = j; k < j + w; ++k)
        if (b_unf[k] != 0.0) {
          act[j] = true;
          break;
        }
    out.active.push_back(std::move(act));
    std::vector<int> lc;
    std::vector<char> is_live(core.cols, 0);
    for (int c : live) is_live[c] = 1;
    for (int k = 0; k < blk.p_unf; ++k)
      if (is_live[blk.col0 + blk.fold[k]]) lc.push_back(k);
    out.live_coef.push_back(std::move(lc));
  }

  // Effective degrees of freedom of the final reduced system (hat-matrix
  // trace including the LQA term) for the residual variance estimate.
  {
    const Matrix W = core.lqa_global();
    const Matrix A = submatrix(core.G + n * (core.Vg + W), live);
    Matrix Ul(y.size(), live.size());
    for (std::size_t i = 0; i < live.size(); ++i) Ul.col(i) = core.U.col(live[i]);
    Eigen::LLT<Matrix> llt(A);
    double df = std::numeric_limits<double>::quiet_NaN();
    if (llt.info() == Eigen::Success)
      df = llt.solve(Ul.transpose() * Ul).trace();
    out.residual_variance =
        (std::isfinite(df) && n - df > 1e-9)
            ? out.rss / (n - df)
            : std::numeric_limits<double>::quiet_NaN();
  }
  for (double q : out.trace)
    if (!std::isfinite(q))
      throw std::runtime_error("objective trace became non-finite");
  return out;
}

FitResult package_component(const CoreOut& core, const Block& blk,
                            std::size_t bi, const FitConfig& cfg) {
  FitResult fr{blk.basis,
               core.coef[bi],
               core.mu,
               core.active[bi],
               core.iterations,
               core.converged,
               core.trace,
               core.residual_variance,
               core.rss,
               core.fitted,
               core.weights[bi],
               core.live_columns,
               core.live_coef[bi],
               core.descent_ok,
               cfg};
  return fr;
}

}  // namespace

double objective(const SplineFunction& beta, double mu,
                 const FunctionalDataset& data, const FitConfig& config) {
  validate(data);
  if (beta.basis == nullptr || beta.coef.size() != beta.basis->size())
    throw std::invalid_argument("objective: malformed spline function");
  const Matrix U = design_matrix(*beta.basis, data.curves, data.grid);
  const Vector resid =
      data.responses - Vector::Constant(data.n(), mu) - U * beta.coef;
  double q = resid.squaredNorm() / data.n();
  const Matrix V = beta.basis->penalty_matrix(config.deriv_order);
  q += config.gamma * beta.coef.dot(V * beta.coef);
  if (config.scad.lambda > 0.0)
    q += fscad_approx(*beta.basis, beta.coef, config.scad);
  return q;
}

FitResult fit(const FunctionalDataset& data, const FitConfig& config) {
  validate(data);
  std::vector<Block> blocks;
  blocks.push_back(make_block(data.curves, data.grid, data.t_start, data.t_end,
                              config));
  CoreOut core = run_core(data.responses, config.fit_intercept, blocks, config);
  return package_component(core, blocks[0], 0, config);
}

MultiFitResult fit_multi(const std::vector<Regressor>& regressors,
                         const Vector& y,
                         const std::vector<FitConfig>& configs) {
  if (regressors.empty())
    throw std::invalid_argument("fit_multi: need at least one regressor");
  if (regressors.size() != configs.size())
    throw std::invalid_argument("fit_multi: one config per regressor required");
  if (y.size() < 2) throw std::invalid_argument("fit_multi: need at least 2 samples");
  // Iteration controls (tolerances, intercept, shrink factors) come from the
  // first config; gamma/lambda/basis settings stay per-regressor.
  const FitConfig& knobs = configs.front();
  std::vector<Block> blocks;
  for (std::size_t k = 0; k < regressors.size(); ++k)
    blocks.push_back(make_block(regressors[k].curves, regressors[k].grid,
                                regressors[k].t_start, regressors[k].t_end,
                                configs[k]));
  CoreOut core = run_core(y, knobs.fit_intercept, blocks, knobs);
  MultiFitResult out;
  out.mu_hat = core.mu;
  out.iterations = core.iterations;
  out.converged = core.converged;
  out.objective_trace = core.trace;
  out.rss = core.rss;
  out.fitted = core.fitted;
  out.residual_variance = core.residual_variance;
  out.surrogate_descent_ok = core.descent_ok;
  for (std::size_t k = 0; k < regressors.size(); ++k)
    out.components.push_back(package_component(core, blocks[k], k, configs[k]));
  return out;
}

Vector predict(const FitResult& fit, const Matrix& curves, const Vector& grid) {
  const double slack = 1e-9 * fit.basis.length();
  if (grid.size() < 2 || grid.minCoeff() < fit.basis.t_start() - slack ||
      grid.maxCoeff() > fit.basis.t_end() + slack)
    throw std::invalid_argument("predict: grid does not match the training domain");
  const Matrix U = design_matrix(fit.basis, curves, grid);
  return (U * fit.beta_coef).array() + fit.mu_hat;
}

namespace detail {

AssembledSystem assemble_system(const FunctionalDataset& data,
                                const FitConfig& config) {
  Block blk = make_block(data.curves, data.grid, data.t_start, data.t_end,
                         config);
  AssembledSystem sys{blk.basis, {}, {}, blk.fold, blk.pf, config.fit_intercept};
  const int off = config.fit_intercept ? 1 : 0;
  sys.U = Matrix::Zero(data.n(), off + blk.pf);
  if (config.fit_intercept) sys.U.col(0).setOnes();
  sys.U.rightCols(blk.pf) = blk.U;
  sys.Vg = Matrix::Zero(off + blk.pf, off + blk.pf);
  sys.Vg.block(off, off, blk.pf, blk.pf) = config.gamma * blk.V;
  return sys;
}

Matrix assemble_lqa(const BSplineBasis& basis, const Vector& weights,
                    const std::vector<int>& fold, int spline_cols,
                    bool intercept) {
  const int off = intercept ? 1 : 0;
  const int w = basis.degree() + 1;
  Matrix W = Matrix::Zero(off + spline_cols, off + spline_cols);
  const std::vector<Matrix> blocks = basis.gram_blocks();
  for (int j = 0; j < basis.num_subintervals(); ++j) {
    if (weights[j] == 0.0) continue;
    for (int r = 0; r < w; ++r)
      for (int c = 0; c < w; ++c)
        W(off + fold[j + r], off + fold[j + c]) += weights[j] * blocks[j](r, c);
  }
  return W;
}

}  // namespace detail

}  // namespace slos
