#include "slos/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace slos {

namespace {

// Connected components of [t0, t1] minus the null intervals.
std::vector<std::pair<double, double>> support_components(
    const NullRegionSpec& null_region, double t0, double t1) {
  std::vector<std::pair<double, double>> nulls = null_region.intervals;
  std::sort(nulls.begin(), nulls.end());
  for (std::size_t i = 0; i < nulls.size(); ++i) {
    auto& [a, b] = nulls[i];
    a = std::max(a, t0);
    b = std::min(b, t1);
    if (!(b >= a))
      throw std::invalid_argument("fit_oracle: malformed null interval");
    if (i > 0 && a < nulls[i - 1].second)
      throw std::invalid_argument("fit_oracle: null intervals must be disjoint");
  }
  std::vector<std::pair<double, double>> comps;
  const double tiny = 1e-12 * (t1 - t0);
  double cursor = t0;
  for (const auto& [a, b] : nulls) {
    if (a > cursor + tiny) comps.emplace_back(cursor, a);
    cursor = std::max(cursor, b);
  }
  if (t1 > cursor + tiny) comps.emplace_back(cursor, t1);
  return comps;
}

std::vector<int> grid_indices_within(const Vector& grid, double a, double b) {
  std::vector<int> idx;
  const double eps = 1e-12 * (grid[grid.size() - 1] - grid[0]);
  for (int k = 0; k < grid.size(); ++k)
    if (grid[k] >= a - eps && grid[k] <= b + eps) idx.push_back(k);
  return idx;
}

}  // namespace

FitResult fit_ols(const FunctionalDataset& data, int M, int d) {
  if (data.n() < M + d)
    throw std::runtime_error(
        "fit_ols: ill-conditioned system (fewer samples than basis functions)");
  return fit_smooth(data, M, d, 0.0);
}

FitResult fit_smooth(const FunctionalDataset& data, int M, int d,
                     double gamma) {
  FitConfig cfg;
  cfg.gamma = gamma;
  cfg.scad.lambda = 0.0;
  cfg.num_subintervals = M;
  cfg.degree = d;
  return fit(data, cfg);
}

double OracleFit::beta_value(double t) const {
  for (std::size_t c = 0; c < components.size(); ++c)
    if (t >= components[c].first && t <= components[c].second)
      return bases[c].value(coefs[c], t);
  return 0.0;
}

Vector OracleFit::predict(const Matrix& curves, const Vector& grid) const {
  Vector out = Vector::Constant(curves.rows(), mu_hat);
  for (std::size_t c = 0; c < components.size(); ++c) {
    const std::vector<int> idx =
        grid_indices_within(grid, components[c].first, components[c].second);
    if (idx.size() < 2) continue;
    Vector sub_grid(idx.size());
    Matrix sub_curves(curves.rows(), idx.size());
    for (std::size_t k = 0; k < idx.size(); ++k) {
      sub_grid[k] = grid[idx[k]];
      sub_curves.col(k) = curves.col(idx[k]);
    }
    out += design_matrix(bases[c], sub_curves, sub_grid) * coefs[c];
  }
  return out;
}

OracleFit fit_oracle(const FunctionalDataset& data,
                     const NullRegionSpec& null_region, int num_knots, int d,
                     double gamma) {
  validate(data);
  if (num_knots < 1)
    throw std::invalid_argument("fit_oracle: need a positive knot budget");
  const auto comps = support_components(null_region, data.t_start, data.t_end);
  if (comps.empty())
    throw std::invalid_argument("fit_oracle: non-null region is empty");

  double total_len = 0.0;
  for (const auto& [a, b] : comps) total_len += b - a;
  std::vector<Regressor> regs;
  std::vector<FitConfig> configs;
  for (const auto& [a, b] : comps) {
    const std::vector<int> idx = grid_indices_within(data.grid, a, b);
    if (idx.size() < 2)
      throw std::invalid_argument(
          "fit_oracle: a support component contains fewer than 2 grid points");
    Regressor reg;
    reg.t_start = a;
    reg.t_end = b;
    reg.grid.resize(idx.size());
    reg.curves.resize(data.n(), idx.size());
    for (std::size_t k = 0; k < idx.size(); ++k) {
      reg.grid[k] = data.grid[idx[k]];
      reg.curves.col(k) = data.curves.col(idx[k]);
    }
    regs.push_back(std::move(reg));
    FitConfig cfg;
    cfg.gamma = gamma;
    cfg.scad.lambda = 0.0;
    cfg.num_subintervals = std::max(
        1, static_cast<int>(std::lround(num_knots * (b - a) / total_len)));
    cfg.degree = d;
    configs.push_back(cfg);
  }

  const MultiFitResult multi = fit_multi(regs, data.responses, configs);
  OracleFit out;
  out.components = comps;
  for (const FitResult& comp : multi.components) {
    out.bases.push_back(comp.basis);
    out.coefs.push_back(comp.beta_coef);
  }
  out.mu_hat = multi.mu_hat;
  out.rss = multi.rss;
  out.fitted = multi.fitted;
  return out;
}

}  // namespace slos
