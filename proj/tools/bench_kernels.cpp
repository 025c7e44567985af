#include <algorithm>
#include <chrono>
#include <cstdint>
#include <functional>
#include <iostream>
#include <string>

#include <omp.h>

#include "slos/simulation.hpp"

using namespace slos;

namespace {

double seconds(const std::function<void()>& body, int repeats) {
  double best = 1e300;
  for (int r = 0; r < repeats; ++r) {
    const auto start = std::chrono::steady_clock::now();
    body();
    const auto stop = std::chrono::steady_clock::now();
    best = std::min(best, std::chrono::duration<double>(stop - start).count());
  }
  return best;
}

}  // namespace

int main(int argc, char** argv) {
  int n = 2000;
  int repeats = 5;
  if (argc > 1) n = std::stoi(argv[1]);
  if (argc > 2) repeats = std::stoi(argv[2]);

  const Vector grid = Vector::LinSpaced(101, 0.0, 1.0);
  Rng rng(stream_key(7, 0, StreamRole::TrainCovariates));
  const Matrix curves = gen_covariates(n, grid, rng);
  const BSplineBasis basis(0.0, 1.0, m_heuristic(n), 3);

  std::cout << "threads available: " << omp_get_max_threads() << "\n";
  std::cout << "design matrix: " << n << " curves x " << basis.size()
            << " basis functions\n";

  Matrix parallel_result, serial_result;
  const double t_par = seconds(
      [&] { parallel_result = design_matrix(basis, curves, grid); }, repeats);
  const double t_ser = seconds(
      [&] { serial_result = design_matrix_serial(basis, curves, grid); },
      repeats);
  const bool identical =
      (parallel_result.array() == serial_result.array()).all();
  std::cout << "  parallel: " << t_par * 1e3 << " ms\n"
            << "  serial:   " << t_ser * 1e3 << " ms\n"
            << "  speedup:  " << t_ser / t_par << "x\n"
            << "  bitwise identical: " << (identical ? "yes" : "NO") << "\n";

  // A small tuning sweep, the other externally parallel code path.
  const int n_fit = 150;
  Rng cov_rng(stream_key(7, 1, StreamRole::TrainCovariates));
  FunctionalDataset data;
  data.grid = grid;
  data.curves = gen_covariates(n_fit, grid, cov_rng);
  Rng noise_rng(stream_key(7, 1, StreamRole::TrainNoise));
  const auto beta = [](double t) { return true_beta(SimCase::II, t); };
  data.responses =
      gen_responses(data.curves, grid, beta, 1.0, SimCase::II, 4.0, noise_rng)
          .responses;

  std::cout << "tuning sweep: n=" << n_fit << ", "
            << "2 gamma x 19 lambda grid\n";
  auto t0 = std::chrono::steady_clock::now();
  const SelectionResult par_sel = run_slos(data, true);
  auto t1 = std::chrono::steady_clock::now();
  const SelectionResult ser_sel = run_slos(data, false);
  auto t2 = std::chrono::steady_clock::now();
  const double g_par = std::chrono::duration<double>(t1 - t0).count();
  const double g_ser = std::chrono::duration<double>(t2 - t1).count();
  const bool same_pick =
      par_sel.gamma == ser_sel.gamma && par_sel.lambda == ser_sel.lambda &&
      par_sel.best.beta_coef.size() == ser_sel.best.beta_coef.size() &&
      (par_sel.best.beta_coef.array() == ser_sel.best.beta_coef.array()).all();
  std::cout << "  parallel: " << g_par << " s\n"
            << "  serial:   " << g_ser << " s\n"
            << "  speedup:  " << g_ser / g_par << "x\n"
            << "  identical selection: " << (same_pick ? "yes" : "NO") << "\n";

  return (identical && same_pick) ? 0 : 1;
}
