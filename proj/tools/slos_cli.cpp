#include <cmath>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <omp.h>

#include "CLI11.hpp"
#include "slos/application.hpp"
#include "slos/simulation.hpp"

namespace fs = std::filesystem;
using namespace slos;

namespace {

struct CommonOpts {
  std::uint64_t seed = 1;
  std::string out_dir = ".";
  int threads = 0;
  bool no_timestamp = false;
};

struct DataOpts {
  std::string data;
  std::string response = "y";
  std::string id;
  std::optional<double> domain_start;
  std::optional<double> domain_end;
  bool periodic = false;
  int num_subintervals = 0;  // 0 picks the sample-size heuristic
  int degree = 3;
};

struct TuneOpts {
  double gamma_lo = -8.0, gamma_hi = -1.0;
  int gamma_count = 8;
  double lambda_lo = -4.0, lambda_hi = 0.0;
  int lambda_count = 10;
  std::string criterion = "bic";
  int cv_folds = 5;
};

void add_common(CLI::App* sub, CommonOpts& c) {
  sub->add_option("--seed", c.seed, "Seed for every random stream");
  sub->add_option("--out-dir", c.out_dir, "Directory for output files");
  sub->add_option("--threads", c.threads,
                  "OpenMP thread count (0 keeps the runtime default)");
  sub->add_flag("--no-timestamp", c.no_timestamp,
                "Omit the timestamp line from run_config.txt");
  sub->set_config("--config", "",
                  "Read options from a key=value file (command line wins)");
}

void add_data(CLI::App* sub, DataOpts& d) {
  sub->add_option("--data", d.data, "CSV file with one curve per row")
      ->required();
  sub->add_option("--response", d.response, "Response column name");
  sub->add_option("--id", d.id, "Optional identifier column name");
  sub->add_option("--domain-start", d.domain_start,
                  "Domain start (defaults to the first grid value)");
  sub->add_option("--domain-end", d.domain_end,
                  "Domain end (defaults to the last grid value)");
  sub->add_flag("--periodic", d.periodic,
                "Constrain the coefficient function to match at the endpoints");
  sub->add_option("--M", d.num_subintervals,
                  "Number of basis subintervals (0 uses max(50, 20 n^1/4))");
  sub->add_option("--degree", d.degree, "Spline degree");
}

void add_tuning(CLI::App* sub, TuneOpts& t) {
  sub->add_option("--gamma-lo", t.gamma_lo, "log10 of the smallest gamma");
  sub->add_option("--gamma-hi", t.gamma_hi, "log10 of the largest gamma");
  sub->add_option("--gamma-count", t.gamma_count, "Number of gamma values");
  sub->add_option("--lambda-lo", t.lambda_lo,
                  "log10 of the smallest relative lambda");
  sub->add_option("--lambda-hi", t.lambda_hi,
                  "log10 of the largest relative lambda");
  sub->add_option("--lambda-count", t.lambda_count, "Number of lambda values");
  sub->add_option("--criterion", t.criterion,
                  "Selection criterion: bic, aic, gcv, or cv");
  sub->add_option("--cv-folds", t.cv_folds, "Folds for criterion=cv");
}

Criterion criterion_from_string(const std::string& name) {
  if (name == "bic") return Criterion::BIC;
  if (name == "aic") return Criterion::AIC;
  if (name == "gcv") return Criterion::GCV;
  if (name == "cv") return Criterion::CV;
  throw std::invalid_argument("unknown criterion '" + name +
                              "' (expected bic, aic, gcv, or cv)");
}

TuningGrid make_grid(const TuneOpts& t) {
  if (t.gamma_count < 1 || t.lambda_count < 1)
    throw std::invalid_argument("grid counts must be positive");
  TuningGrid g;
  g.gamma_values = logspace(t.gamma_lo, t.gamma_hi, t.gamma_count);
  g.lambda_values = logspace(t.lambda_lo, t.lambda_hi, t.lambda_count);
  g.criterion = criterion_from_string(t.criterion);
  g.cv_folds = t.cv_folds;
  return g;
}

FunctionalDataset load_data(const DataOpts& d) {
  CsvLayout layout;
  layout.response_column = d.response;
  if (!d.id.empty()) layout.id_column = d.id;
  layout.domain_start = d.domain_start;
  layout.domain_end = d.domain_end;
  return load_csv(d.data, layout);
}

FitConfig make_fit_config(const DataOpts& d, int n) {
  FitConfig cfg;
  cfg.num_subintervals =
      d.num_subintervals > 0 ? d.num_subintervals : m_heuristic(n);
  cfg.degree = d.degree;
  cfg.periodic = d.periodic;
  return cfg;
}

void apply_threads(const CommonOpts& c) {
  if (c.threads > 0) omp_set_num_threads(c.threads);
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << content;
}

std::string timestamp_line() {
  const std::time_t now = std::time(nullptr);
  char buf[32];
  std::tm tm_utc;
  gmtime_r(&now, &tm_utc);
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return std::string("# run at ") + buf + "\n";
}

using KeyValues = std::vector<std::pair<std::string, std::string>>;

void write_run_config(const fs::path& dir, const CommonOpts& c,
                      const KeyValues& kv) {
  std::ostringstream out;
  if (!c.no_timestamp) out << timestamp_line();
  for (const auto& [k, v] : kv) out << k << "=" << v << "\n";
  write_file(dir / "run_config.txt", out.str());
}

std::string csv_kv(const KeyValues& kv) {
  std::ostringstream out;
  out << "key,value\n";
  for (const auto& [k, v] : kv) out << k << ',' << v << "\n";
  return out.str();
}

std::string beta_curve_csv(const FitResult& fit, int points) {
  std::ostringstream out;
  out << "t,beta\n";
  const Vector ts =
      Vector::LinSpaced(points, fit.basis.t_start(), fit.basis.t_end());
  for (int i = 0; i < ts.size(); ++i)
    out << format_full(ts[i]) << ',' << format_full(fit.beta_value(ts[i]))
        << '\n';
  return out.str();
}

std::string coefficients_csv(const FitResult& fit) {
  std::ostringstream out;
  out << "index,value\n";
  for (int k = 0; k < fit.beta_coef.size(); ++k)
    out << k << ',' << format_full(fit.beta_coef[k]) << '\n';
  return out.str();
}

std::string active_regions_csv(const FitResult& fit) {
  std::ostringstream out;
  out << "start,end\n";
  for (const auto& [a, b] : active_regions(fit))
    out << format_full(a) << ',' << format_full(b) << '\n';
  return out.str();
}

KeyValues data_run_config(const DataOpts& d, const TuneOpts& t,
                          const FitConfig& cfg, const CommonOpts& c) {
  KeyValues kv;
  kv.emplace_back("data", d.data);
  kv.emplace_back("response", d.response);
  if (!d.id.empty()) kv.emplace_back("id", d.id);
  kv.emplace_back("periodic", d.periodic ? "true" : "false");
  kv.emplace_back("M", std::to_string(cfg.num_subintervals));
  kv.emplace_back("degree", std::to_string(cfg.degree));
  kv.emplace_back("criterion", t.criterion);
  kv.emplace_back("gamma_grid", format_full(std::pow(10.0, t.gamma_lo)) +
                                    ".." +
                                    format_full(std::pow(10.0, t.gamma_hi)) +
                                    "/" + std::to_string(t.gamma_count));
  kv.emplace_back("lambda_grid", format_full(std::pow(10.0, t.lambda_lo)) +
                                     ".." +
                                     format_full(std::pow(10.0, t.lambda_hi)) +
                                     "/" + std::to_string(t.lambda_count));
  kv.emplace_back("seed", std::to_string(c.seed));
  return kv;
}

int run_fit(const CommonOpts& c, const DataOpts& d, const TuneOpts& t) {
  apply_threads(c);
  const FunctionalDataset data = load_data(d);
  const FitConfig cfg = make_fit_config(d, data.n());
  const TuningGrid grid = make_grid(t);
  const SelectionResult sel = grid_search(data, cfg, grid, true);
  const FitResult& best = sel.best;

  const fs::path dir(c.out_dir);
  fs::create_directories(dir);
  write_file(dir / "beta_hat.csv", beta_curve_csv(best, 1001));
  write_file(dir / "coefficients.csv", coefficients_csv(best));
  write_file(dir / "active_regions.csv", active_regions_csv(best));
  write_file(dir / "score_table.csv", score_table_csv(sel.table));

  KeyValues metrics;
  metrics.emplace_back("n", std::to_string(data.n()));
  metrics.emplace_back("grid_points", std::to_string(data.k()));
  metrics.emplace_back("M", std::to_string(cfg.num_subintervals));
  metrics.emplace_back("degree", std::to_string(cfg.degree));
  metrics.emplace_back("gamma", format_full(sel.gamma));
  metrics.emplace_back("lambda", format_full(sel.lambda));
  metrics.emplace_back("lambda_scale", format_full(sel.lambda_scale));
  metrics.emplace_back("mu_hat", format_full(best.mu_hat));
  metrics.emplace_back("rss", format_full(best.rss));
  metrics.emplace_back("r_squared",
                       format_full(r_squared(best.fitted, data.responses)));
  metrics.emplace_back(
      "df", format_full(degrees_of_freedom(best, data, DfMode::LqaHat)));
  metrics.emplace_back("residual_variance",
                       format_full(best.residual_variance));
  metrics.emplace_back("iterations", std::to_string(best.iterations));
  metrics.emplace_back("converged", best.converged ? "true" : "false");
  write_file(dir / "metrics.csv", csv_kv(metrics));
  write_run_config(dir, c, data_run_config(d, t, cfg, c));
  std::cout << "fit written to " << dir.string() << " (gamma=" << sel.gamma
            << ", lambda=" << sel.lambda
            << ", r2=" << r_squared(best.fitted, data.responses) << ")\n";
  return 0;
}

int run_tune(const CommonOpts& c, const DataOpts& d, const TuneOpts& t) {
  apply_threads(c);
  const FunctionalDataset data = load_data(d);
  const FitConfig cfg = make_fit_config(d, data.n());
  const TuningGrid grid = make_grid(t);
  const SelectionResult sel = grid_search(data, cfg, grid, true);

  const fs::path dir(c.out_dir);
  fs::create_directories(dir);
  write_file(dir / "score_table.csv", score_table_csv(sel.table));
  KeyValues selection;
  selection.emplace_back("criterion", t.criterion);
  selection.emplace_back("gamma", format_full(sel.gamma));
  selection.emplace_back("lambda", format_full(sel.lambda));
  selection.emplace_back("lambda_scale", format_full(sel.lambda_scale));
  write_file(dir / "selection.csv", csv_kv(selection));
  write_run_config(dir, c, data_run_config(d, t, cfg, c));
  std::cout << "tuning table written to " << dir.string()
            << " (best gamma=" << sel.gamma << ", lambda=" << sel.lambda
            << ")\n";
  return 0;
}

int run_simulate(const CommonOpts& c, const StudyScenario& scenario_in,
                 const std::string& methods_str, const std::string& case_str) {
  apply_threads(c);
  StudyScenario scenario = scenario_in;
  scenario.sim_case = case_from_string(case_str);
  scenario.seed = c.seed;
  std::vector<Method> methods;
  if (methods_str == "auto") {
    methods = {Method::Slos, Method::Smooth, Method::Ols};
    if (scenario.sim_case == SimCase::II) methods.push_back(Method::Oracle);
  } else {
    std::stringstream ss(methods_str);
    std::string tok;
    while (std::getline(ss, tok, ','))
      if (!tok.empty()) methods.push_back(method_from_string(tok));
  }
  const StudyReport report = run_study(scenario, methods, true);

  const fs::path dir(c.out_dir);
  fs::create_directories(dir);
  write_file(dir / "study_long.csv", study_long_csv(report));
  write_file(dir / "study_summary.csv", study_summary_csv(report));
  KeyValues kv;
  kv.emplace_back("case", case_name(scenario.sim_case));
  kv.emplace_back("n", std::to_string(scenario.n));
  kv.emplace_back("replicates", std::to_string(scenario.num_replicates));
  kv.emplace_back("snr", format_full(scenario.snr));
  kv.emplace_back("mu", format_full(scenario.mu));
  kv.emplace_back("grid_points", std::to_string(scenario.num_grid_points));
  kv.emplace_back("test_n", std::to_string(scenario.test_n));
  std::string names;
  for (const Method m : methods)
    names += (names.empty() ? "" : ",") + method_name(m);
  kv.emplace_back("methods", names);
  kv.emplace_back("seed", std::to_string(scenario.seed));
  write_run_config(dir, c, kv);
  std::cout << "study written to " << dir.string() << " ("
            << scenario.num_replicates << " replicates, case "
            << case_name(scenario.sim_case) << ")\n";
  return 0;
}

int run_permtest(const CommonOpts& c, const DataOpts& d, const TuneOpts& t,
                 int permutations, bool reuse) {
  apply_threads(c);
  const FunctionalDataset data = load_data(d);
  const FitConfig cfg = make_fit_config(d, data.n());
  const TuningGrid grid = make_grid(t);
  PermutationConfig pcfg;
  pcfg.num_permutations = permutations;
  pcfg.seed = c.seed;
  pcfg.reuse_selected_penalties = reuse;
  pcfg.parallel = true;
  const PermutationReport report = permutation_test(data, cfg, grid, pcfg);

  const fs::path dir(c.out_dir);
  fs::create_directories(dir);
  std::ostringstream draws;
  draws << "draw,r2\n";
  for (std::size_t b = 0; b < report.permuted_r2.size(); ++b)
    draws << b << ',' << format_full(report.permuted_r2[b]) << '\n';
  write_file(dir / "permutation.csv", draws.str());
  KeyValues kv;
  kv.emplace_back("observed_r2", format_full(report.observed_r2));
  kv.emplace_back("p_value", format_full(report.p_value));
  kv.emplace_back("permutations_requested",
                  std::to_string(report.num_permutations));
  kv.emplace_back("permutations_used",
                  std::to_string(report.permuted_r2.size()));
  kv.emplace_back("failures", std::to_string(report.num_failures));
  kv.emplace_back("selected_gamma", format_full(report.selected_gamma));
  kv.emplace_back("selected_lambda", format_full(report.selected_lambda));
  write_file(dir / "permutation_summary.csv", csv_kv(kv));
  KeyValues rc = data_run_config(d, t, cfg, c);
  rc.emplace_back("permutations", std::to_string(permutations));
  rc.emplace_back("reuse_penalties", reuse ? "true" : "false");
  write_run_config(dir, c, rc);
  std::cout << "permutation test written to " << dir.string()
            << " (observed r2=" << report.observed_r2
            << ", p=" << report.p_value << ")\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Locally sparse estimation for scalar-on-function regression"};
  app.require_subcommand(1);

  auto fit_common = std::make_shared<CommonOpts>();
  auto fit_data = std::make_shared<DataOpts>();
  auto fit_tune = std::make_shared<TuneOpts>();
  CLI::App* fit_cmd = app.add_subcommand(
      "fit", "Tune and fit the locally sparse estimator on a CSV dataset");
  add_common(fit_cmd, *fit_common);
  add_data(fit_cmd, *fit_data);
  add_tuning(fit_cmd, *fit_tune);

  auto tune_common = std::make_shared<CommonOpts>();
  auto tune_data = std::make_shared<DataOpts>();
  auto tune_tune = std::make_shared<TuneOpts>();
  CLI::App* tune_cmd = app.add_subcommand(
      "tune", "Run the tuning grid only and write the score table");
  add_common(tune_cmd, *tune_common);
  add_data(tune_cmd, *tune_data);
  add_tuning(tune_cmd, *tune_tune);

  auto sim_common = std::make_shared<CommonOpts>();
  auto sim_scenario = std::make_shared<StudyScenario>();
  auto sim_case = std::make_shared<std::string>("II");
  auto sim_methods = std::make_shared<std::string>("auto");
  CLI::App* sim_cmd =
      app.add_subcommand("simulate", "Run a Monte Carlo comparison study");
  add_common(sim_cmd, *sim_common);
  sim_cmd->add_option("--case", *sim_case, "Simulation case: I, II, or III");
  sim_cmd->add_option("--n", sim_scenario->n, "Training curves per replicate");
  sim_cmd->add_option("--replicates", sim_scenario->num_replicates,
                      "Number of Monte Carlo replicates");
  sim_cmd->add_option("--snr", sim_scenario->snr, "Signal-to-noise ratio");
  sim_cmd->add_option("--mu", sim_scenario->mu, "True intercept");
  sim_cmd->add_option("--grid-points", sim_scenario->num_grid_points,
                      "Observation grid size");
  sim_cmd->add_option("--test-n", sim_scenario->test_n,
                      "Test curves per replicate");
  sim_cmd->add_option("--methods", *sim_methods,
                      "Comma list of slos,smooth,ols,oracle (auto picks by case)");

  auto perm_common = std::make_shared<CommonOpts>();
  auto perm_data = std::make_shared<DataOpts>();
  auto perm_tune = std::make_shared<TuneOpts>();
  auto perm_count = std::make_shared<int>(200);
  auto perm_reuse = std::make_shared<bool>(false);
  CLI::App* perm_cmd = app.add_subcommand(
      "permtest", "Permutation test of no association between curves and response");
  add_common(perm_cmd, *perm_common);
  add_data(perm_cmd, *perm_data);
  add_tuning(perm_cmd, *perm_tune);
  perm_cmd->add_option("--permutations", *perm_count,
                       "Number of response permutations");
  perm_cmd->add_flag("--reuse-penalties", *perm_reuse,
                     "Reuse the observed fit's penalties instead of re-tuning "
                     "every permutation");

  CLI11_PARSE(app, argc, argv);

  try {
    if (fit_cmd->parsed()) return run_fit(*fit_common, *fit_data, *fit_tune);
    if (tune_cmd->parsed())
      return run_tune(*tune_common, *tune_data, *tune_tune);
    if (sim_cmd->parsed())
      return run_simulate(*sim_common, *sim_scenario, *sim_methods, *sim_case);
    if (perm_cmd->parsed())
      return run_permtest(*perm_common, *perm_data, *perm_tune, *perm_count,
                          *perm_reuse);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
