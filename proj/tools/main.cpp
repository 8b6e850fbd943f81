// sieveate command-line driver: estimate, cv, simulate, link-plot.

#include "sieveate/error.hpp"
#include "sieveate/io.hpp"
#include "sieveate/parallel.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

namespace {

using sieveate::io::RunConfig;

struct Flags {
  std::string config_file;
  std::string input;
  std::string outcome;
  std::string treatment;
  std::vector<std::string> covariates;
  int k = 0;
  std::string k_cv;
  bool k_auto = false;
  int folds = 0;
  std::string cv_mode;
  double trim = 0.0;
  double ci = 0.95;
  unsigned long long seed = 0;
  int boot = 500;
  std::string out = ".";
  bool standardize = false;
  bool no_timestamp = false;
  int alternation_rounds = 0;
  std::vector<std::string> settings;
  std::vector<long> sizes;
  long reps = 0;
  std::vector<std::string> estimators;
  double grid_min = 0.0;
  double grid_max = 0.0;
  int grid_n = 101;
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config_file, "JSON config file; flags override its keys");
  cmd->add_option("--ci", f.ci, "confidence level")->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--seed", f.seed, "master seed");
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_flag("--no-timestamp", f.no_timestamp, "omit the timestamp line in text reports");
  cmd->add_option("--alternation-rounds", f.alternation_rounds,
                  "extra (coefficients, theta) rounds after the first pass");
}

void add_data(CLI::App* cmd, Flags& f) {
  cmd->add_option("--input", f.input, "CSV file with a header row");
  cmd->add_option("--outcome", f.outcome, "outcome column");
  cmd->add_option("--treatment", f.treatment, "binary treatment column");
  cmd->add_option("--covariates", f.covariates, "covariate columns")->delimiter(',');
  cmd->add_flag("--standardize", f.standardize, "z-score covariates before fitting");
  auto* k = cmd->add_option("--k", f.k, "fixed truncation parameter");
  auto* cv = cmd->add_option("--k-cv", f.k_cv, "cross-validate k over a range, e.g. 2..6");
  auto* autok = cmd->add_flag("--k-auto", f.k_auto, "k = floor(N^(1/5))");
  k->excludes(cv)->excludes(autok);
  cv->excludes(autok);
  cmd->add_option("--folds", f.folds, "cross-validation folds (default: N if N <= 500, else 10)");
  cmd->add_option("--cv-mode", f.cv_mode, "treatment | outcome")
      ->check(CLI::IsMember({"treatment", "outcome"}));
}

RunConfig build_config(const std::string& command, const Flags& f, CLI::App* cmd) {
  RunConfig cfg;
  cfg.command = sieveate::io::parse_command(command);
  if (!f.config_file.empty()) {
    std::ifstream in(f.config_file);
    if (!in) throw sieveate::Error(sieveate::ErrorCode::Io, "cannot read config '" + f.config_file + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    sieveate::io::apply_config_json(ss.str(), cfg);
    cfg.command = sieveate::io::parse_command(command);
  }
  auto given = [&](const char* name) {
    try {
      return cmd->get_option(name)->count() > 0;
    } catch (const CLI::OptionNotFound&) {
      return false;
    }
  };
  if (given("--input")) cfg.input_path = f.input;
  if (given("--outcome")) cfg.columns.outcome = f.outcome;
  if (given("--treatment")) cfg.columns.treatment = f.treatment;
  if (given("--covariates")) cfg.columns.covariates = f.covariates;
  if (given("--standardize")) cfg.standardize_covariates = f.standardize;
  if (given("--k")) cfg.k_policy = sieveate::KPolicy::fixed(f.k);
  if (given("--k-cv")) {
    const auto mode = cfg.k_policy.mode;
    const auto folds = cfg.k_policy.folds;
    cfg.k_policy = sieveate::KPolicy::cross_validate(sieveate::io::parse_k_range(f.k_cv), folds);
    cfg.k_policy.mode = mode;
  }
  if (given("--k-auto")) cfg.k_policy = sieveate::KPolicy::default_rule();
  if (given("--folds")) cfg.k_policy.folds = f.folds;
  if (given("--cv-mode")) {
    cfg.k_policy.mode = f.cv_mode == "outcome" ? sieveate::CvMode::OutcomePrediction
                                               : sieveate::CvMode::TreatmentPrediction;
  }
  if (given("--trim")) cfg.trim = f.trim;
  if (given("--ci")) cfg.ci_level = f.ci;
  if (given("--seed")) cfg.seed = f.seed;
  if (given("--boot")) cfg.bootstrap_b = f.boot;
  if (given("--out")) cfg.output_dir = f.out;
  if (given("--no-timestamp")) cfg.timestamp = false;
  if (given("--alternation-rounds")) cfg.fit.alternation_rounds = f.alternation_rounds;
  if (given("--setting")) cfg.settings = f.settings;
  if (given("--n")) cfg.sample_sizes = f.sizes;
  if (given("--reps")) cfg.replications = f.reps;
  if (given("--estimators")) cfg.estimators = f.estimators;
  if (given("--grid-min")) cfg.grid_min = f.grid_min;
  if (given("--grid-max")) cfg.grid_max = f.grid_max;
  if (given("--grid-n")) cfg.grid_count = f.grid_n;
  cfg.threads = sieveate::default_threads();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Single-index sieve propensity scores and treatment effects"};
  app.require_subcommand(1);
  Flags f;

  auto* estimate = app.add_subcommand("estimate", "fit the propensity model and estimate ATE / weighted ATE");
  add_common(estimate, f);
  add_data(estimate, f);
  estimate->add_option("--trim", f.trim, "drop units with pi(1-pi) below trim(1-trim) for the ATE");

  auto* cv = app.add_subcommand("cv", "choose the truncation parameter by cross-validation");
  add_common(cv, f);
  add_data(cv, f);

  auto* simulate = app.add_subcommand("simulate", "Monte Carlo replication study");
  add_common(simulate, f);
  simulate->add_option("--setting", f.settings, "setting id(s), e.g. 5A")->delimiter(',');
  simulate->add_option("--n", f.sizes, "sample size(s)")->delimiter(',');
  simulate->add_option("--reps", f.reps, "replications per cell");
  simulate->add_option("--estimators", f.estimators,
                       "sieve_weighted, sieve_ate, oracle_weighted, naive_diff, ipw_logistic, "
                       "regression_adjust, theta")
      ->delimiter(',');
  auto* sk = simulate->add_option("--k", f.k, "fixed truncation parameter");
  auto* scv = simulate->add_option("--k-cv", f.k_cv, "cross-validate k over a range");
  auto* sauto = simulate->add_flag("--k-auto", f.k_auto, "k = floor(N^(1/5)) (default)");
  sk->excludes(scv)->excludes(sauto);
  scv->excludes(sauto);
  simulate->add_option("--folds", f.folds, "cross-validation folds");

  auto* link = app.add_subcommand("link-plot", "estimated link function with bootstrap band");
  add_common(link, f);
  add_data(link, f);
  link->add_option("--boot", f.boot, "bootstrap replications")->check(CLI::PositiveNumber);
  link->add_option("--grid-min", f.grid_min, "grid lower end (default: 2% index quantile)");
  link->add_option("--grid-max", f.grid_max, "grid upper end (default: 98% index quantile)");
  link->add_option("--grid-n", f.grid_n, "grid points");

  CLI11_PARSE(app, argc, argv);

  CLI::App* chosen = app.get_subcommands().front();
  try {
    const auto cfg = build_config(chosen->get_name(), f, chosen);
    sieveate::io::run_command(cfg, std::cerr);
  } catch (const sieveate::Error& e) {
    std::cerr << "error [" << sieveate::to_string(e.code()) << "] " << e.what() << '\n';
    return 2;
  }
  return 0;
}
