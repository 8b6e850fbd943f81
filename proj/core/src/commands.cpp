#include "sieveate/error.hpp"
#include "sieveate/io.hpp"
#include "sieveate/link_curve.hpp"
#include "sieveate/simulation.hpp"
#include "sieveate/truncation_cv.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace sieveate::io {
namespace {

using nlohmann::ordered_json;

ordered_json number(double v) {
  if (!std::isfinite(v)) return nullptr;
  return v;
}

ordered_json to_json(const Eigen::VectorXd& v) {
  auto arr = ordered_json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(number(v[i]));
  return arr;
}

ordered_json to_json(const AteEstimate& e) {
  ordered_json j;
  j["estimand"] = to_string(e.estimand);
  j["point"] = number(e.point);
  j["std_error"] = number(e.std_error);
  j["z_stat"] = number(e.z_stat);
  j["p_value"] = number(e.p_value);
  j["ci_level"] = e.ci_level;
  j["ci_lower"] = number(e.ci_lower);
  j["ci_upper"] = number(e.ci_upper);
  j["n_used"] = e.n_used;
  j["trim_count"] = e.trim_count;
  return j;
}

ordered_json to_json(const CvResult& cv) {
  ordered_json j;
  j["mode"] = to_string(cv.mode);
  j["folds"] = cv.folds;
  auto candidates = ordered_json::array();
  auto scores = ordered_json::object();
  auto failed = ordered_json::object();
  for (const auto& [k, s] : cv.candidate_scores) {
    candidates.push_back(k);
    scores[std::to_string(k)] = number(s);
    failed[std::to_string(k)] = cv.failed_fits.at(k);
  }
  j["candidates"] = candidates;
  j["scores"] = scores;
  j["failed_fits"] = failed;
  j["chosen_k"] = cv.chosen_k;
  return j;
}

std::string policy_name(const KPolicy& p) {
  switch (p.kind) {
    case KPolicy::Kind::Fixed: return "fixed";
    case KPolicy::Kind::DefaultRule: return "default_rule";
    case KPolicy::Kind::CrossValidate: return "cross_validate";
  }
  return "unknown";
}

std::string timestamp_line() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream out;
  out << "# generated " << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ") << '\n';
  return out.str();
}

// Creates files under the output directory and removes them all if the command fails.
class OutputSet {
 public:
  explicit OutputSet(std::filesystem::path dir) : dir_(std::move(dir)) {}
  OutputSet(const OutputSet&) = delete;
  OutputSet& operator=(const OutputSet&) = delete;
  ~OutputSet() {
    if (committed_) return;
    std::error_code ec;
    for (const auto& p : created_) std::filesystem::remove(p, ec);
    if (created_dir_) std::filesystem::remove(dir_, ec);
  }

  void write(const std::string& name, const std::string& content) {
    if (!std::filesystem::exists(dir_)) {
      std::filesystem::create_directories(dir_);
      created_dir_ = true;
    }
    const auto path = dir_ / name;
    created_.push_back(path);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::Io, "cannot write '" + path.string() + "'");
    out << content;
    if (!out) fail(ErrorCode::Io, "write failed for '" + path.string() + "'");
  }

  void commit() { committed_ = true; }

 private:
  std::filesystem::path dir_;
  std::vector<std::filesystem::path> created_;
  bool created_dir_ = false;
  bool committed_ = false;
};

struct Standardization {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;
};

Standardization standardize(Dataset& data) {
  Standardization s;
  const double n = static_cast<double>(data.size());
  s.mean = data.covariates.colwise().mean().transpose();
  s.scale.resize(data.dim());
  for (Eigen::Index j = 0; j < data.dim(); ++j) {
    const double var = (data.covariates.col(j).array() - s.mean[j]).square().sum() / (n - 1.0);
    const double sd = std::sqrt(var);
    if (!(sd > 0.0)) {
      fail(ErrorCode::DegenerateDesign, "standardize: covariate '" + std::to_string(j + 1) + "' is constant");
    }
    s.scale[j] = sd;
    data.covariates.col(j) = (data.covariates.col(j).array() - s.mean[j]) / sd;
  }
  return s;
}

Dataset load_input(const RunConfig& config, std::optional<Standardization>& stdz) {
  Dataset data = load_csv(*config.input_path, config.columns);
  if (config.standardize_covariates) stdz = standardize(data);
  return data;
}

ordered_json data_header(const RunConfig& config, const Dataset& data,
                         const std::optional<Standardization>& stdz) {
  ordered_json j;
  j["input"] = config.input_path->filename().string();
  j["n"] = data.size();
  j["d"] = data.dim();
  j["outcome"] = config.columns.outcome;
  j["treatment"] = config.columns.treatment;
  j["covariates"] = config.columns.covariates;
  j["standardized"] = stdz.has_value();
  if (stdz) {
    j["covariate_means"] = to_json(stdz->mean);
    j["covariate_scales"] = to_json(stdz->scale);
  }
  return j;
}

std::string fmt_cell(double v, int precision = 4) {
  if (!std::isfinite(v)) return std::isnan(v) ? "NA" : (v > 0 ? "inf" : "-inf");
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

void table_row(std::ostream& out, const std::string& name, const AteEstimate& e) {
  out << std::left << std::setw(20) << name << std::right << std::setw(12) << fmt_cell(e.point)
      << std::setw(10) << fmt_cell(e.std_error) << std::setw(10) << fmt_cell(e.z_stat, 2)
      << std::setw(10) << fmt_cell(e.p_value, 4) << "  [" << fmt_cell(e.ci_lower) << ", "
      << fmt_cell(e.ci_upper) << "]\n";
}

void run_estimate(const RunConfig& config, OutputSet& outputs, std::ostream& log) {
  std::optional<Standardization> stdz;
  const Dataset data = load_input(config, stdz);
  KPolicy policy = config.k_policy;
  policy.seed = config.seed;
  log << "estimate: N=" << data.size() << " d=" << data.dim() << " k-policy=" << policy_name(policy) << '\n';
  const auto result = estimate_effects(data, policy, config.fit, config.ci_level, config.trim);

  ordered_json report;
  report["command"] = "estimate";
  report["data"] = data_header(config, data, stdz);
  ordered_json model;
  model["k_policy"] = policy_name(policy);
  model["k"] = result.model.truncation;
  model["theta"] = to_json(result.model.theta);
  model["coefficients"] = to_json(result.model.coeffs);
  model["loglik"] = number(result.model.loglik);
  model["iterations"] = result.model.iterations;
  model["converged"] = result.model.converged;
  report["model"] = model;
  if (result.cv) report["cv"] = to_json(*result.cv);
  ordered_json estimates;
  estimates["weighted_ate"] = to_json(result.weighted);
  estimates["ate"] = to_json(result.ate);
  report["estimates"] = estimates;
  report["trim"] = config.trim;

  ordered_json baselines = ordered_json::object();
  std::vector<std::pair<std::string, std::optional<AteEstimate>>> rows;
  for (auto m : {BaselineMethod::NaiveDiff, BaselineMethod::IpwLogistic,
                 BaselineMethod::RegressionAdjust}) {
    try {
      const auto est = baseline_estimate(data, m, config.ci_level, config.fit.prop_clip);
      baselines[to_string(m)] = to_json(est);
      rows.emplace_back(to_string(m), est);
    } catch (const Error& e) {
      baselines[to_string(m)] = {{"error", e.what()}};
      rows.emplace_back(to_string(m), std::nullopt);
    }
  }
  report["baselines"] = baselines;

  std::ostringstream text;
  if (config.timestamp) text << timestamp_line();
  text << "Treatment effect estimates (N = " << data.size() << ", k = " << result.model.truncation
       << ", " << fmt_cell(100.0 * config.ci_level, 0) << "% CI)\n";
  text << std::left << std::setw(20) << "Estimator" << std::right << std::setw(12) << "Point"
       << std::setw(10) << "Std" << std::setw(10) << "Z" << std::setw(10) << "p" << "  CI\n";
  table_row(text, "weighted_ate", result.weighted);
  table_row(text, "ate", result.ate);
  for (const auto& [name, est] : rows) {
    if (est) {
      table_row(text, name, *est);
    } else {
      text << std::left << std::setw(20) << name << "  failed\n";
    }
  }
  if (result.ate.trim_count > 0) text << "ATE trimmed units: " << result.ate.trim_count << '\n';
  if (!result.model.converged) text << "warning: propensity fit did not reach the gradient tolerance\n";

  outputs.write("report.json", report.dump(2) + "\n");
  outputs.write("report.txt", text.str());
}

void run_cv(const RunConfig& config, OutputSet& outputs, std::ostream& log) {
  std::optional<Standardization> stdz;
  const Dataset data = load_input(config, stdz);
  const auto& policy = config.k_policy;
  const auto candidates =
      policy.kind == KPolicy::Kind::CrossValidate && !policy.candidates.empty() ? policy.candidates
      : policy.kind == KPolicy::Kind::Fixed ? std::vector<int>{policy.k}
                                             : default_candidates(data.size());
  int folds = policy.folds;
  if (folds == 0) folds = data.size() > 500 ? 10 : static_cast<int>(data.size());
  log << "cv: N=" << data.size() << " folds=" << folds << " candidates=" << candidates.size() << '\n';
  const auto cv = select_k(data, candidates, policy.mode, folds, config.fit, config.seed,
                           config.threads);
  ordered_json report;
  report["command"] = "cv";
  report["data"] = data_header(config, data, stdz);
  report["seed"] = config.seed;
  report["cv"] = to_json(cv);
  report["chosen_k"] = cv.chosen_k;
  outputs.write("cv.json", report.dump(2) + "\n");
}

void run_simulate(const RunConfig& config, OutputSet& outputs, std::ostream& log) {
  sim::StudyConfig study;
  study.settings = config.settings;
  study.sample_sizes = config.sample_sizes;
  study.replications = config.replications;
  study.estimators.clear();
  for (const auto& e : config.estimators) study.estimators.push_back(sim::parse_estimator(e));
  if (study.estimators.empty()) study.estimators = {sim::EstimatorKind::SieveWeighted};
  study.k_policy = config.k_policy;
  study.fit = config.fit;
  study.ci_level = config.ci_level;
  study.seed = config.seed;
  study.threads = config.threads;
  log << "simulate: " << study.settings.size() << " setting(s), " << study.sample_sizes.size()
      << " sample size(s), " << study.replications << " replications\n";
  const auto summary = sim::run_study(study);
  std::ostringstream csv, text;
  sim::write_summary_csv(summary, csv);
  if (config.timestamp) text << timestamp_line();
  sim::write_summary_text(summary, text);
  outputs.write("summary.csv", csv.str());
  outputs.write("summary.txt", text.str());
}

void run_link_plot(const RunConfig& config, OutputSet& outputs, std::ostream& log) {
  std::optional<Standardization> stdz;
  const Dataset data = load_input(config, stdz);
  KPolicy policy = config.k_policy;
  policy.seed = config.seed;
  int k = 0;
  std::optional<CvResult> cv;
  switch (policy.kind) {
    case KPolicy::Kind::Fixed: k = policy.k; break;
    case KPolicy::Kind::DefaultRule: k = default_k(data.size()); break;
    case KPolicy::Kind::CrossValidate: {
      const auto candidates = policy.candidates.empty() ? default_candidates(data.size()) : policy.candidates;
      int folds = policy.folds;
      if (folds == 0) folds = data.size() > 500 ? 10 : static_cast<int>(data.size());
      cv = select_k(data, candidates, policy.mode, folds, config.fit, config.seed, config.threads);
      k = cv->chosen_k;
      break;
    }
  }
  const auto model = fit_single_index(data, k, config.fit);
  GridSpec grid = default_grid(data, model, config.grid_count);
  if (config.grid_min) grid.min = *config.grid_min;
  if (config.grid_max) grid.max = *config.grid_max;
  BootstrapOptions boot;
  boot.replications = config.bootstrap_b;
  boot.conf_level = config.ci_level;
  boot.seed = config.seed;
  boot.threads = config.threads;
  log << "link-plot: N=" << data.size() << " k=" << k << " B=" << boot.replications << '\n';
  const auto curve = link_curve(data, model, grid, boot, config.fit);

  std::ostringstream csv, svg;
  write_curve_csv(curve, csv);
  write_curve_svg(curve, svg);
  ordered_json summary;
  summary["command"] = "link-plot";
  summary["data"] = data_header(config, data, stdz);
  summary["k"] = k;
  summary["theta"] = to_json(model.theta);
  summary["coefficients"] = to_json(model.coeffs);
  summary["replications"] = curve.replications;
  summary["failed_replications"] = curve.failed_replications;
  summary["conf_level"] = curve.conf_level;
  summary["quad_coeffs"] = {number(curve.quad.coeffs[0]), number(curve.quad.coeffs[1]),
                            number(curve.quad.coeffs[2])};
  summary["quad_std_errors"] = {number(curve.quad.std_errors[0]), number(curve.quad.std_errors[1]),
                                number(curve.quad.std_errors[2])};
  summary["quad_bootstrap_se"] = {number(curve.quad_boot_se[0]), number(curve.quad_boot_se[1]),
                                  number(curve.quad_boot_se[2])};
  if (cv) summary["cv"] = to_json(*cv);
  outputs.write("curve.csv", csv.str());
  outputs.write("curve.svg", svg.str());
  outputs.write("link.json", summary.dump(2) + "\n");
}

}  // namespace

Command parse_command(const std::string& name) {
  if (name == "estimate") return Command::Estimate;
  if (name == "cv") return Command::Cv;
  if (name == "simulate") return Command::Simulate;
  if (name == "link-plot") return Command::LinkPlot;
  fail(ErrorCode::InvalidArgument, "unknown command '" + name + "'");
}

std::string to_string(Command c) {
  switch (c) {
    case Command::Estimate: return "estimate";
    case Command::Cv: return "cv";
    case Command::Simulate: return "simulate";
    case Command::LinkPlot: return "link-plot";
  }
  return "unknown";
}

void RunConfig::validate() const {
  if (command == Command::Simulate) {
    require(!settings.empty(), "simulate: at least one --setting is required");
    require(!sample_sizes.empty(), "simulate: at least one --n is required");
    require(replications >= 1, "simulate: --reps must be positive");
  } else {
    require(input_path.has_value(), to_string(command) + ": --input is required");
    require(!columns.outcome.empty(), to_string(command) + ": --outcome is required");
    require(!columns.treatment.empty(), to_string(command) + ": --treatment is required");
    require(!columns.covariates.empty(), to_string(command) + ": --covariates is required");
  }
  require(ci_level > 0.0 && ci_level < 1.0, "--ci must lie in (0, 1)");
  require(trim >= 0.0 && trim < 0.1, "--trim must lie in [0, 0.1)");
  require(bootstrap_b >= 1, "--boot must be positive");
  require(threads >= 1, "thread count must be positive");
  fit.validate();
}

void apply_config_json(const std::string& json_text, RunConfig& config) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Schema, std::string("config: ") + e.what());
  }
  if (!j.is_object()) fail(ErrorCode::Schema, "config: top level must be an object");
  try {
    if (j.contains("command")) config.command = parse_command(j["command"].get<std::string>());
    if (j.contains("input")) config.input_path = j["input"].get<std::string>();
    if (j.contains("outcome")) config.columns.outcome = j["outcome"].get<std::string>();
    if (j.contains("treatment")) config.columns.treatment = j["treatment"].get<std::string>();
    if (j.contains("covariates")) config.columns.covariates = j["covariates"].get<std::vector<std::string>>();
    if (j.contains("k")) config.k_policy = KPolicy::fixed(j["k"].get<int>());
    if (j.contains("k_cv")) {
      const auto mode = config.k_policy.mode;
      config.k_policy = KPolicy::cross_validate(parse_k_range(j["k_cv"].get<std::string>()), config.k_policy.folds);
      config.k_policy.mode = mode;
    }
    if (j.value("k_auto", false)) config.k_policy = KPolicy::default_rule();
    if (j.contains("folds")) config.k_policy.folds = j["folds"].get<int>();
    if (j.contains("cv_mode")) {
      const auto m = j["cv_mode"].get<std::string>();
      if (m == "treatment") {
        config.k_policy.mode = CvMode::TreatmentPrediction;
      } else if (m == "outcome") {
        config.k_policy.mode = CvMode::OutcomePrediction;
      } else {
        fail(ErrorCode::Schema, "config: cv_mode must be 'treatment' or 'outcome'");
      }
    }
    if (j.contains("ci")) config.ci_level = j["ci"].get<double>();
    if (j.contains("trim")) config.trim = j["trim"].get<double>();
    if (j.contains("seed")) config.seed = j["seed"].get<unsigned long long>();
    if (j.contains("boot")) config.bootstrap_b = j["boot"].get<int>();
    if (j.contains("out")) config.output_dir = j["out"].get<std::string>();
    if (j.contains("standardize")) config.standardize_covariates = j["standardize"].get<bool>();
    if (j.contains("timestamp")) config.timestamp = j["timestamp"].get<bool>();
    if (j.contains("settings")) config.settings = j["settings"].get<std::vector<std::string>>();
    if (j.contains("n")) config.sample_sizes = j["n"].get<std::vector<long>>();
    if (j.contains("reps")) config.replications = j["reps"].get<long>();
    if (j.contains("estimators")) config.estimators = j["estimators"].get<std::vector<std::string>>();
    if (j.contains("alternation_rounds")) config.fit.alternation_rounds = j["alternation_rounds"].get<int>();
    if (j.contains("grid_min")) config.grid_min = j["grid_min"].get<double>();
    if (j.contains("grid_max")) config.grid_max = j["grid_max"].get<double>();
    if (j.contains("grid_n")) config.grid_count = j["grid_n"].get<int>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Schema, std::string("config: ") + e.what());
  }
}

void run_command(const RunConfig& config, std::ostream& log) {
  config.validate();
  OutputSet outputs(config.output_dir);
  const char* stage = "run";
  try {
    switch (config.command) {
      case Command::Estimate: stage = "estimate"; run_estimate(config, outputs, log); break;
      case Command::Cv: stage = "cv"; run_cv(config, outputs, log); break;
      case Command::Simulate: stage = "simulate"; run_simulate(config, outputs, log); break;
      case Command::LinkPlot: stage = "link-plot"; run_link_plot(config, outputs, log); break;
    }
  } catch (const Error& e) {
    throw Error(e.code(), std::string(stage) + ": " + e.what());
  } catch (const std::exception& e) {
    throw Error(ErrorCode::Io, std::string(stage) + ": " + e.what());
  }
  outputs.commit();
}

}  // namespace sieveate::io
