#pragma once

// ATE and variance-weighted ATE as slopes of the propensity-residual regressions
//   Y = (D - pi(X)) beta + U                              (weighted ATE)
//   v(X)^{-1/2} Y = v(X)^{-1/2} (D - pi(X)) gamma + U      (ATE), v = pi (1 - pi)
// with plug-in asymptotic variances and normal confidence intervals.

#include "sieveate/dataset.hpp"
#include "sieveate/index_mle.hpp"
#include "sieveate/truncation_cv.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace sieveate {

enum class Estimand { WeightedAte, Ate };

struct AteEstimate {
  Estimand estimand = Estimand::WeightedAte;
  double point = 0.0;
  double std_error = 0.0;
  double z_stat = 0.0;
  double p_value = 1.0;
  double ci_level = 0.95;
  double ci_lower = 0.0;
  double ci_upper = 0.0;
  long n_used = 0;
  long trim_count = 0;
  /// Plug-in asymptotic variance (sigma^2), before division by n_used.
  double variance = 0.0;
};

/// Two-sided normal quantile z_{1 - (1 - level)/2}.
double normal_critical_value(double ci_level);

AteEstimate weighted_ate(const Dataset& data, const Eigen::VectorXd& pi_hat, double ci_level);

AteEstimate ate(const Dataset& data, const Eigen::VectorXd& pi_hat, double ci_level,
                double trim = 0.0);

enum class BaselineMethod { NaiveDiff, IpwLogistic, RegressionAdjust };

AteEstimate baseline_estimate(const Dataset& data, BaselineMethod method, double ci_level,
                              double prop_clip = 1e-6);

/// Logistic regression of D on (1, X); returns [intercept, slopes...].
Eigen::VectorXd fit_logistic_intercept(const Dataset& data, int max_iters = 100,
                                       double tol = 1e-10);

struct KPolicy {
  enum class Kind { Fixed, DefaultRule, CrossValidate };
  Kind kind = Kind::DefaultRule;
  int k = 0;                    // Fixed
  std::vector<int> candidates;  // CrossValidate; empty = default candidate set
  int folds = 0;                // CrossValidate; 0 = N when N <= 500, else 10
  CvMode mode = CvMode::TreatmentPrediction;
  unsigned long long seed = 0;

  static KPolicy fixed(int k);
  static KPolicy default_rule();
  static KPolicy cross_validate(std::vector<int> candidates = {}, int folds = 0);
};

struct EffectsResult {
  SingleIndexModel model;
  AteEstimate weighted;
  AteEstimate ate;
  Eigen::VectorXd propensities;
  std::optional<CvResult> cv;
};

EffectsResult estimate_effects(const Dataset& data, const KPolicy& policy,
                               const FitOptions& opts = {}, double ci_level = 0.95,
                               double trim = 0.0);

/// Both estimands from supplied propensities, bypassing the model fit.
EffectsResult estimate_effects_with_propensity(const Dataset& data, const Eigen::VectorXd& pi,
                                               double ci_level = 0.95, double trim = 0.0);

std::string to_string(Estimand e);
std::string to_string(BaselineMethod m);
BaselineMethod parse_baseline(const std::string& name);

}  // namespace sieveate
