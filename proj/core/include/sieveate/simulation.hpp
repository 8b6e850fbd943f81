#pragma once

// Synthetic designs for the replication study and the harness that runs them.

#include "sieveate/dataset.hpp"
#include "sieveate/effects.hpp"
#include "sieveate/index_mle.hpp"

#include <Eigen/Dense>

#include <iosfwd>
#include <string>
#include <vector>

namespace sieveate::sim {

enum class LinkKind {
  Sine,               // sin(w)
  Cubic,              // 0.5 (w^3 - w)
  Exp,                // 10 exp(w)
  QuinticExp,         // 10 (w^5 - w^3) + 10 exp(w)
  Bilinear,           // 2 x1 x2
  ProbitThreshold,    // D = 1{w + e > 0}
  CubicThreshold,     // D = 1{w^3 + w^2 + w + e > 0}
  BilinearThreshold,  // D = 1{2 x1 x2 + e > 0}
};

enum class CovariateLaw { StandardNormal, Cauchy };
enum class OutcomeNoise { Normal, Chi2Recentered, Cauchy };

/// Median of the chi-square distribution with one degree of freedom.
inline constexpr double kChi2OneMedian = 0.4549364231;
inline constexpr double kCauchyCap = 1e6;

struct SimulationSetting {
  std::string id;
  Eigen::VectorXd theta0;  // zeros when the design has no single index (10A, 10B)
  bool has_index = true;
  LinkKind link = LinkKind::Sine;
  CovariateLaw covariates = CovariateLaw::StandardNormal;
  OutcomeNoise noise = OutcomeNoise::Normal;
  double beta_d = 1.0;

  Eigen::Index dim() const { return theta0.size(); }
  /// theta0 / ||theta0||; the estimable direction.
  Eigen::VectorXd unit_theta0() const;
};

const std::vector<std::string>& setting_ids();
SimulationSetting setting(const std::string& id);

struct Truth {
  Eigen::VectorXd propensity;  // exact P(D = 1 | X)
  Eigen::VectorXd theta0;
  double beta_d = 1.0;
  long cap_events = 0;  // Cauchy covariates clipped to |x| <= 1e6
};

struct GeneratedData {
  Dataset data;
  Truth truth;
};

/// g0 evaluated at a covariate row (index-free links use the row directly).
double true_link(const SimulationSetting& s, const Eigen::Ref<const Eigen::RowVectorXd>& x);
/// Exact conditional treatment probability at a covariate row.
double true_propensity(const SimulationSetting& s, const Eigen::Ref<const Eigen::RowVectorXd>& x);

GeneratedData generate_dataset(const SimulationSetting& s, long n, unsigned long long seed);

/// Per-replication seed: a fixed 64-bit mix of (master, setting id, N, replication).
unsigned long long replication_seed(unsigned long long master, const std::string& setting_id,
                                    long n, long replication);

enum class EstimatorKind {
  SieveWeighted,  // weighted-ATE slope with sieve propensity
  SieveAte,       // ATE slope with sieve propensity
  OracleWeighted, // weighted-ATE slope with the true propensity
  NaiveDiff,
  IpwLogistic,
  RegressionAdjust,
  Theta,          // per-coordinate index recovery
};

std::string to_string(EstimatorKind e);
EstimatorKind parse_estimator(const std::string& name);

struct StudyRow {
  std::string setting;
  long n = 0;
  std::string estimator;
  long replications = 0;  // successful replications
  double bias = 0.0;
  double std = 0.0;       // population (1/R) standard deviation, so rmse^2 = bias^2 + std^2
  double rmse = 0.0;
  double coverage = 0.0;  // NaN when the estimator has no interval
  long failures = 0;
  bool flagged = false;   // failures exceed 10% of the cell
};

struct StudySummary {
  std::vector<StudyRow> rows;
};

struct StudyConfig {
  std::vector<std::string> settings;
  std::vector<long> sample_sizes;
  long replications = 100;
  std::vector<EstimatorKind> estimators{EstimatorKind::SieveWeighted};
  KPolicy k_policy = KPolicy::default_rule();
  FitOptions fit;
  double ci_level = 0.95;
  unsigned long long seed = 0;
  int threads = 1;
};

/// Raw per-replication output, exposed for harness tests.
struct ReplicationRecord {
  bool failed = false;
  std::vector<double> estimates;  // one per estimator entry (Theta expands to d entries)
  std::vector<double> covered;    // 1/0 per entry, NaN if not applicable
  bool converged = true;
};

StudySummary run_study(const StudyConfig& config);

/// Replications of one (setting, N) cell, indexed by replication number.
std::vector<ReplicationRecord> run_cell(const StudyConfig& config, const std::string& setting_id,
                                        long n);

void write_summary_csv(const StudySummary& summary, std::ostream& out);
void write_summary_text(const StudySummary& summary, std::ostream& out);

}  // namespace sieveate::sim
