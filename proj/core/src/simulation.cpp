#include "sieveate/simulation.hpp"

#include "sieveate/error.hpp"
#include "sieveate/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <limits>
#include <map>
#include <numbers>
#include <ostream>
#include <random>

namespace sieveate::sim {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

Eigen::VectorXd two_dim() { return vec({0.8, -0.6}); }
Eigen::VectorXd two_dim_unnormalized() { return vec({0.5, -0.5}); }
Eigen::VectorXd six_dim() {
  return vec({std::sqrt(0.2), std::sqrt(0.3), std::sqrt(0.25), -std::sqrt(0.1), std::sqrt(0.08),
              -std::sqrt(0.07)});
}
Eigen::VectorXd six_dim_unnormalized() {
  return vec({std::sqrt(0.2), std::sqrt(0.4), std::sqrt(0.6), -std::sqrt(0.25), std::sqrt(0.1),
              -std::sqrt(0.45)});
}

SimulationSetting make(std::string id, Eigen::VectorXd theta0, LinkKind link,
                       CovariateLaw law = CovariateLaw::StandardNormal,
                       OutcomeNoise noise = OutcomeNoise::Normal) {
  SimulationSetting s;
  s.id = std::move(id);
  s.theta0 = std::move(theta0);
  s.link = link;
  s.covariates = law;
  s.noise = noise;
  s.has_index = link != LinkKind::Bilinear && link != LinkKind::BilinearThreshold;
  return s;
}

const std::map<std::string, SimulationSetting>& registry() {
  static const std::map<std::string, SimulationSetting> table = [] {
    using L = LinkKind;
    std::map<std::string, SimulationSetting> m;
    auto add = [&](SimulationSetting s) { m.emplace(s.id, std::move(s)); };
    add(make("1A", two_dim(), L::Sine));
    add(make("1B", two_dim(), L::Cubic));
    add(make("2A", two_dim_unnormalized(), L::Sine));
    add(make("2B", two_dim_unnormalized(), L::Cubic));
    add(make("3A", six_dim(), L::Sine));
    add(make("3B", six_dim(), L::Cubic));
    add(make("4A", six_dim_unnormalized(), L::Sine));
    add(make("4B", six_dim_unnormalized(), L::Cubic));
    add(make("5A", two_dim(), L::Sine));
    add(make("5B", two_dim(), L::Cubic));
    add(make("5C", six_dim(), L::Sine));
    add(make("5D", six_dim(), L::Cubic));
    add(make("7A", two_dim_unnormalized(), L::Sine));
    add(make("7B", two_dim_unnormalized(), L::Cubic));
    add(make("8A", two_dim(), L::ProbitThreshold));
    add(make("8B", two_dim(), L::CubicThreshold));
    add(make("9A", two_dim(), L::Sine, CovariateLaw::StandardNormal, OutcomeNoise::Chi2Recentered));
    add(make("9B", two_dim(), L::Cubic, CovariateLaw::StandardNormal, OutcomeNoise::Cauchy));
    add(make("10A", Eigen::VectorXd::Zero(2), L::Bilinear));
    add(make("10B", Eigen::VectorXd::Zero(2), L::BilinearThreshold));
    add(make("11A", two_dim(), L::Exp));
    add(make("11B", two_dim(), L::QuinticExp));
    add(make("12A", two_dim(), L::Exp, CovariateLaw::Cauchy));
    add(make("12B", two_dim(), L::QuinticExp, CovariateLaw::Cauchy));
    return m;
  }();
  return table;
}

bool is_threshold(LinkKind k) {
  return k == LinkKind::ProbitThreshold || k == LinkKind::CubicThreshold ||
         k == LinkKind::BilinearThreshold;
}

// Argument of the normal CDF (threshold designs) or of the logistic (others).
double latent(const SimulationSetting& s, const Eigen::Ref<const Eigen::RowVectorXd>& x) {
  const double w = s.has_index ? x.dot(s.theta0.transpose()) : 0.0;
  switch (s.link) {
    case LinkKind::Sine: return std::sin(w);
    case LinkKind::Cubic: return 0.5 * (w * w * w - w);
    case LinkKind::Exp: return 10.0 * std::exp(w);
    case LinkKind::QuinticExp: return 10.0 * (std::pow(w, 5) - w * w * w) + 10.0 * std::exp(w);
    case LinkKind::Bilinear:
    case LinkKind::BilinearThreshold: return 2.0 * x[0] * x[1];
    case LinkKind::ProbitThreshold: return w;
    case LinkKind::CubicThreshold: return w * w * w + w * w + w;
  }
  return kNaN;
}

unsigned long long fnv1a(const std::string& s) {
  unsigned long long h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

struct EntrySpec {
  std::string name;
  double truth = kNaN;
};

std::vector<EntrySpec> entries_for(const StudyConfig& config, const SimulationSetting& s) {
  std::vector<EntrySpec> out;
  for (auto e : config.estimators) {
    if (e == EstimatorKind::Theta) {
      const Eigen::VectorXd t = s.unit_theta0();
      for (Eigen::Index j = 0; j < s.dim(); ++j) {
        out.push_back({"theta_" + std::to_string(j + 1), s.has_index ? t[j] : kNaN});
      }
    } else {
      out.push_back({to_string(e), s.beta_d});
    }
  }
  return out;
}

std::string fmt17(double v) {
  if (std::isnan(v)) return "NA";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

Eigen::VectorXd SimulationSetting::unit_theta0() const {
  if (!has_index) return Eigen::VectorXd::Constant(theta0.size(), kNaN);
  Eigen::VectorXd t = theta0 / theta0.norm();
  normalize_sign(t);
  return t;
}

const std::vector<std::string>& setting_ids() {
  static const std::vector<std::string> ids = {"1A",  "1B",  "2A",  "2B",  "3A",  "3B",
                                               "4A",  "4B",  "5A",  "5B",  "5C",  "5D",
                                               "7A",  "7B",  "8A",  "8B",  "9A",  "9B",
                                               "10A", "10B", "11A", "11B", "12A", "12B"};
  return ids;
}

SimulationSetting setting(const std::string& id) {
  const auto& table = registry();
  const auto it = table.find(id);
  if (it == table.end()) fail(ErrorCode::InvalidArgument, "unknown simulation setting '" + id + "'");
  return it->second;
}

double true_link(const SimulationSetting& s, const Eigen::Ref<const Eigen::RowVectorXd>& x) {
  return latent(s, x);
}

double true_propensity(const SimulationSetting& s, const Eigen::Ref<const Eigen::RowVectorXd>& x) {
  const double z = latent(s, x);
  return is_threshold(s.link) ? normal_cdf(z) : logistic(z);
}

GeneratedData generate_dataset(const SimulationSetting& s, long n, unsigned long long seed) {
  require(n >= 10, "generate_dataset: N must be at least 10");
  const auto d = s.dim();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::cauchy_distribution<double> cauchy;
  std::uniform_real_distribution<double> unif;
  std::chi_squared_distribution<double> chi2(1.0);

  GeneratedData out;
  auto& data = out.data;
  auto& truth = out.truth;
  data.covariates.resize(n, d);
  data.treatments.resize(n);
  data.outcomes.resize(n);
  truth.propensity.resize(n);
  truth.theta0 = s.theta0;
  truth.beta_d = s.beta_d;

  for (long i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      double x = s.covariates == CovariateLaw::Cauchy ? cauchy(rng) : normal(rng);
      if (std::abs(x) > kCauchyCap) {
        x = std::copysign(kCauchyCap, x);
        ++truth.cap_events;
      }
      data.covariates(i, j) = x;
    }
  }
  for (long i = 0; i < n; ++i) {
    const auto row = data.covariates.row(i);
    truth.propensity[i] = true_propensity(s, row);
    if (is_threshold(s.link)) {
      data.treatments[i] = latent(s, row) + normal(rng) > 0.0 ? 1.0 : 0.0;
    } else {
      data.treatments[i] = unif(rng) < truth.propensity[i] ? 1.0 : 0.0;
    }
  }
  for (long i = 0; i < n; ++i) {
    double eps = 0.0;
    switch (s.noise) {
      case OutcomeNoise::Normal: eps = normal(rng); break;
      case OutcomeNoise::Chi2Recentered: eps = chi2(rng) - kChi2OneMedian; break;
      case OutcomeNoise::Cauchy: eps = cauchy(rng); break;
    }
    data.outcomes[i] = s.beta_d * data.treatments[i] + data.covariates.row(i).sum() + eps;
  }
  return out;
}

unsigned long long replication_seed(unsigned long long master, const std::string& setting_id,
                                    long n, long replication) {
  unsigned long long h = mix64(master);
  h = mix64(h ^ fnv1a(setting_id));
  h = mix64(h ^ static_cast<unsigned long long>(n));
  h = mix64(h ^ static_cast<unsigned long long>(replication));
  return h;
}

std::string to_string(EstimatorKind e) {
  switch (e) {
    case EstimatorKind::SieveWeighted: return "sieve_weighted";
    case EstimatorKind::SieveAte: return "sieve_ate";
    case EstimatorKind::OracleWeighted: return "oracle_weighted";
    case EstimatorKind::NaiveDiff: return "naive_diff";
    case EstimatorKind::IpwLogistic: return "ipw_logistic";
    case EstimatorKind::RegressionAdjust: return "regression_adjust";
    case EstimatorKind::Theta: return "theta";
  }
  return "unknown";
}

EstimatorKind parse_estimator(const std::string& name) {
  for (auto e : {EstimatorKind::SieveWeighted, EstimatorKind::SieveAte,
                 EstimatorKind::OracleWeighted, EstimatorKind::NaiveDiff,
                 EstimatorKind::IpwLogistic, EstimatorKind::RegressionAdjust,
                 EstimatorKind::Theta}) {
    if (to_string(e) == name) return e;
  }
  fail(ErrorCode::InvalidArgument, "unknown estimator '" + name + "'");
}

std::vector<ReplicationRecord> run_cell(const StudyConfig& config, const std::string& setting_id,
                                        long n) {
  const auto s = setting(setting_id);
  const auto entries = entries_for(config, s);
  const auto reps = static_cast<std::size_t>(config.replications);
  std::vector<ReplicationRecord> records(reps);

  parallel_for(reps, config.threads, [&](std::size_t r) {
    auto& rec = records[r];
    rec.estimates.assign(entries.size(), kNaN);
    rec.covered.assign(entries.size(), kNaN);
    const auto seed = replication_seed(config.seed, setting_id, n, static_cast<long>(r));
    GeneratedData gen;
    try {
      gen = generate_dataset(s, n, seed);
      gen.data.validate();
    } catch (const Error&) {
      rec.failed = true;
      return;
    }
    const auto& data = gen.data;

    std::optional<EffectsResult> sieve;
    bool sieve_failed = false;
    auto sieve_fit = [&]() -> const EffectsResult* {
      if (!sieve && !sieve_failed) {
        try {
          KPolicy policy = config.k_policy;
          policy.seed = seed;
          sieve = estimate_effects(data, policy, config.fit, config.ci_level, 0.0);
          rec.converged = sieve->model.converged;
        } catch (const Error&) {
          sieve_failed = true;
        }
      }
      return sieve ? &*sieve : nullptr;
    };
    auto record = [&](std::size_t slot, const AteEstimate& est) {
      if (!std::isfinite(est.point)) return;
      rec.estimates[slot] = est.point;
      rec.covered[slot] = (est.ci_lower <= s.beta_d && s.beta_d <= est.ci_upper) ? 1.0 : 0.0;
    };

    std::size_t slot = 0;
    for (auto e : config.estimators) {
      try {
        switch (e) {
          case EstimatorKind::SieveWeighted:
            if (auto* f = sieve_fit()) record(slot, f->weighted);
            ++slot;
            break;
          case EstimatorKind::SieveAte:
            if (auto* f = sieve_fit()) record(slot, f->ate);
            ++slot;
            break;
          case EstimatorKind::OracleWeighted: {
            Eigen::VectorXd pi = gen.truth.propensity.cwiseMax(config.fit.prop_clip)
                                     .cwiseMin(1.0 - config.fit.prop_clip);
            record(slot, weighted_ate(data, pi, config.ci_level));
            ++slot;
            break;
          }
          case EstimatorKind::NaiveDiff:
          case EstimatorKind::IpwLogistic:
          case EstimatorKind::RegressionAdjust: {
            const auto method = e == EstimatorKind::NaiveDiff     ? BaselineMethod::NaiveDiff
                                : e == EstimatorKind::IpwLogistic ? BaselineMethod::IpwLogistic
                                                                  : BaselineMethod::RegressionAdjust;
            record(slot, baseline_estimate(data, method, config.ci_level, config.fit.prop_clip));
            ++slot;
            break;
          }
          case EstimatorKind::Theta: {
            const auto* f = sieve_fit();
            for (Eigen::Index j = 0; j < s.dim(); ++j, ++slot) {
              if (f) rec.estimates[slot] = f->model.theta[j];
            }
            break;
          }
        }
      } catch (const Error&) {
        if (e == EstimatorKind::Theta) {
          slot += static_cast<std::size_t>(s.dim());
        } else {
          ++slot;
        }
      }
    }
  });
  return records;
}

StudySummary run_study(const StudyConfig& config) {
  require(config.replications >= 1, "run_study: replications must be positive");
  require(!config.settings.empty() && !config.sample_sizes.empty() && !config.estimators.empty(),
          "run_study: settings, sample sizes and estimators must be nonempty");
  StudySummary summary;
  for (const auto& id : config.settings) {
    const auto s = setting(id);
    const auto entries = entries_for(config, s);
    for (long n : config.sample_sizes) {
      const auto records = run_cell(config, id, n);
      for (std::size_t e = 0; e < entries.size(); ++e) {
        StudyRow row;
        row.setting = id;
        row.n = n;
        row.estimator = entries[e].name;
        double sum = 0.0, cover = 0.0;
        long cover_count = 0;
        std::vector<double> values;
        for (const auto& rec : records) {
          const double v = rec.failed ? kNaN : rec.estimates[e];
          if (!std::isfinite(v)) {
            ++row.failures;
            continue;
          }
          values.push_back(v);
          sum += v;
          if (!std::isnan(rec.covered[e])) {
            cover += rec.covered[e];
            ++cover_count;
          }
        }
        row.replications = static_cast<long>(values.size());
        row.flagged = row.failures * 10 > config.replications;
        if (values.empty()) {
          row.bias = row.std = row.rmse = row.coverage = kNaN;
        } else {
          const double m = static_cast<double>(values.size());
          const double mean = sum / m;
          double ss = 0.0, mse = 0.0;
          for (double v : values) {
            ss += (v - mean) * (v - mean);
            mse += (v - entries[e].truth) * (v - entries[e].truth);
          }
          row.bias = mean - entries[e].truth;
          row.std = std::sqrt(ss / m);
          row.rmse = std::sqrt(mse / m);
          row.coverage = cover_count ? cover / static_cast<double>(cover_count) : kNaN;
        }
        summary.rows.push_back(row);
      }
    }
  }
  return summary;
}

void write_summary_csv(const StudySummary& summary, std::ostream& out) {
  out << "setting,N,estimator,reps,bias,std,rmse,coverage,failures\n";
  for (const auto& r : summary.rows) {
    out << r.setting << ',' << r.n << ',' << r.estimator << ',' << r.replications << ','
        << fmt17(r.bias) << ',' << fmt17(r.std) << ',' << fmt17(r.rmse) << ','
        << fmt17(r.coverage) << ',' << r.failures << '\n';
  }
}

void write_summary_text(const StudySummary& summary, std::ostream& out) {
  auto block = [&](const char* title, auto field) {
    out << title << '\n';
    out << "  " << std::left << std::setw(8) << "Setting" << std::setw(7) << "N"
        << std::setw(20) << "Estimator" << std::right << std::setw(10) << "Value" << '\n';
    std::string last;
    for (const auto& r : summary.rows) {
      const double v = field(r);
      char buf[32];
      if (std::isnan(v)) {
        std::snprintf(buf, sizeof buf, "NA");
      } else {
        std::snprintf(buf, sizeof buf, "%.4f", v);
      }
      out << "  " << std::left << std::setw(8) << (r.setting == last ? "" : r.setting)
          << std::setw(7) << r.n << std::setw(20) << r.estimator << std::right << std::setw(10)
          << buf << (r.flagged ? "  *" : "") << '\n';
      last = r.setting;
    }
  };
  block("Bias", [](const StudyRow& r) { return r.bias; });
  block("Std", [](const StudyRow& r) { return r.std; });
  block("RMSE", [](const StudyRow& r) { return r.rmse; });
  block("Coverage (95%)", [](const StudyRow& r) { return r.coverage; });
  bool any_flag = false;
  for (const auto& r : summary.rows) any_flag = any_flag || r.flagged;
  if (any_flag) out << "* more than 10% of replications failed in this cell\n";
}

}  // namespace sieveate::sim
