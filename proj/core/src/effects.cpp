#include "sieveate/effects.hpp"

#include "sieveate/error.hpp"

#include <boost/math/distributions/normal.hpp>

#include <cmath>
#include <limits>
#include <string>

namespace sieveate {
namespace {

void check_inputs(const Dataset& data, const Eigen::VectorXd& pi_hat, double ci_level,
                  const char* who) {
  if (pi_hat.size() != data.size() || data.treatments.size() != data.size()) {
    fail(ErrorCode::InvalidArgument, std::string(who) + ": propensity vector length differs from N");
  }
  require(ci_level > 0.0 && ci_level < 1.0, std::string(who) + ": ci_level must lie in (0, 1)");
  for (Eigen::Index i = 0; i < pi_hat.size(); ++i) {
    if (!(pi_hat[i] > 0.0 && pi_hat[i] < 1.0)) {
      fail(ErrorCode::InvalidArgument, std::string(who) + ": propensity at row " +
                                           std::to_string(i + 1) + " is outside (0, 1)");
    }
  }
}

void finish(AteEstimate& est, double ci_level) {
  est.ci_level = ci_level;
  est.std_error = std::sqrt(est.variance / static_cast<double>(est.n_used));
  if (est.std_error > 0.0) {
    est.z_stat = est.point / est.std_error;
  } else {
    est.z_stat = est.point == 0.0 ? 0.0
                                  : std::copysign(std::numeric_limits<double>::infinity(), est.point);
  }
  est.p_value = std::erfc(std::abs(est.z_stat) / std::sqrt(2.0));
  const double half = normal_critical_value(ci_level) * est.std_error;
  est.ci_lower = est.point - half;
  est.ci_upper = est.point + half;
}

AteEstimate from_point_and_variance(Estimand estimand, double point, double variance, long n,
                                    double ci_level) {
  AteEstimate est;
  est.estimand = estimand;
  est.point = point;
  est.variance = std::max(variance, 0.0);
  est.n_used = n;
  finish(est, ci_level);
  return est;
}

}  // namespace

double normal_critical_value(double ci_level) {
  require(ci_level > 0.0 && ci_level < 1.0, "normal_critical_value: level must lie in (0, 1)");
  const boost::math::normal_distribution<double> std_normal;
  return boost::math::quantile(std_normal, 1.0 - 0.5 * (1.0 - ci_level));
}

AteEstimate weighted_ate(const Dataset& data, const Eigen::VectorXd& pi_hat, double ci_level) {
  check_inputs(data, pi_hat, ci_level, "weighted_ate");
  const auto n = data.size();
  require(n > 0, "weighted_ate: empty sample");
  const Eigen::VectorXd resid = data.treatments - pi_hat;
  const double denom = resid.squaredNorm();
  if (!(denom > 0.0)) fail(ErrorCode::DegeneratePropensity, "weighted_ate: sum (D - pi)^2 is zero");

  AteEstimate est;
  est.estimand = Estimand::WeightedAte;
  est.point = resid.dot(data.outcomes) / denom;
  double meat = 0.0, mean_var = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double u = data.outcomes[i] - est.point * resid[i];
    const double s = resid[i] * u;
    meat += s * s;
    mean_var += pi_hat[i] * (1.0 - pi_hat[i]);
  }
  meat /= static_cast<double>(n);
  mean_var /= static_cast<double>(n);
  est.variance = meat / (mean_var * mean_var);
  est.n_used = n;
  est.trim_count = 0;
  finish(est, ci_level);
  return est;
}

AteEstimate ate(const Dataset& data, const Eigen::VectorXd& pi_hat, double ci_level, double trim) {
  check_inputs(data, pi_hat, ci_level, "ate");
  require(trim >= 0.0 && trim < 0.1, "ate: trim must lie in [0, 0.1)");
  const auto n = data.size();
  const double floor = trim * (1.0 - trim);

  std::vector<Eigen::Index> kept;
  kept.reserve(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    if (pi_hat[i] * (1.0 - pi_hat[i]) >= floor) kept.push_back(i);
  }
  if (kept.empty()) fail(ErrorCode::EmptySample, "ate: every unit was trimmed");

  double num = 0.0, denom = 0.0;
  for (auto i : kept) {
    const double v = pi_hat[i] * (1.0 - pi_hat[i]);
    const double r = data.treatments[i] - pi_hat[i];
    num += r * data.outcomes[i] / v;
    denom += r * r / v;
  }
  if (!(denom > 0.0)) fail(ErrorCode::DegeneratePropensity, "ate: weighted sum (D - pi)^2 is zero");

  AteEstimate est;
  est.estimand = Estimand::Ate;
  est.point = num / denom;
  double meat = 0.0;
  for (auto i : kept) {
    const double v = pi_hat[i] * (1.0 - pi_hat[i]);
    const double r = data.treatments[i] - pi_hat[i];
    const double s = r * (data.outcomes[i] - est.point * r) / v;
    meat += s * s;
  }
  est.n_used = static_cast<long>(kept.size());
  est.trim_count = static_cast<long>(n) - est.n_used;
  est.variance = meat / static_cast<double>(est.n_used);
  finish(est, ci_level);
  return est;
}

Eigen::VectorXd fit_logistic_intercept(const Dataset& data, int max_iters, double tol) {
  const auto n = data.size();
  const auto p = data.dim() + 1;
  Eigen::MatrixXd z(n, p);
  z.col(0).setOnes();
  z.rightCols(p - 1) = data.covariates;
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  auto loglik = [&](const Eigen::VectorXd& b) {
    const Eigen::VectorXd eta = z * b;
    double s = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) s += data.treatments[i] * eta[i] - softplus(eta[i]);
    return s / static_cast<double>(n);
  };
  double ll = loglik(beta);
  for (int it = 0; it <= max_iters; ++it) {
    const Eigen::VectorXd eta = z * beta;
    Eigen::VectorXd resid(n), curv(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double pr = logistic(eta[i]);
      resid[i] = data.treatments[i] - pr;
      curv[i] = pr * (1.0 - pr);
    }
    const Eigen::VectorXd grad = z.transpose() * resid / static_cast<double>(n);
    if (grad.cwiseAbs().maxCoeff() <= tol) return beta;
    if (it == max_iters) break;
    const Eigen::MatrixXd info = z.transpose() * curv.asDiagonal() * z / static_cast<double>(n);
    const Eigen::VectorXd step = info.ldlt().solve(grad);
    bool accepted = false;
    for (double t = 1.0; t > 1e-12; t *= 0.5) {
      const Eigen::VectorXd trial = beta + t * step;
      const double ll_trial = loglik(trial);
      if (ll_trial >= ll - 1e-14 * std::max(1.0, std::abs(ll))) {
        beta = trial;
        ll = ll_trial;
        accepted = true;
        break;
      }
    }
    if (!accepted || beta.norm() > 1e6) break;
  }
  fail(ErrorCode::InvalidArgument, "ipw_logistic: logistic propensity fit did not converge");
}

AteEstimate baseline_estimate(const Dataset& data, BaselineMethod method, double ci_level,
                              double prop_clip) {
  require(ci_level > 0.0 && ci_level < 1.0, "baseline_estimate: ci_level must lie in (0, 1)");
  const auto n = data.size();
  if (data.treatments.size() != n || data.covariates.rows() != n) {
    fail(ErrorCode::InvalidArgument, "baseline_estimate: dataset row counts differ");
  }
  const double n1 = data.treatments.sum();
  const double n0 = static_cast<double>(n) - n1;
  if (n1 < 1.0 || n0 < 1.0) fail(ErrorCode::InvalidArgument, "baseline_estimate: a treatment arm is empty");

  switch (method) {
    case BaselineMethod::NaiveDiff: {
      double s1 = 0.0, s0 = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        (data.treatments[i] == 1.0 ? s1 : s0) += data.outcomes[i];
      }
      const double m1 = s1 / n1, m0 = s0 / n0;
      double ss1 = 0.0, ss0 = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (data.treatments[i] == 1.0) {
          ss1 += (data.outcomes[i] - m1) * (data.outcomes[i] - m1);
        } else {
          ss0 += (data.outcomes[i] - m0) * (data.outcomes[i] - m0);
        }
      }
      const double v1 = n1 > 1.0 ? ss1 / (n1 - 1.0) : 0.0;
      const double v0 = n0 > 1.0 ? ss0 / (n0 - 1.0) : 0.0;
      // variance reported per unit so that std_error = sqrt(variance / n)
      const double var_point = v1 / n1 + v0 / n0;
      return from_point_and_variance(Estimand::Ate, m1 - m0, var_point * static_cast<double>(n),
                                     static_cast<long>(n), ci_level);
    }
    case BaselineMethod::IpwLogistic: {
      const Eigen::VectorXd beta = fit_logistic_intercept(data);
      Eigen::VectorXd p(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        const double eta = beta[0] + data.covariates.row(i).dot(beta.tail(beta.size() - 1));
        p[i] = std::clamp(logistic(eta), prop_clip, 1.0 - prop_clip);
      }
      double a1 = 0.0, b1 = 0.0, a0 = 0.0, b0 = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double d = data.treatments[i];
        a1 += d * data.outcomes[i] / p[i];
        b1 += d / p[i];
        a0 += (1.0 - d) * data.outcomes[i] / (1.0 - p[i]);
        b0 += (1.0 - d) / (1.0 - p[i]);
      }
      const double mu1 = a1 / b1, mu0 = a0 / b0;
      const double m1 = b1 / static_cast<double>(n), m0 = b0 / static_cast<double>(n);
      double meat = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double d = data.treatments[i];
        const double psi = d * (data.outcomes[i] - mu1) / p[i] / m1 -
                           (1.0 - d) * (data.outcomes[i] - mu0) / (1.0 - p[i]) / m0;
        meat += psi * psi;
      }
      return from_point_and_variance(Estimand::Ate, mu1 - mu0, meat / static_cast<double>(n),
                                     static_cast<long>(n), ci_level);
    }
    case BaselineMethod::RegressionAdjust: {
      const auto p = data.dim() + 2;
      Eigen::MatrixXd z(n, p);
      z.col(0).setOnes();
      z.col(1) = data.treatments;
      z.rightCols(p - 2) = data.covariates;
      Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(z);
      if (qr.rank() < p) fail(ErrorCode::RankDeficient, "regression_adjust: design is rank deficient");
      const Eigen::VectorXd coef = qr.solve(data.outcomes);
      const Eigen::VectorXd e = data.outcomes - z * coef;
      const Eigen::MatrixXd bread = (z.transpose() * z).inverse();
      const Eigen::MatrixXd meat = z.transpose() * e.cwiseAbs2().asDiagonal() * z;
      const Eigen::MatrixXd cov = bread * meat * bread;
      return from_point_and_variance(Estimand::Ate, coef[1], cov(1, 1) * static_cast<double>(n),
                                     static_cast<long>(n), ci_level);
    }
  }
  fail(ErrorCode::InvalidArgument, "baseline_estimate: unknown method");
}

KPolicy KPolicy::fixed(int k) {
  KPolicy p;
  p.kind = Kind::Fixed;
  p.k = k;
  return p;
}

KPolicy KPolicy::default_rule() { return KPolicy{}; }

KPolicy KPolicy::cross_validate(std::vector<int> candidates, int folds) {
  KPolicy p;
  p.kind = Kind::CrossValidate;
  p.candidates = std::move(candidates);
  p.folds = folds;
  return p;
}

namespace {

template <typename F>
auto staged(const char* stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    throw Error(e.code(), std::string(stage) + ": " + e.what());
  }
}

}  // namespace

EffectsResult estimate_effects(const Dataset& data, const KPolicy& policy, const FitOptions& opts,
                               double ci_level, double trim) {
  staged("validate", [&] {
    data.validate();
    opts.validate();
  });
  EffectsResult out;
  int k = 0;
  switch (policy.kind) {
    case KPolicy::Kind::Fixed:
      require(policy.k >= 1, "estimate_effects: fixed k must be >= 1");
      k = policy.k;
      break;
    case KPolicy::Kind::DefaultRule:
      k = default_k(data.size());
      break;
    case KPolicy::Kind::CrossValidate: {
      const auto candidates =
          policy.candidates.empty() ? default_candidates(data.size()) : policy.candidates;
      int folds = policy.folds;
      if (folds == 0) folds = data.size() > 500 ? 10 : static_cast<int>(data.size());
      out.cv = staged("cross-validation", [&] {
        return select_k(data, candidates, policy.mode, folds, opts, policy.seed);
      });
      k = out.cv->chosen_k;
      break;
    }
  }
  out.model = staged("propensity fit", [&] { return fit_single_index(data, k, opts); });
  out.propensities = predict_propensity(out.model, data.covariates, opts.prop_clip);
  out.weighted = staged("weighted ATE", [&] { return weighted_ate(data, out.propensities, ci_level); });
  out.ate = staged("ATE", [&] { return ate(data, out.propensities, ci_level, trim); });
  return out;
}

EffectsResult estimate_effects_with_propensity(const Dataset& data, const Eigen::VectorXd& pi,
                                               double ci_level, double trim) {
  EffectsResult out;
  out.propensities = pi;
  out.weighted = weighted_ate(data, pi, ci_level);
  out.ate = ate(data, pi, ci_level, trim);
  return out;
}

std::string to_string(Estimand e) { return e == Estimand::Ate ? "ate" : "weighted_ate"; }

std::string to_string(BaselineMethod m) {
  switch (m) {
    case BaselineMethod::NaiveDiff: return "naive_diff";
    case BaselineMethod::IpwLogistic: return "ipw_logistic";
    case BaselineMethod::RegressionAdjust: return "regression_adjust";
  }
  return "unknown";
}

BaselineMethod parse_baseline(const std::string& name) {
  if (name == "naive_diff") return BaselineMethod::NaiveDiff;
  if (name == "ipw_logistic") return BaselineMethod::IpwLogistic;
  if (name == "regression_adjust") return BaselineMethod::RegressionAdjust;
  fail(ErrorCode::InvalidArgument, "unknown baseline method '" + name + "'");
}

}  // namespace sieveate
