#include "sieveate/index_mle.hpp"

#include "sieveate/error.hpp"
#include "sieveate/hermite.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

namespace sieveate {
namespace {

constexpr double kSignTol = 1e-8;
constexpr double kSeparationBound = 1e6;
constexpr double kSeparationResidual = 1e-6;

// Near the optimum the attainable gain falls below the resolution of the mean
// log-likelihood; a step that loses no more than rounding noise is accepted.
bool no_worse(double trial, double target, double current) {
  return trial >= target - 1e-14 * std::max(1.0, std::abs(current));
}

void check_weights(const Dataset& data, ObsWeights weights) {
  if (!weights.empty() && static_cast<Eigen::Index>(weights.size()) != data.size()) {
    fail(ErrorCode::InvalidArgument, "likelihood: weight vector length differs from N");
  }
}

double weight_at(ObsWeights weights, Eigen::Index i) {
  return weights.empty() ? 1.0 : weights[static_cast<std::size_t>(i)];
}

void check_shapes(const Dataset& data, const Eigen::VectorXd& theta,
                  const Eigen::VectorXd& coeffs, ObsWeights weights) {
  const auto n = data.size();
  if (data.treatments.size() != n || data.covariates.rows() != n) {
    fail(ErrorCode::InvalidArgument, "likelihood: dataset row counts differ");
  }
  if (theta.size() != data.dim()) {
    fail(ErrorCode::InvalidArgument, "likelihood: theta has length " +
                                         std::to_string(theta.size()) + ", covariates have " +
                                         std::to_string(data.dim()) + " columns");
  }
  if (coeffs.size() < 1) fail(ErrorCode::InvalidArgument, "likelihood: empty coefficient vector");
  check_weights(data, weights);
}

std::vector<double> index_values(const Eigen::MatrixXd& x, const Eigen::VectorXd& theta) {
  const Eigen::VectorXd w = x * theta;
  return {w.data(), w.data() + w.size()};
}

// Per-observation contribution D g - log(1 + e^g) = D ln L(g) + (1 - D) ln(1 - L(g)).
double contribution(double d, double g) { return d * g - softplus(g); }

double mean_loglik(const Dataset& data, const Eigen::VectorXd& g, ObsWeights weights) {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    sum += weight_at(weights, i) * contribution(data.treatments[i], g[i]);
  }
  return sum / static_cast<double>(g.size());
}

double sup_norm(const Eigen::VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

struct IndexDerivatives {
  double loglik = 0.0;
  Eigen::VectorXd grad;
  Eigen::MatrixXd hess;
};

// Likelihood, gradient and Hessian with respect to theta at fixed coefficients.
IndexDerivatives theta_derivatives(const Dataset& data, const Eigen::VectorXd& theta,
                                   const Eigen::VectorXd& coeffs, ObsWeights weights,
                                   bool want_hess) {
  const auto n = data.size();
  const auto d = data.dim();
  IndexDerivatives out;
  out.grad = Eigen::VectorXd::Zero(d);
  if (want_hess) out.hess = Eigen::MatrixXd::Zero(d, d);
  Eigen::VectorXd curv(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double w = data.covariates.row(i).dot(theta);
    const auto s = hermite::eval_series(w, coeffs);
    const double p = logistic(s.value);
    const double wt = weight_at(weights, i);
    const double resid = wt * (data.treatments[i] - p);
    out.loglik += wt * contribution(data.treatments[i], s.value);
    out.grad.noalias() += (resid * s.deriv) * data.covariates.row(i).transpose();
    curv[i] = wt * (-p * (1.0 - p) * s.deriv * s.deriv) + resid * s.deriv2;
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  out.loglik *= inv_n;
  out.grad *= inv_n;
  if (want_hess) {
    out.hess = data.covariates.transpose() * curv.asDiagonal() * data.covariates;
    out.hess *= inv_n;
  }
  return out;
}

double loglik_at_theta(const Dataset& data, const Eigen::VectorXd& theta,
                       const Eigen::VectorXd& coeffs, ObsWeights weights) {
  const auto n = data.size();
  double sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double w = data.covariates.row(i).dot(theta);
    const double g = hermite::eval_series(w, coeffs).value;
    sum += weight_at(weights, i) * contribution(data.treatments[i], g);
  }
  return sum / static_cast<double>(n);
}

}  // namespace

void FitOptions::validate() const {
  require(max_newton_iters >= 1, "FitOptions: max_newton_iters must be positive");
  require(max_theta_iters >= 1, "FitOptions: max_theta_iters must be positive");
  require(grad_tol > 0.0, "FitOptions: grad_tol must be positive");
  require(alternation_rounds >= 0, "FitOptions: alternation_rounds must be nonnegative");
  require(prop_clip > 0.0 && prop_clip < 0.5, "FitOptions: prop_clip must lie in (0, 0.5)");
  require(ridge >= 0.0, "FitOptions: ridge must be nonnegative");
}

double SingleIndexModel::link(double w) const { return hermite::eval_series(w, coeffs).value; }

double logistic(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double softplus(double z) {
  if (z > 0.0) return z + std::log1p(std::exp(-z));
  return std::log1p(std::exp(z));
}

bool normalize_sign(Eigen::VectorXd& theta) {
  for (Eigen::Index j = 0; j < theta.size(); ++j) {
    if (std::abs(theta[j]) > kSignTol) {
      if (theta[j] < 0.0) {
        theta = -theta;
        return true;
      }
      return false;
    }
  }
  return false;
}

Eigen::VectorXd initial_theta(const Dataset& data) {
  const Eigen::MatrixXd xtx = data.covariates.transpose() * data.covariates;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(xtx, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  const double cond = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
  if (!(cond < 1e12)) {
    std::ostringstream msg;
    msg << "initial_theta: X'X is singular or ill-conditioned (condition number " << cond << ")";
    fail(ErrorCode::DegenerateDesign, msg.str());
  }
  Eigen::VectorXd theta = xtx.ldlt().solve(data.covariates.transpose() * data.treatments);
  const double norm = theta.norm();
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    fail(ErrorCode::DegenerateDesign, "initial_theta: OLS direction is zero");
  }
  theta /= norm;
  normalize_sign(theta);
  return theta;
}

double log_likelihood(const Dataset& data, const Eigen::VectorXd& theta,
                      const Eigen::VectorXd& coeffs, ObsWeights weights) {
  check_shapes(data, theta, coeffs, weights);
  return loglik_at_theta(data, theta, coeffs, weights);
}

LikelihoodGradients likelihood_gradients(const Dataset& data, const Eigen::VectorXd& theta,
                                         const Eigen::VectorXd& coeffs, ObsWeights weights) {
  check_shapes(data, theta, coeffs, weights);
  const auto w = index_values(data.covariates, theta);
  const auto k = static_cast<int>(coeffs.size());
  const Eigen::MatrixXd features = hermite::basis_matrix(w, k);
  const Eigen::VectorXd g = features * coeffs;
  Eigen::VectorXd resid(g.size());
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    resid[i] = weight_at(weights, i) * (data.treatments[i] - logistic(g[i]));
  }
  LikelihoodGradients out;
  out.coeffs = features.transpose() * resid / static_cast<double>(g.size());
  out.theta = theta_derivatives(data, theta, coeffs, weights, false).grad;
  return out;
}

CoefficientFit fit_coefficients(const Dataset& data, const Eigen::VectorXd& theta, int k,
                                const FitOptions& opts, ObsWeights weights,
                                const Eigen::VectorXd* start) {
  require(k >= 1, "fit_coefficients: k must be >= 1");
  opts.validate();
  check_shapes(data, theta, Eigen::VectorXd::Zero(k), weights);

  const auto n = data.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  const auto w = index_values(data.covariates, theta);
  const Eigen::MatrixXd features = hermite::basis_matrix(w, k);

  CoefficientFit fit;
  fit.coeffs = start ? *start : Eigen::VectorXd::Zero(k);
  require(fit.coeffs.size() == k, "fit_coefficients: start vector has wrong length");

  Eigen::VectorXd g = features * fit.coeffs;
  fit.loglik = mean_loglik(data, g, weights);
  Eigen::VectorXd resid(n), curv(n);

  for (int it = 0;; ++it) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double p = logistic(g[i]);
      const double wt = weight_at(weights, i);
      resid[i] = wt * (data.treatments[i] - p);
      curv[i] = wt * p * (1.0 - p);
    }
    const Eigen::VectorXd grad = features.transpose() * resid * inv_n;
    fit.grad_norm = sup_norm(grad);
    fit.iterations = it;
    if (fit.grad_norm <= opts.grad_tol) {
      fit.converged = true;
      break;
    }
    if (it >= opts.max_newton_iters) break;

    Eigen::MatrixXd info = features.transpose() * curv.asDiagonal() * features * inv_n;
    const double scale = std::max(info.trace(), std::numeric_limits<double>::min());
    info.diagonal().array() += opts.ridge * scale;
    const Eigen::VectorXd step = info.ldlt().solve(grad);

    bool accepted = false;
    for (double t = 1.0; t > 1e-12; t *= 0.5) {
      const Eigen::VectorXd trial = fit.coeffs + t * step;
      const Eigen::VectorXd g_trial = features * trial;
      const double ll = mean_loglik(data, g_trial, weights);
      if (no_worse(ll, fit.loglik, fit.loglik)) {
        fit.coeffs = trial;
        g = g_trial;
        fit.loglik = ll;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    if (fit.coeffs.norm() > kSeparationBound) {
      fit.separated = true;
      fit.coeffs *= kSeparationBound / fit.coeffs.norm();
      fit.loglik = mean_loglik(data, features * fit.coeffs, weights);
      break;
    }
  }
  // The gradient decays exponentially along a separating direction, so the
  // tolerance is met long before the norm bound. If every unit is classified
  // with negligible residual, the likelihood still increases along C and the
  // supremum is approached only at the trust bound.
  if (fit.converged && !fit.separated && fit.coeffs.norm() > 0.0) {
    double worst = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (weight_at(weights, i) > 0.0) worst = std::max(worst, std::abs(data.treatments[i] - logistic(g[i])));
    }
    if (worst < kSeparationResidual) {
      fit.separated = true;
      fit.converged = false;
      fit.coeffs *= kSeparationBound / fit.coeffs.norm();
      fit.loglik = mean_loglik(data, features * fit.coeffs, weights);
    }
  }
  return fit;
}

Eigen::MatrixXd complement_basis(const Eigen::VectorXd& unit) {
  const auto d = unit.size();
  if (d <= 1) return Eigen::MatrixXd(d, 0);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(unit);
  const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(d, d);
  return q.rightCols(d - 1);
}

ThetaFit fit_theta(const Dataset& data, const Eigen::VectorXd& coeffs,
                   const Eigen::VectorXd& theta_init, const FitOptions& opts,
                   ObsWeights weights) {
  opts.validate();
  check_shapes(data, theta_init, coeffs, weights);
  require(std::abs(theta_init.norm() - 1.0) <= 1e-8, "fit_theta: theta_init must be unit norm");

  ThetaFit fit;
  fit.theta = theta_init.normalized();
  const auto d = fit.theta.size();
  if (d == 1) {
    fit.loglik = loglik_at_theta(data, fit.theta, coeffs, weights);
    fit.converged = true;
    return fit;
  }

  // Riemannian Newton on the sphere with retraction theta <- (theta + t v)/||.||.
  // Falls back to the projected gradient when the tangent Hessian is not
  // negative definite, and backtracks either way.
  constexpr double kMaxAngle = 0.5;
  for (int it = 0;; ++it) {
    const auto der = theta_derivatives(data, fit.theta, coeffs, weights, true);
    fit.loglik = der.loglik;
    const double radial = fit.theta.dot(der.grad);
    const Eigen::VectorXd proj = der.grad - radial * fit.theta;
    fit.grad_norm = sup_norm(proj);
    fit.iterations = it;
    if (fit.grad_norm <= opts.grad_tol) {
      fit.converged = true;
      break;
    }
    if (it >= opts.max_theta_iters) break;

    const Eigen::MatrixXd basis = complement_basis(fit.theta);
    const Eigen::VectorXd tangent_grad = basis.transpose() * der.grad;
    Eigen::MatrixXd neg_hess = -(basis.transpose() * der.hess * basis);
    neg_hess.diagonal().array() += radial;
    Eigen::LLT<Eigen::MatrixXd> llt(neg_hess);
    Eigen::VectorXd dir;
    if (llt.info() == Eigen::Success) {
      dir = basis * llt.solve(tangent_grad);
    } else {
      dir = proj;
    }
    if (dir.norm() > kMaxAngle) dir *= kMaxAngle / dir.norm();
    const double slope = der.grad.dot(dir);

    bool accepted = false;
    for (double t = 1.0; t > 1e-14; t *= 0.5) {
      const Eigen::VectorXd trial = (fit.theta + t * dir).normalized();
      const double ll = loglik_at_theta(data, trial, coeffs, weights);
      if (no_worse(ll, fit.loglik + 1e-4 * t * slope, fit.loglik)) {
        fit.theta = trial;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
  }
  return fit;
}

namespace {

SingleIndexModel alternate(const Dataset& data, Eigen::VectorXd theta, int k,
                           const FitOptions& opts, ObsWeights weights) {
  auto coef = fit_coefficients(data, theta, k, opts, weights);
  auto index = fit_theta(data, coef.coeffs, theta, opts, weights);
  int iterations = coef.iterations + index.iterations;
  for (int round = 0; round < opts.alternation_rounds; ++round) {
    coef = fit_coefficients(data, index.theta, k, opts, weights, &coef.coeffs);
    index = fit_theta(data, coef.coeffs, index.theta, opts, weights);
    iterations += coef.iterations + index.iterations;
  }

  SingleIndexModel model;
  model.theta = index.theta / index.theta.norm();
  model.coeffs = coef.coeffs;
  model.truncation = k;
  if (normalize_sign(model.theta)) model.coeffs = hermite::parity_transform(model.coeffs);
  model.loglik = loglik_at_theta(data, model.theta, model.coeffs, weights);
  model.iterations = iterations;
  model.converged = coef.converged && index.converged && model.coeffs.allFinite();
  return model;
}

}  // namespace

SingleIndexModel fit_single_index(const Dataset& data, int k, const FitOptions& opts) {
  data.validate();
  opts.validate();
  require(k >= 1, "fit_single_index: k must be >= 1");
  return alternate(data, initial_theta(data), k, opts, {});
}

SingleIndexModel refit_from(const Dataset& data, const Eigen::VectorXd& theta_start, int k,
                            const FitOptions& opts, ObsWeights weights) {
  data.validate();
  opts.validate();
  require(k >= 1, "refit_from: k must be >= 1");
  check_weights(data, weights);
  return alternate(data, theta_start.normalized(), k, opts, weights);
}

Eigen::VectorXd predict_propensity(const SingleIndexModel& model,
                                   const Eigen::MatrixXd& covariates, double clip) {
  if (covariates.cols() != model.theta.size()) {
    fail(ErrorCode::InvalidArgument, "predict_propensity: covariates have " +
                                         std::to_string(covariates.cols()) +
                                         " columns, model expects " +
                                         std::to_string(model.theta.size()));
  }
  require(clip > 0.0 && clip < 0.5, "predict_propensity: clip must lie in (0, 0.5)");
  Eigen::VectorXd out(covariates.rows());
  for (Eigen::Index i = 0; i < covariates.rows(); ++i) {
    const double p = logistic(model.link(covariates.row(i).dot(model.theta)));
    out[i] = std::clamp(p, clip, 1.0 - clip);
  }
  return out;
}

Eigen::MatrixXd sandwich(const Eigen::MatrixXd& basis, const Eigen::MatrixXd& q,
                         const Eigen::MatrixXd& w) {
  const Eigen::MatrixXd bread = basis.transpose() * q * basis;
  const Eigen::MatrixXd meat = basis.transpose() * w * basis;
  if (bread.size() == 0) return bread;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(bread);
  const auto& ev = eig.eigenvalues();
  if (!(ev.minCoeff() > 1e-12 * std::max(1.0, ev.cwiseAbs().maxCoeff()))) {
    std::ostringstream msg;
    msg << "estimate_theta_cov: V'QV is rank deficient (smallest eigenvalue " << ev.minCoeff()
        << ")";
    fail(ErrorCode::RankDeficient, msg.str());
  }
  const Eigen::MatrixXd inv =
      eig.eigenvectors() * ev.cwiseInverse().asDiagonal() * eig.eigenvectors().transpose();
  const Eigen::MatrixXd out = inv * meat * inv;
  return 0.5 * (out + out.transpose());
}

ThetaCovariance estimate_theta_cov(const Dataset& data, const SingleIndexModel& model,
                                   CovarianceVariant variant, double clip) {
  data.validate();
  check_shapes(data, model.theta, model.coeffs, {});
  const auto n = data.size();
  const auto d = data.dim();
  const Eigen::VectorXd pi_hat = predict_propensity(model, data.covariates, clip);
  Eigen::VectorXd q_w(n), w_w(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double slope = hermite::eval_series(data.covariates.row(i).dot(model.theta),
                                              model.coeffs).deriv;
    const double s2 = slope * slope;
    const double m = variant == CovarianceVariant::UnitWeight
                         ? 1.0
                         : pi_hat[i] * (1.0 - pi_hat[i]);
    const double r = data.treatments[i] - pi_hat[i];
    q_w[i] = m * s2;
    w_w[i] = r * r * s2;
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  const Eigen::MatrixXd q = data.covariates.transpose() * q_w.asDiagonal() * data.covariates * inv_n;
  const Eigen::MatrixXd w = data.covariates.transpose() * w_w.asDiagonal() * data.covariates * inv_n;

  ThetaCovariance out;
  out.variant = variant;
  out.basis = complement_basis(model.theta);
  out.reduced_cov = d > 1 ? sandwich(out.basis, q, w) : Eigen::MatrixXd(0, 0);
  return out;
}

}  // namespace sieveate
