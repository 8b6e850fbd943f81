#pragma once

// Single-index propensity score pi(X) = Lambda(g(X'theta)), g expanded in the
// orthonormal Hermite system, fitted by sieve maximum likelihood with the
// identification constraint ||theta|| = 1 and a positive leading coordinate.

#include "sieveate/dataset.hpp"

#include <Eigen/Dense>

#include <optional>
#include <span>

namespace sieveate {

struct FitOptions {
  int max_newton_iters = 100;
  int max_theta_iters = 200;
  double grad_tol = 1e-8;
  int alternation_rounds = 0;  // 0 = one pass of (coefficients, theta)
  double prop_clip = 1e-6;
  double ridge = 1e-10;  // relative to the Hessian trace

  void validate() const;
};

struct SingleIndexModel {
  Eigen::VectorXd theta;
  Eigen::VectorXd coeffs;
  int truncation = 0;
  double loglik = 0.0;
  int iterations = 0;
  bool converged = false;

  /// ghat(w) = sum_j coeffs[j] h_j(w)
  double link(double w) const;
};

/// Optional per-observation likelihood weights (multiplier bootstrap). Empty = unit weights.
using ObsWeights = std::span<const double>;

double logistic(double z);
/// log(1 + exp(z)) without overflow.
double softplus(double z);

/// Unit-norm OLS direction (sum X X')^{-1} sum X D with the identification sign.
Eigen::VectorXd initial_theta(const Dataset& data);

/// Flip so the first coordinate with |v_j| > 1e-8 is positive. Returns true if flipped.
bool normalize_sign(Eigen::VectorXd& theta);

double log_likelihood(const Dataset& data, const Eigen::VectorXd& theta,
                      const Eigen::VectorXd& coeffs, ObsWeights weights = {});

struct LikelihoodGradients {
  Eigen::VectorXd coeffs;
  Eigen::VectorXd theta;
};

LikelihoodGradients likelihood_gradients(const Dataset& data, const Eigen::VectorXd& theta,
                                         const Eigen::VectorXd& coeffs,
                                         ObsWeights weights = {});

struct CoefficientFit {
  Eigen::VectorXd coeffs;
  double loglik = 0.0;
  double grad_norm = 0.0;  // sup-norm at return
  int iterations = 0;
  bool converged = false;
  bool separated = false;
};

/// Logistic regression of D on the k basis features of X'theta by damped Newton.
CoefficientFit fit_coefficients(const Dataset& data, const Eigen::VectorXd& theta, int k,
                                const FitOptions& opts, ObsWeights weights = {},
                                const Eigen::VectorXd* start = nullptr);

struct ThetaFit {
  Eigen::VectorXd theta;
  double loglik = 0.0;
  double grad_norm = 0.0;  // sup-norm of the sphere-projected gradient
  int iterations = 0;
  bool converged = false;
};

/// Maximizes the likelihood over the unit sphere for fixed coefficients.
/// No sign normalization is applied here.
ThetaFit fit_theta(const Dataset& data, const Eigen::VectorXd& coeffs,
                   const Eigen::VectorXd& theta_init, const FitOptions& opts,
                   ObsWeights weights = {});

/// Full fit: OLS start, coefficients, theta, optional alternation, sign rule.
SingleIndexModel fit_single_index(const Dataset& data, int k, const FitOptions& opts = {});

/// Steps (coefficients, theta) only, started from a given unit-norm index.
SingleIndexModel refit_from(const Dataset& data, const Eigen::VectorXd& theta_start, int k,
                            const FitOptions& opts, ObsWeights weights = {});

/// Lambda(ghat(x'theta)) for each row, clamped to [clip, 1 - clip].
Eigen::VectorXd predict_propensity(const SingleIndexModel& model,
                                   const Eigen::MatrixXd& covariates, double clip);

/// Weight on the squared link slope in the bread Q: 1, or pi(1 - pi).
enum class CovarianceVariant { UnitWeight, VarianceWeight };

struct ThetaCovariance {
  Eigen::MatrixXd reduced_cov;  // (d-1) x (d-1), covariance of sqrt(N) V'(theta_hat - theta0)
  Eigen::MatrixXd basis;        // V: d x (d-1), orthonormal complement of theta
  CovarianceVariant variant = CovarianceVariant::UnitWeight;
};

/// Orthonormal basis of the complement of a unit vector (d x (d-1)).
Eigen::MatrixXd complement_basis(const Eigen::VectorXd& unit);

ThetaCovariance estimate_theta_cov(const Dataset& data, const SingleIndexModel& model,
                                   CovarianceVariant variant = CovarianceVariant::UnitWeight,
                                   double clip = 1e-6);

/// Sandwich (V'QV)^{-1} V'WV (V'QV)^{-1}, symmetrized. Exposed for direct testing.
Eigen::MatrixXd sandwich(const Eigen::MatrixXd& basis, const Eigen::MatrixXd& q,
                         const Eigen::MatrixXd& w);

}  // namespace sieveate
