#pragma once

// Orthonormal Hermite system for the weight exp(-w^2/2):
//   h_m(w) = He_m(w) / sqrt(m!),   int h_m h_n exp(-w^2/2) dw = sqrt(2*pi) * delta_mn
// A k-term expansion uses degrees 0..k-1, so entry j (0-based) is h_j.

#include <Eigen/Dense>

#include <span>

namespace sieveate::hermite {

/// [h_0(w), ..., h_{k-1}(w)] by the normalized three-term recurrence.
Eigen::VectorXd eval_basis(double w, int k);

/// [h_0'(w), ..., h_{k-1}'(w)] using h_m' = sqrt(m) h_{m-1}.
Eigen::VectorXd eval_basis_deriv(double w, int k);

/// Second derivatives, h_m'' = sqrt(m (m-1)) h_{m-2}.
Eigen::VectorXd eval_basis_deriv2(double w, int k);

/// Row i holds eval_basis(w[i], k).
Eigen::MatrixXd basis_matrix(std::span<const double> w, int k);
Eigen::MatrixXd basis_deriv_matrix(std::span<const double> w, int k);

/// g(w) = sum_j coeffs[j] h_j(w), and its first two derivatives.
struct SeriesValue {
  double value = 0.0;
  double deriv = 0.0;
  double deriv2 = 0.0;
};
SeriesValue eval_series(double w, const Eigen::VectorXd& coeffs);

/// c_j -> (-1)^j c_j, so that the series at -w equals the original at w.
Eigen::VectorXd parity_transform(const Eigen::VectorXd& coeffs);

struct QuadratureRule {
  Eigen::VectorXd nodes;
  Eigen::VectorXd weights;  // for weight function exp(-w^2/2); sum = sqrt(2*pi)
};

/// Gauss-Hermite rule with `count` nodes. Built once per count and cached;
/// concurrent callers share the same immutable rule.
const QuadratureRule& gauss_hermite(int count);

/// Quadrature approximation of int h_m h_n exp(-w^2/2) dw.
double gram_check(int m, int n, int quadrature_nodes);

}  // namespace sieveate::hermite
