#include "sieveate/hermite.hpp"

#include "sieveate/error.hpp"

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <string>

namespace sieveate::hermite {
namespace {

void check_args(double w, int k) {
  if (k < 1) fail(ErrorCode::InvalidArgument, "hermite: order count k must be >= 1, got " + std::to_string(k));
  if (!std::isfinite(w)) fail(ErrorCode::InvalidArgument, "hermite: evaluation point must be finite");
}

// Fills out[0..k) with h_0..h_{k-1}; no argument checks.
template <typename Out>
void fill_basis(double w, int k, Out&& out) {
  double prev = 1.0;
  out(0, prev);
  if (k == 1) return;
  double cur = w;
  out(1, cur);
  for (int m = 1; m + 1 < k; ++m) {
    const double next = (w * cur - std::sqrt(static_cast<double>(m)) * prev) /
                        std::sqrt(static_cast<double>(m + 1));
    prev = cur;
    cur = next;
    out(m + 1, cur);
  }
}

QuadratureRule build_rule(int count) {
  // Golub-Welsch: eigenvalues of the symmetric Jacobi matrix of the
  // normalized recurrence are the nodes.
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(count, count);
  for (int i = 1; i < count; ++i) {
    jacobi(i, i - 1) = jacobi(i - 1, i) = std::sqrt(static_cast<double>(i));
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(jacobi, Eigen::EigenvaluesOnly);
  QuadratureRule rule;
  rule.nodes = solver.eigenvalues();
  rule.weights.resize(count);

  // Eigenvector-based weights lose all relative accuracy in the tails, so the
  // nodes are polished by Newton on h_count and weights use the closed form
  //   w_i = sqrt(2 pi) / (count * h_{count-1}(x_i)^2).
  const double sqrt_n = std::sqrt(static_cast<double>(count));
  for (int i = 0; i < count; ++i) {
    double x = rule.nodes[i];
    double h_nm1 = 0.0;
    for (int it = 0; it < 4; ++it) {
      double h_n = 0.0;
      fill_basis(x, count + 1, [&](int m, double v) {
        if (m == count - 1) h_nm1 = v;
        if (m == count) h_n = v;
      });
      const double step = h_n / (sqrt_n * h_nm1);
      x -= step;
      if (std::abs(step) <= 1e-16 * std::max(1.0, std::abs(x))) break;
    }
    fill_basis(x, count, [&](int m, double v) {
      if (m == count - 1) h_nm1 = v;
    });
    rule.nodes[i] = x;
    rule.weights[i] = std::sqrt(2.0 * std::numbers::pi) / (count * h_nm1 * h_nm1);
  }
  return rule;
}

}  // namespace

Eigen::VectorXd eval_basis(double w, int k) {
  check_args(w, k);
  Eigen::VectorXd out(k);
  fill_basis(w, k, [&](int m, double v) { out[m] = v; });
  return out;
}

Eigen::VectorXd eval_basis_deriv(double w, int k) {
  check_args(w, k);
  Eigen::VectorXd out(k);
  out[0] = 0.0;
  fill_basis(w, k - 1 > 0 ? k - 1 : 1, [&](int m, double v) {
    if (m + 1 < k) out[m + 1] = std::sqrt(static_cast<double>(m + 1)) * v;
  });
  return out;
}

Eigen::VectorXd eval_basis_deriv2(double w, int k) {
  check_args(w, k);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(k);
  if (k < 3) return out;
  fill_basis(w, k - 2, [&](int m, double v) {
    const double deg = m + 2;
    out[m + 2] = std::sqrt(deg * (deg - 1.0)) * v;
  });
  return out;
}

Eigen::MatrixXd basis_matrix(std::span<const double> w, int k) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(w.size()), k);
  for (std::size_t i = 0; i < w.size(); ++i) {
    check_args(w[i], k);
    const auto row = static_cast<Eigen::Index>(i);
    fill_basis(w[i], k, [&](int m, double v) { out(row, m) = v; });
  }
  return out;
}

Eigen::MatrixXd basis_deriv_matrix(std::span<const double> w, int k) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(w.size()), k);
  for (std::size_t i = 0; i < w.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = eval_basis_deriv(w[i], k).transpose();
  }
  return out;
}

SeriesValue eval_series(double w, const Eigen::VectorXd& coeffs) {
  const int k = static_cast<int>(coeffs.size());
  check_args(w, k);
  SeriesValue s;
  // One pass of the recurrence gives h_m; h_m' and h_m'' reuse lower degrees.
  double hm2 = 0.0, hm1 = 0.0;
  fill_basis(w, k, [&](int m, double v) {
    const double c = coeffs[m];
    s.value += c * v;
    if (m >= 1) s.deriv += c * std::sqrt(static_cast<double>(m)) * hm1;
    if (m >= 2) s.deriv2 += c * std::sqrt(static_cast<double>(m) * (m - 1)) * hm2;
    hm2 = hm1;
    hm1 = v;
  });
  return s;
}

Eigen::VectorXd parity_transform(const Eigen::VectorXd& coeffs) {
  Eigen::VectorXd out = coeffs;
  for (Eigen::Index j = 1; j < out.size(); j += 2) out[j] = -out[j];
  return out;
}

const QuadratureRule& gauss_hermite(int count) {
  if (count < 1) fail(ErrorCode::InvalidArgument, "gauss_hermite: node count must be >= 1");
  static std::mutex mutex;
  static std::map<int, std::unique_ptr<const QuadratureRule>> cache;
  std::lock_guard lock(mutex);
  auto& slot = cache[count];
  if (!slot) slot = std::make_unique<const QuadratureRule>(build_rule(count));
  return *slot;
}

double gram_check(int m, int n, int quadrature_nodes) {
  if (m < 0 || n < 0 || m > 40 || n > 40) {
    fail(ErrorCode::InvalidArgument, "gram_check: degrees must lie in [0, 40]");
  }
  if (quadrature_nodes < 2 * std::max(m, n) + 10) {
    fail(ErrorCode::InvalidArgument,
         "gram_check: need at least " + std::to_string(2 * std::max(m, n) + 10) +
             " quadrature nodes, got " + std::to_string(quadrature_nodes));
  }
  const auto& rule = gauss_hermite(quadrature_nodes);
  const int k = std::max(m, n) + 1;
  double sum = 0.0;
  for (Eigen::Index i = 0; i < rule.nodes.size(); ++i) {
    double hm = 0.0, hn = 0.0;
    fill_basis(rule.nodes[i], k, [&](int deg, double v) {
      if (deg == m) hm = v;
      if (deg == n) hn = v;
    });
    sum += rule.weights[i] * hm * hn;
  }
  return sum;
}

}  // namespace sieveate::hermite
