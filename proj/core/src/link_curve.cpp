#include "sieveate/link_curve.hpp"

#include "sieveate/error.hpp"
#include "sieveate/hermite.hpp"
#include "sieveate/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <string>

namespace sieveate {
namespace {

// Unit-mean, unit-variance exponential multipliers from a 53-bit uniform.
std::vector<double> exponential_weights(Eigen::Index n, unsigned long long seed) {
  std::mt19937_64 rng(seed);
  std::vector<double> w(static_cast<std::size_t>(n));
  for (auto& x : w) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    x = -std::log1p(-u);
  }
  return w;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_px(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace

QuadFit quad_fit(const std::vector<double>& omega, const std::vector<double>& g,
                 const std::vector<double>& weights) {
  const auto n = omega.size();
  require(g.size() == n, "quad_fit: omega and g lengths differ");
  require(weights.empty() || weights.size() == n, "quad_fit: weight length differs");
  require(n >= 4, "quad_fit: need at least 4 points");
  if (std::set<double>(omega.begin(), omega.end()).size() < 3) {
    fail(ErrorCode::InvalidArgument, "quad_fit: rank-deficient design (fewer than 3 distinct omega)");
  }
  Eigen::MatrixXd z(static_cast<Eigen::Index>(n), 3);
  Eigen::VectorXd y(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const double s = weights.empty() ? 1.0 : std::sqrt(weights[i]);
    const auto r = static_cast<Eigen::Index>(i);
    z(r, 0) = s;
    z(r, 1) = s * omega[i];
    z(r, 2) = s * omega[i] * omega[i];
    y[r] = s * g[i];
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(z);
  if (qr.rank() < 3) fail(ErrorCode::InvalidArgument, "quad_fit: rank-deficient design");
  const Eigen::Vector3d coef = qr.solve(y);
  const double rss = (y - z * coef).squaredNorm();
  const double sigma2 = n > 3 ? rss / static_cast<double>(n - 3) : 0.0;
  const Eigen::Matrix3d cov = sigma2 * (z.transpose() * z).inverse();
  QuadFit out;
  for (int j = 0; j < 3; ++j) {
    out.coeffs[static_cast<std::size_t>(j)] = coef[j];
    out.std_errors[static_cast<std::size_t>(j)] = std::sqrt(std::max(cov(j, j), 0.0));
  }
  return out;
}

double empirical_quantile(std::vector<double> values, double prob) {
  require(!values.empty(), "empirical_quantile: no values");
  require(prob >= 0.0 && prob <= 1.0, "empirical_quantile: probability outside [0, 1]");
  std::sort(values.begin(), values.end());
  const double h = prob * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

GridSpec default_grid(const Dataset& data, const SingleIndexModel& model, int count) {
  const Eigen::VectorXd w = data.covariates * model.theta;
  std::vector<double> v(w.data(), w.data() + w.size());
  return {empirical_quantile(v, 0.02), empirical_quantile(v, 0.98), count};
}

LinkCurve link_curve(const Dataset& data, const SingleIndexModel& model, const GridSpec& grid,
                     const BootstrapOptions& boot, const FitOptions& opts) {
  data.validate();
  require(boot.replications >= 50, "link_curve: need at least 50 bootstrap replications");
  require(grid.count >= 20, "link_curve: grid needs at least 20 points");
  require(grid.max > grid.min && std::isfinite(grid.min) && std::isfinite(grid.max),
          "link_curve: grid bounds must be finite with min < max");
  require(boot.conf_level > 0.0 && boot.conf_level < 1.0, "link_curve: conf_level must lie in (0, 1)");
  require(model.theta.size() == data.dim(), "link_curve: model dimension differs from data");

  LinkCurve curve;
  curve.conf_level = boot.conf_level;
  curve.replications = boot.replications;
  const auto g_count = static_cast<std::size_t>(grid.count);
  curve.grid.resize(g_count);
  for (std::size_t i = 0; i < g_count; ++i) {
    curve.grid[i] = grid.min + (grid.max - grid.min) * static_cast<double>(i) /
                                   static_cast<double>(g_count - 1);
  }
  curve.g_hat.resize(g_count);
  for (std::size_t i = 0; i < g_count; ++i) curve.g_hat[i] = model.link(curve.grid[i]);

  const auto b_count = static_cast<std::size_t>(boot.replications);
  std::vector<std::vector<double>> reps(b_count);
  std::vector<char> ok(b_count, 0);
  parallel_for(b_count, boot.threads, [&](std::size_t b) {
    const auto weights = exponential_weights(data.size(), mix64(boot.seed ^ mix64(b + 1)));
    try {
      const auto fit = refit_from(data, model.theta, model.truncation, opts, weights);
      if (!fit.converged) return;
      auto& r = reps[b];
      r.resize(g_count);
      for (std::size_t i = 0; i < g_count; ++i) r[i] = fit.link(curve.grid[i]);
      ok[b] = 1;
    } catch (const Error&) {
    }
  });

  std::vector<std::vector<double>> good;
  for (std::size_t b = 0; b < b_count; ++b) {
    if (ok[b]) good.push_back(std::move(reps[b]));
  }
  curve.failed_replications = static_cast<int>(b_count - good.size());
  const double failure_fraction =
      static_cast<double>(curve.failed_replications) / static_cast<double>(b_count);
  if (failure_fraction > 0.2) {
    std::ostringstream msg;
    msg << "link_curve: " << curve.failed_replications << " of " << b_count
        << " bootstrap replicates failed (fraction " << failure_fraction << ")";
    fail(ErrorCode::BootstrapInstability, msg.str());
  }

  const double alpha = 1.0 - boot.conf_level;
  curve.band_lower.resize(g_count);
  curve.band_upper.resize(g_count);
  std::vector<double> column(good.size());
  for (std::size_t i = 0; i < g_count; ++i) {
    for (std::size_t b = 0; b < good.size(); ++b) column[b] = good[b][i];
    curve.band_lower[i] = std::min(empirical_quantile(column, 0.5 * alpha), curve.g_hat[i]);
    curve.band_upper[i] = std::max(empirical_quantile(column, 1.0 - 0.5 * alpha), curve.g_hat[i]);
  }

  curve.quad = quad_fit(curve.grid, curve.g_hat);
  std::array<double, 3> mean{}, sq{};
  for (const auto& r : good) {
    const auto q = quad_fit(curve.grid, r);
    for (std::size_t j = 0; j < 3; ++j) {
      mean[j] += q.coeffs[j];
      sq[j] += q.coeffs[j] * q.coeffs[j];
    }
  }
  const double m = static_cast<double>(good.size());
  for (std::size_t j = 0; j < 3; ++j) {
    const double mu = mean[j] / m;
    const double var = m > 1.0 ? (sq[j] - m * mu * mu) / (m - 1.0) : 0.0;
    curve.quad_boot_se[j] = std::sqrt(std::max(var, 0.0));
  }
  if (boot.keep_replicates) curve.replicate_curves = std::move(good);
  return curve;
}

void write_curve_csv(const LinkCurve& curve, std::ostream& out) {
  out << "omega,g_hat,lower,upper\n";
  for (std::size_t i = 0; i < curve.grid.size(); ++i) {
    out << fmt(curve.grid[i]) << ',' << fmt(curve.g_hat[i]) << ',' << fmt(curve.band_lower[i])
        << ',' << fmt(curve.band_upper[i]) << '\n';
  }
}

void write_curve_svg(const LinkCurve& curve, std::ostream& out) {
  constexpr double width = 640, height = 420, margin = 50;
  double y_lo = *std::min_element(curve.band_lower.begin(), curve.band_lower.end());
  double y_hi = *std::max_element(curve.band_upper.begin(), curve.band_upper.end());
  if (!(y_hi > y_lo)) {
    y_lo -= 1.0;
    y_hi += 1.0;
  }
  const double x_lo = curve.grid.front(), x_hi = curve.grid.back();
  auto px = [&](double x) { return margin + (x - x_lo) / (x_hi - x_lo) * (width - 2 * margin); };
  auto py = [&](double y) { return height - margin - (y - y_lo) / (y_hi - y_lo) * (height - 2 * margin); };
  auto polyline = [&](const std::vector<double>& ys, const char* style) {
    out << "  <polyline fill=\"none\" " << style << " points=\"";
    for (std::size_t i = 0; i < ys.size(); ++i) {
      out << (i ? " " : "") << fmt_px(px(curve.grid[i])) << ',' << fmt_px(py(ys[i]));
    }
    out << "\"/>\n";
  };
  const auto quad_y = [&] {
    std::vector<double> ys(curve.grid.size());
    for (std::size_t i = 0; i < ys.size(); ++i) {
      const double w = curve.grid[i];
      ys[i] = curve.quad.coeffs[0] + curve.quad.coeffs[1] * w + curve.quad.coeffs[2] * w * w;
    }
    return ys;
  }();

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
  out << "  <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "  <line x1=\"" << margin << "\" y1=\"" << height - margin << "\" x2=\"" << width - margin
      << "\" y2=\"" << height - margin << "\" stroke=\"black\"/>\n";
  out << "  <line x1=\"" << margin << "\" y1=\"" << margin << "\" x2=\"" << margin << "\" y2=\""
      << height - margin << "\" stroke=\"black\"/>\n";
  polyline(curve.band_lower, "stroke=\"steelblue\" stroke-dasharray=\"6,4\"");
  polyline(curve.band_upper, "stroke=\"steelblue\" stroke-dasharray=\"6,4\"");
  polyline(quad_y, "stroke=\"gray\" stroke-dasharray=\"2,3\"");
  polyline(curve.g_hat, "stroke=\"black\" stroke-width=\"2\"");
  out << "  <text x=\"" << width / 2 << "\" y=\"" << height - 12
      << "\" text-anchor=\"middle\" font-size=\"14\">index</text>\n";
  out << "  <text x=\"14\" y=\"" << height / 2 << "\" font-size=\"14\" transform=\"rotate(-90 14 "
      << height / 2 << ")\" text-anchor=\"middle\">estimated link</text>\n";
  out << "  <text x=\"" << margin << "\" y=\"" << margin - 10 << "\" font-size=\"12\">x: "
      << fmt_px(x_lo) << " .. " << fmt_px(x_hi) << "   y: " << fmt_px(y_lo) << " .. "
      << fmt_px(y_hi) << "</text>\n";
  out << "</svg>\n";
}

}  // namespace sieveate
