#include "sieveate/link_curve.hpp"
#include "sieveate/simulation.hpp"

#include "helpers.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

using namespace sieveate;

namespace {

std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> v(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = a + (b - a) * i / (n - 1);
  return v;
}

double median_width(const LinkCurve& c) {
  std::vector<double> w(c.grid.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = c.band_upper[i] - c.band_lower[i];
  return empirical_quantile(w, 0.5);
}

}  // namespace

TEST_CASE("quad_fit recovers exact polynomials") {
  const auto w = linspace(-2, 2, 31);
  std::vector<double> g(w.size()), id(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    g[i] = 1.22 + 0.54 * w[i] + 0.12 * w[i] * w[i];
    id[i] = w[i];
  }
  const auto q = quad_fit(w, g);
  CHECK(q.coeffs[0] == doctest::Approx(1.22).epsilon(1e-13));
  CHECK(q.coeffs[1] == doctest::Approx(0.54).epsilon(1e-13));
  CHECK(q.coeffs[2] == doctest::Approx(0.12).epsilon(1e-13));
  for (double se : q.std_errors) CHECK(se < 1e-12);

  const auto qi = quad_fit(w, id);
  CHECK(std::abs(qi.coeffs[0]) < 1e-14);
  CHECK(qi.coeffs[1] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(std::abs(qi.coeffs[2]) < 1e-14);
}

TEST_CASE("quad_fit matches a normal-equations oracle") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> z;
  std::uniform_real_distribution<double> u(0.5, 2.0);
  for (int rep = 0; rep < 10; ++rep) {
    const auto w = linspace(-1.5, 2.5, 25);
    std::vector<double> g(w.size()), wt(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) {
      g[i] = std::sin(w[i]) + 0.1 * z(rng);
      wt[i] = u(rng);
    }
    for (bool weighted : {false, true}) {
      // (Z' W Z) b = Z' W g with classical sigma^2 (Z' W Z)^{-1}
      Eigen::Matrix3d ztz = Eigen::Matrix3d::Zero();
      Eigen::Vector3d zty = Eigen::Vector3d::Zero();
      for (std::size_t i = 0; i < w.size(); ++i) {
        const Eigen::Vector3d row(1.0, w[i], w[i] * w[i]);
        const double a = weighted ? wt[i] : 1.0;
        ztz += a * row * row.transpose();
        zty += a * g[i] * row;
      }
      const Eigen::Vector3d b = ztz.inverse() * zty;
      double rss = 0.0;
      for (std::size_t i = 0; i < w.size(); ++i) {
        const double r = g[i] - b[0] - b[1] * w[i] - b[2] * w[i] * w[i];
        rss += (weighted ? wt[i] : 1.0) * r * r;
      }
      const Eigen::Matrix3d cov = rss / static_cast<double>(w.size() - 3) * ztz.inverse();
      const auto q = weighted ? quad_fit(w, g, wt) : quad_fit(w, g);
      for (int j = 0; j < 3; ++j) {
        CHECK(std::abs(q.coeffs[static_cast<std::size_t>(j)] - b[j]) < 1e-10);
        CHECK(std::abs(q.std_errors[static_cast<std::size_t>(j)] - std::sqrt(cov(j, j))) < 1e-10);
      }
    }
  }
}

TEST_CASE("quad_fit rejects rank-deficient designs") {
  CHECK(testutil::error_code_of([] { quad_fit({1, 1, 2, 2}, {0, 1, 2, 3}); }) ==
        ErrorCode::InvalidArgument);
  CHECK(testutil::error_code_of([] { quad_fit({1, 2, 3}, {0, 1, 2}); }) ==
        ErrorCode::InvalidArgument);
}

TEST_CASE("empirical_quantile uses linear interpolation") {
  CHECK(empirical_quantile({4, 1, 3, 2}, 0.5) == 2.5);
  CHECK(empirical_quantile({4, 1, 3, 2}, 0.0) == 1.0);
  CHECK(empirical_quantile({4, 1, 3, 2}, 1.0) == 4.0);
  CHECK(empirical_quantile({0, 10}, 0.25) == 2.5);
}

TEST_CASE("link curve band contains the estimate and is reproducible across worker counts") {
  const auto g = sim::generate_dataset(sim::setting("8A"), 800, 12);
  const auto model = fit_single_index(g.data, 3);
  const auto grid = default_grid(g.data, model, 41);
  CHECK(grid.min < grid.max);
  BootstrapOptions boot;
  boot.replications = 60;
  boot.seed = 9;
  boot.keep_replicates = true;
  const auto a = link_curve(g.data, model, grid, boot);
  boot.threads = 4;
  const auto b = link_curve(g.data, model, grid, boot);
  CHECK(a.band_lower == b.band_lower);
  CHECK(a.band_upper == b.band_upper);
  CHECK(a.replicate_curves == b.replicate_curves);
  CHECK(a.replicate_curves.size() == static_cast<std::size_t>(60 - a.failed_replications));
  for (std::size_t i = 0; i < a.grid.size(); ++i) {
    CHECK(a.band_lower[i] <= a.g_hat[i]);
    CHECK(a.g_hat[i] <= a.band_upper[i]);
    CHECK(a.g_hat[i] == model.link(a.grid[i]));
  }
  for (double se : a.quad_boot_se) CHECK(se > 0.0);

  std::ostringstream csv;
  write_curve_csv(a, csv);
  const auto text = csv.str();
  CHECK(text.rfind("omega,g_hat,lower,upper\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 42);
  std::ostringstream svg;
  write_curve_svg(a, svg);
  CHECK(svg.str().find("<svg") == 0);
  CHECK(svg.str().find("</svg>") != std::string::npos);
}

TEST_CASE("probit-generated treatment: increasing link, band narrows with N") {
  BootstrapOptions boot;
  boot.replications = 100;
  boot.seed = 4;
  boot.threads = 4;
  const auto small = sim::generate_dataset(sim::setting("8A"), 800, 21);
  const auto large = sim::generate_dataset(sim::setting("8A"), 3200, 21);
  const auto ms = fit_single_index(small.data, 3);
  const auto ml = fit_single_index(large.data, 3);
  const GridSpec grid{-1.5, 1.5, 31};
  const auto cs = link_curve(small.data, ms, grid, boot);
  const auto cl = link_curve(large.data, ml, grid, boot);
  CHECK(median_width(cl) < median_width(cs));
  CHECK(cl.g_hat.back() > cl.g_hat.front());
  CHECK(cl.quad.coeffs[1] > 0.0);
}

TEST_CASE("link_curve argument checks") {
  const auto g = sim::generate_dataset(sim::setting("1A"), 200, 1);
  const auto model = fit_single_index(g.data, 3);
  BootstrapOptions boot;
  boot.replications = 10;
  CHECK(testutil::error_code_of([&] { link_curve(g.data, model, {-1, 1, 50}, boot); }) ==
        ErrorCode::InvalidArgument);
  boot.replications = 50;
  CHECK(testutil::error_code_of([&] { link_curve(g.data, model, {-1, 1, 5}, boot); }) ==
        ErrorCode::InvalidArgument);
  CHECK(testutil::error_code_of([&] { link_curve(g.data, model, {1, -1, 50}, boot); }) ==
        ErrorCode::InvalidArgument);
}
