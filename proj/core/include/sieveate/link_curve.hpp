#pragma once

#include "sieveate/dataset.hpp"
#include "sieveate/index_mle.hpp"

#include <Eigen/Dense>

#include <array>
#include <iosfwd>
#include <optional>
#include <vector>

namespace sieveate {

struct QuadFit {
  std::array<double, 3> coeffs{};      // intercept, slope, curvature
  std::array<double, 3> std_errors{};  // classical OLS
};

/// OLS of g on (1, w, w^2). Optional weights give WLS.
QuadFit quad_fit(const std::vector<double>& omega, const std::vector<double>& g,
                 const std::vector<double>& weights = {});

struct GridSpec {
  double min = 0.0;
  double max = 0.0;
  int count = 101;
};

/// [q_0.02, q_0.98] of the in-sample index values x'theta.
GridSpec default_grid(const Dataset& data, const SingleIndexModel& model, int count = 101);

struct LinkCurve {
  std::vector<double> grid;
  std::vector<double> g_hat;
  std::vector<double> band_lower;
  std::vector<double> band_upper;
  double conf_level = 0.95;
  int replications = 0;
  int failed_replications = 0;
  QuadFit quad;                            // fit to (grid, g_hat)
  std::array<double, 3> quad_boot_se{};    // std dev of replicate quadratic fits
  std::vector<std::vector<double>> replicate_curves;  // successful replicates, in draw order
};

struct BootstrapOptions {
  int replications = 500;
  double conf_level = 0.95;
  unsigned long long seed = 0;
  int threads = 1;
  bool keep_replicates = false;
};

LinkCurve link_curve(const Dataset& data, const SingleIndexModel& model, const GridSpec& grid,
                     const BootstrapOptions& boot, const FitOptions& opts = {});

/// Type-7 (linear interpolation) empirical quantile of unsorted values.
double empirical_quantile(std::vector<double> values, double prob);

/// CSV with header omega,g_hat,lower,upper.
void write_curve_csv(const LinkCurve& curve, std::ostream& out);
/// Standalone SVG line plot of the curve and its band.
void write_curve_svg(const LinkCurve& curve, std::ostream& out);

}  // namespace sieveate
