// Acceptance harness: one PASS/FAIL line per criterion.
//   sieveate_acceptance [--only N] [--cli PATH] [--work DIR]

#include "sieveate/effects.hpp"
#include "sieveate/error.hpp"
#include "sieveate/hermite.hpp"
#include "sieveate/index_mle.hpp"
#include "sieveate/io.hpp"
#include "sieveate/link_curve.hpp"
#include "sieveate/parallel.hpp"
#include "sieveate/simulation.hpp"

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace {

using namespace sieveate;
namespace fs = std::filesystem;

constexpr unsigned long long kMasterSeed = 20240611ULL;

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Context {
  fs::path cli;
  fs::path work;
  int threads = 1;
};

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

const sim::StudyRow& row(const sim::StudySummary& s, const std::string& estimator) {
  for (const auto& r : s.rows) {
    if (r.estimator == estimator) return r;
  }
  throw std::runtime_error("missing estimator row " + estimator);
}

sim::StudySummary study(const Context& ctx, const std::string& id, long n, long reps,
                        std::vector<sim::EstimatorKind> est, KPolicy policy, FitOptions fit = {}) {
  sim::StudyConfig cfg;
  cfg.settings = {id};
  cfg.sample_sizes = {n};
  cfg.replications = reps;
  cfg.estimators = std::move(est);
  cfg.k_policy = policy;
  cfg.seed = kMasterSeed;
  cfg.threads = ctx.threads;
  cfg.fit = fit;
  return sim::run_study(cfg);
}

Dataset random_dataset(std::mt19937_64& rng, long n, long d) {
  std::normal_distribution<double> z;
  std::uniform_real_distribution<double> u;
  Dataset data;
  for (;;) {
    data.covariates.resize(n, d);
    data.outcomes.resize(n);
    data.treatments.resize(n);
    for (long i = 0; i < n; ++i) {
      for (long j = 0; j < d; ++j) data.covariates(i, j) = z(rng);
      const double w = data.covariates(i, 0);
      data.treatments[i] = u(rng) < 1.0 / (1.0 + std::exp(-std::sin(w) - 0.4 * w)) ? 1.0 : 0.0;
      data.outcomes[i] = data.treatments[i] + data.covariates.row(i).sum() + z(rng);
    }
    const double s = data.treatments.sum();
    if (s >= 2 && s <= n - 2) return data;
  }
}

Eigen::VectorXd random_unit(std::mt19937_64& rng, long d) {
  std::normal_distribution<double> z;
  Eigen::VectorXd v(d);
  for (long j = 0; j < d; ++j) v[j] = z(rng);
  return v.normalized();
}

// 1 ------------------------------------------------------------------------
Outcome basis_correctness(const Context&) {
  const auto t0 = std::chrono::steady_clock::now();
  const double root = std::sqrt(2.0 * M_PI);
  double worst_gram = 0.0, worst_parity = 0.0, worst_deriv = 0.0;
  for (int m = 0; m <= 12; ++m) {
    for (int n = 0; n <= 12; ++n) {
      worst_gram = std::max(worst_gram, std::abs(hermite::gram_check(m, n, 200) / root - (m == n ? 1.0 : 0.0)));
    }
  }
  // parity h_m(-w) = (-1)^m h_m(w); derivative h_m' = sqrt(m) h_{m-1} against central differences
  const double h = 1e-6;
  for (double w = -4.0; w <= 4.0; w += 0.25) {
    const auto b = hermite::eval_basis(w, 13), bm = hermite::eval_basis(-w, 13);
    const auto d = hermite::eval_basis_deriv(w, 13);
    const auto fp = hermite::eval_basis(w + h, 13), fm = hermite::eval_basis(w - h, 13);
    for (int m = 0; m <= 12; ++m) {
      worst_parity = std::max(worst_parity, std::abs(bm[m] - ((m % 2) ? -b[m] : b[m])));
      const double fd = (fp[m] - fm[m]) / (2 * h);
      worst_deriv = std::max(worst_deriv, std::abs(d[m] - fd) / std::max(1.0, std::abs(fd)));
    }
  }
  const double secs = seconds_since(t0);
  const bool pass = worst_gram < 1e-8 && worst_parity <= 1e-12 && worst_deriv < 1e-6 && secs < 5.0;
  return {pass, "max gram err " + fmt("%.2e", worst_gram) + " (<1e-8), parity " + fmt("%.1e", worst_parity) +
                    " (<=1e-12), derivative " + fmt("%.1e", worst_deriv) + " (<1e-6), " +
                    fmt("%.2f", secs) + " s (<5)"};
}

// 2 ------------------------------------------------------------------------
Outcome gradient_suite(const Context&) {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(kMasterSeed + 2);
  const double h = 1e-6;
  double worst = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const long n = 10 + static_cast<long>(rng() % 41);
    const long d = 1 + static_cast<long>(rng() % 4);
    const int k = 1 + static_cast<int>(rng() % 5);
    const auto data = random_dataset(rng, n, d);
    const auto theta = random_unit(rng, d);
    std::normal_distribution<double> z(0.0, 0.5);
    Eigen::VectorXd c(k);
    for (int j = 0; j < k; ++j) c[j] = z(rng);
    const auto g = likelihood_gradients(data, theta, c);
    Eigen::VectorXd fd_c(k), fd_t(d);
    for (int j = 0; j < k; ++j) {
      Eigen::VectorXd cp = c, cm = c;
      cp[j] += h;
      cm[j] -= h;
      fd_c[j] = (log_likelihood(data, theta, cp) - log_likelihood(data, theta, cm)) / (2 * h);
    }
    for (long j = 0; j < d; ++j) {
      Eigen::VectorXd tp = theta, tm = theta;
      tp[j] += h;
      tm[j] -= h;
      fd_t[j] = (log_likelihood(data, tp, c) - log_likelihood(data, tm, c)) / (2 * h);
    }
    worst = std::max(worst, (g.coeffs - fd_c).norm() / std::max(fd_c.norm(), 1e-8));
    worst = std::max(worst, (g.theta - fd_t).norm() / std::max(fd_t.norm(), 1e-8));
  }
  const double secs = seconds_since(t0);
  return {worst < 1e-6 && secs < 30.0,
          "worst relative error " + fmt("%.2e", worst) + " (<1e-6) over 100 instances, " + fmt("%.2f", secs) + " s (<30)"};
}

// 3 ------------------------------------------------------------------------
Outcome theta_recovery(const Context& ctx) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto s = study(ctx, "1A", 1600, 500, {sim::EstimatorKind::Theta}, KPolicy::fixed(3));
  const auto& r = row(s, "theta_1");
  const double secs = seconds_since(t0);
  const bool pass = std::abs(r.bias) <= 0.005 && r.std >= 0.013 && r.std <= 0.028 && secs < 600;
  return {pass, "1A N=1600 k=3 R=" + std::to_string(r.replications) + ": bias " + fmt("%+.4f", r.bias) +
                    " (|.|<=0.005), std " + fmt("%.4f", r.std) + " (in [0.013,0.028]), " + fmt("%.1f", secs) + " s"};
}

// 4 ------------------------------------------------------------------------
Outcome norm_violation(const Context& ctx) {
  const auto s = study(ctx, "2A", 1600, 300, {sim::EstimatorKind::Theta}, KPolicy::default_rule());
  const double r2 = 1.0 / std::sqrt(2.0);
  // rows report bias against theta0/||theta0|| = (1/sqrt2, -1/sqrt2)
  const double m1 = r2 + row(s, "theta_1").bias, m2 = -r2 + row(s, "theta_2").bias;
  const double dist = std::hypot(m1 - r2, m2 + r2);
  return {dist <= 0.01, "2A N=1600 R=300: mean theta (" + fmt("%.4f", m1) + ", " + fmt("%.4f", m2) +
                            "), distance to (1/sqrt2,-1/sqrt2) " + fmt("%.4f", dist) + " (<=0.01)"};
}

// 5 ------------------------------------------------------------------------
Outcome ate_5a(const Context& ctx) {
  const auto a = row(study(ctx, "5A", 400, 500, {sim::EstimatorKind::SieveAte}, KPolicy::default_rule()), "sieve_ate");
  const auto b = row(study(ctx, "5A", 1600, 500, {sim::EstimatorKind::SieveAte}, KPolicy::default_rule()), "sieve_ate");
  const bool p400 = std::abs(a.bias) <= 0.012 && a.std >= 0.030 && a.std <= 0.055;
  const bool p1600 = std::abs(b.bias) <= 0.004 && b.std >= 0.015 && b.std <= 0.030;
  return {p400 && p1600, "5A ATE N=400: bias " + fmt("%+.4f", a.bias) + " (|.|<=0.012), std " + fmt("%.4f", a.std) +
                             " (in [0.030,0.055]); N=1600: bias " + fmt("%+.4f", b.bias) + " (|.|<=0.004), std " +
                             fmt("%.4f", b.std) + " (in [0.015,0.030])"};
}

// 6 ------------------------------------------------------------------------
Outcome ate_5c(const Context& ctx) {
  const auto a = row(study(ctx, "5C", 400, 300, {sim::EstimatorKind::SieveAte}, KPolicy::default_rule()), "sieve_ate");
  const bool pass = std::abs(a.bias) <= 0.015 && a.std >= 0.028 && a.std <= 0.055;
  return {pass, "5C ATE N=400 R=300: bias " + fmt("%+.4f", a.bias) + " (|.|<=0.015), std " + fmt("%.4f", a.std) +
                    " (in [0.028,0.055])"};
}

// 7 ------------------------------------------------------------------------
Outcome ci_coverage(const Context& ctx) {
  const auto a = row(study(ctx, "5B", 800, 1000, {sim::EstimatorKind::SieveWeighted}, KPolicy::default_rule()),
                     "sieve_weighted");
  const bool pass = a.coverage >= 0.93 && a.coverage <= 0.97;
  return {pass, "5B N=800 R=1000: weighted-ATE 95% CI coverage " + fmt("%.3f", a.coverage) +
                    " (in [0.93,0.97]); Monte Carlo std " + fmt("%.4f", a.std)};
}

// 8 ------------------------------------------------------------------------
Outcome oracle_equivalence(const Context&) {
  std::mt19937_64 rng(kMasterSeed + 8);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  double worst = 0.0, collapse = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const long n = 8 + rep % 40;
    const auto data = random_dataset(rng, n, 2);
    Eigen::VectorXd pi(n);
    for (long i = 0; i < n; ++i) pi[i] = u(rng);
    const auto r = estimate_effects_with_propensity(data, pi);
    double num_w = 0, den_w = 0, num_a = 0, den_a = 0;
    for (long i = 0; i < n; ++i) {
      const double res = data.treatments[i] - pi[i];
      const double v = pi[i] * (1 - pi[i]);
      num_w += res * data.outcomes[i];
      den_w += res * res;
      num_a += res * data.outcomes[i] / v;
      den_a += res * res / v;
    }
    worst = std::max(worst, std::abs(r.weighted.point - num_w / den_w) / std::abs(num_w / den_w));
    worst = std::max(worst, std::abs(r.ate.point - num_a / den_a) / std::abs(num_a / den_a));
    const auto flat = estimate_effects_with_propensity(data, Eigen::VectorXd::Constant(n, u(rng)));
    collapse = std::max(collapse, std::abs(flat.ate.point - flat.weighted.point));
  }
  return {worst <= 1e-12 && collapse <= 1e-12,
          "max relative deviation from direct formulas " + fmt("%.1e", worst) + " (<=1e-12), constant-pi |ate - weighted| " +
              fmt("%.1e", collapse) + " (<=1e-12)"};
}

// 9 ------------------------------------------------------------------------
Outcome sphere_invariants(const Context&) {
  std::vector<Eigen::VectorXd> fitted;
  for (const auto& id : {"1A", "2A", "3A", "4A", "5C", "8B"}) {
    const auto s = sim::setting(id);
    for (int r = 0; r < 20; ++r) {
      const auto g = sim::generate_dataset(s, 400, sim::replication_seed(kMasterSeed, id, 400, r));
      fitted.push_back(fit_single_index(g.data, 2 + r % 4).theta);
    }
  }
  std::mt19937_64 rng(kMasterSeed + 9);
  for (int r = 0; r < 100; ++r) fitted.push_back(fit_single_index(random_dataset(rng, 60, 1 + r % 4), 1 + r % 5).theta);
  double worst_norm = 0.0, worst_identity = 0.0;
  for (const auto& t : fitted) worst_norm = std::max(worst_norm, std::abs(t.norm() - 1.0));
  long pairs = 0;
  for (std::size_t i = 0; i < fitted.size(); ++i) {
    for (std::size_t j = i; j < fitted.size(); ++j) {
      if (fitted[i].size() != fitted[j].size()) continue;
      const double lhs = 1.0 - fitted[i].dot(fitted[j]);
      const double rhs = 0.5 * (fitted[i] - fitted[j]).squaredNorm();
      worst_identity = std::max(worst_identity, std::abs(lhs - rhs));
      ++pairs;
    }
  }
  return {worst_norm <= 1e-10 && worst_identity <= 1e-12,
          std::to_string(fitted.size()) + " fits: max | ||theta|| - 1 | " + fmt("%.1e", worst_norm) +
              " (<=1e-10); " + std::to_string(pairs) + " pairs: max identity gap " + fmt("%.1e", worst_identity) +
              " (<=1e-12)"};
}

// 10 -----------------------------------------------------------------------
Outcome misspecification(const Context& ctx) {
  const auto a = row(study(ctx, "10A", 1600, 300, {sim::EstimatorKind::SieveAte}, KPolicy::default_rule()), "sieve_ate");
  // Context only: the same study with the fit alternated to convergence.
  FitOptions alternated;
  alternated.alternation_rounds = 10;
  const auto b = row(study(ctx, "10A", 1600, 300, {sim::EstimatorKind::SieveAte}, KPolicy::default_rule(), alternated),
                     "sieve_ate");
  return {std::abs(a.bias) <= 0.006, "10A N=1600 R=300: ATE bias " + fmt("%+.4f", a.bias) + " (|.|<=0.006), std " +
                                         fmt("%.4f", a.std) + ", Monte Carlo s.e. of the bias " +
                                         fmt("%.4f", a.std / std::sqrt(static_cast<double>(a.replications))) +
                                         "; with 10 alternation rounds: bias " + fmt("%+.4f", b.bias)};
}

// 11 -----------------------------------------------------------------------
struct CurvatureRate {
  double within = 0.0;  // share with |t| <= 2
  int ok = 0;
};

CurvatureRate curvature_rate(const Context& ctx, const std::function<sim::GeneratedData(unsigned long long)>& draw,
                             int reps) {
  CurvatureRate out;
  int within = 0;
  for (int r = 0; r < reps; ++r) {
    const auto g = draw(mix64(kMasterSeed + 11) ^ mix64(static_cast<unsigned long long>(r)));
    try {
      const auto model = fit_single_index(g.data, 3);
      BootstrapOptions boot;
      boot.replications = 100;
      boot.seed = mix64(static_cast<unsigned long long>(r) + 7);
      boot.threads = ctx.threads;
      const auto curve = link_curve(g.data, model, default_grid(g.data, model, 41), boot);
      const double t = curve.quad.coeffs[2] / curve.quad_boot_se[2];
      if (std::abs(t) <= 2.0) ++within;
      ++out.ok;
    } catch (const Error&) {
    }
  }
  out.within = out.ok ? static_cast<double>(within) / out.ok : 0.0;
  return out;
}

Outcome link_diagnostic(const Context& ctx) {
  const long n = 800;
  const Eigen::Vector2d theta0(0.8, -0.6);
  auto logistic_true = [&](unsigned long long seed) {
    // g0 = identity: D ~ Bernoulli(Lambda(X'theta0)), outcome as in the other designs
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z;
    std::uniform_real_distribution<double> u;
    sim::GeneratedData g;
    g.data.covariates.resize(n, 2);
    g.data.treatments.resize(n);
    g.data.outcomes.resize(n);
    g.truth.propensity.resize(n);
    for (long i = 0; i < n; ++i) {
      g.data.covariates(i, 0) = z(rng);
      g.data.covariates(i, 1) = z(rng);
    }
    for (long i = 0; i < n; ++i) {
      const double p = logistic(g.data.covariates.row(i).dot(theta0));
      g.truth.propensity[i] = p;
      g.data.treatments[i] = u(rng) < p ? 1.0 : 0.0;
    }
    for (long i = 0; i < n; ++i) g.data.outcomes[i] = g.data.treatments[i] + g.data.covariates.row(i).sum() + z(rng);
    return g;
  };
  const auto a = curvature_rate(ctx, logistic_true, 100);
  const auto s1b = sim::setting("1B");
  const auto b = curvature_rate(ctx, [&](unsigned long long seed) { return sim::generate_dataset(s1b, n, seed); }, 100);
  // Oracle: quadratic fit to the true 1B link over the population index range
  // [q_0.02, q_0.98] of N(0,1).
  const Eigen::RowVectorXd u1b = s1b.unit_theta0().transpose();
  std::vector<double> grid, g0;
  for (int i = 0; i < 41; ++i) {
    grid.push_back(-2.0537489106318225 + i * (2 * 2.0537489106318225) / 40);
    g0.push_back(sim::true_link(s1b, grid.back() * u1b));
  }
  const double population_curvature = quad_fit(grid, g0).coeffs[2];
  const double away = 1.0 - b.within;
  const bool pass = a.within >= 0.90 && away >= 0.70;
  return {pass, "logistic-true: |t_curv|<=2 in " + fmt("%.2f", a.within) + " of " + std::to_string(a.ok) +
                    " (>=0.90); 1B: |t_curv|>2 in " + fmt("%.2f", away) + " of " + std::to_string(b.ok) +
                    " (>=0.70); population curvature of the true 1B link " + fmt("%.1e", population_curvature)};
}

// 12 -----------------------------------------------------------------------
std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism(const Context& ctx) {
  if (ctx.cli.empty()) return {false, "no --cli path given"};
  const fs::path dir = ctx.work / "determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  {
    const auto g = sim::generate_dataset(sim::setting("5B"), 600, kMasterSeed);
    std::ofstream out(dir / "data.csv", std::ios::binary);
    io::write_csv(g.data, out);
  }
  {
    std::ofstream cfg(dir / "config.json");
    cfg << R"({"input": ")" << (dir / "data.csv").string()
        << R"(", "outcome": "y", "treatment": "d", "covariates": ["x1", "x2"], "seed": 99, "timestamp": false})";
  }
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"estimate", "estimate --config CFG --k-cv 2..4 --folds 5"},
      {"cv", "cv --config CFG --k-cv 2..5 --folds 6"},
      {"simulate", "simulate --config CFG --setting 5A,1B --n 200 --reps 8 --estimators sieve_weighted,sieve_ate,theta"},
      {"link-plot", "link-plot --config CFG --k 3 --boot 60 --grid-n 31"},
  };
  std::vector<std::string> mismatches;
  int compared = 0;
  for (const auto& [name, args] : commands) {
    std::vector<fs::path> outs;
    for (int threads : {1, 1, 4}) {
      const fs::path out = dir / (name + "_" + std::to_string(outs.size()));
      std::string a = args;
      a.replace(a.find("CFG"), 3, (dir / "config.json").string());
      const std::string cmd = "SIEVEATE_THREADS=" + std::to_string(threads) + " \"" + ctx.cli.string() + "\" " + a +
                              " --out \"" + out.string() + "\" 2>/dev/null";
      if (std::system(cmd.c_str()) != 0) return {false, name + " failed: " + cmd};
      outs.push_back(out);
    }
    for (const auto& entry : fs::directory_iterator(outs[0])) {
      const auto file = entry.path().filename();
      const auto ref = slurp(outs[0] / file);
      for (std::size_t i = 1; i < outs.size(); ++i) {
        ++compared;
        if (slurp(outs[i] / file) != ref) mismatches.push_back(name + "/" + file.string());
      }
    }
  }
  std::string detail = std::to_string(compared) + " artifact comparisons (repeat run and 1 vs 4 workers), " +
                       std::to_string(mismatches.size()) + " mismatches";
  for (const auto& m : mismatches) detail += " " + m;
  return {mismatches.empty() && compared > 0, detail};
}

struct Criterion {
  int id;
  const char* title;
  Outcome (*run)(const Context&);
};

const std::vector<Criterion> kCriteria = {
    {1, "basis correctness", basis_correctness},
    {2, "gradient suite", gradient_suite},
    {3, "theta recovery (1A)", theta_recovery},
    {4, "norm-violation projection (2A)", norm_violation},
    {5, "ATE replication (5A)", ate_5a},
    {6, "six-covariate ATE (5C)", ate_5c},
    {7, "CI coverage (5B)", ci_coverage},
    {8, "oracle equivalence", oracle_equivalence},
    {9, "sphere and identity invariants", sphere_invariants},
    {10, "misspecification robustness (10A)", misspecification},
    {11, "link-curve diagnostic", link_diagnostic},
    {12, "CLI determinism", determinism},
};

}  // namespace

int main(int argc, char** argv) {
  Context ctx;
  ctx.threads = default_threads();
  ctx.work = fs::temp_directory_path() / "sieveate_acceptance";
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--only" && i + 1 < argc) {
      only = std::atoi(argv[++i]);
    } else if (a == "--cli" && i + 1 < argc) {
      ctx.cli = argv[++i];
    } else if (a == "--work" && i + 1 < argc) {
      ctx.work = argv[++i];
    } else {
      std::cerr << "usage: sieveate_acceptance [--only N] [--cli PATH] [--work DIR]\n";
      return 2;
    }
  }
  int failed = 0;
  for (const auto& c : kCriteria) {
    if (only != 0 && c.id != only) continue;
    Outcome o;
    try {
      o = c.run(ctx);
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::cout << (o.pass ? "PASS" : "FAIL") << "  [" << (c.id < 10 ? " " : "") << c.id << "] " << c.title << ": "
              << o.detail << std::endl;
    if (!o.pass) ++failed;
  }
  return failed == 0 ? 0 : 1;
}
