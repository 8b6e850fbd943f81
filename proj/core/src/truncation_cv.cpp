#include "sieveate/truncation_cv.hpp"

#include "sieveate/effects.hpp"
#include "sieveate/error.hpp"
#include "sieveate/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <set>

namespace sieveate {

int default_k(long n) {
  if (n < 1) return 1;
  // floor(N^{1/5}) with a guard against pow rounding just below an integer
  auto k = static_cast<long>(std::floor(std::pow(static_cast<double>(n), 0.2)));
  while ((k + 1) * (k + 1) * (k + 1) * (k + 1) * (k + 1) <= n) ++k;
  while (k > 0 && k * k * k * k * k > n) --k;
  return static_cast<int>(std::max(1L, k));
}

std::vector<int> default_candidates(long n) {
  std::vector<int> out;
  const int hi = std::max(default_k(n), 6);
  for (int k = 2; k <= hi; ++k) out.push_back(k);
  return out;
}

std::vector<int> fold_assignment(long n, int folds, unsigned long long seed) {
  require(n >= 1, "fold_assignment: n must be positive");
  require(folds >= 1 && folds <= n, "fold_assignment: folds must lie in [1, N]");
  std::vector<int> label(static_cast<std::size_t>(n));
  if (folds == n) {
    std::iota(label.begin(), label.end(), 0);
    return label;
  }
  std::vector<long> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0L);
  std::mt19937_64 rng(mix64(seed));
  // explicit Fisher-Yates: std::shuffle's draw sequence is implementation-defined
  for (std::size_t i = order.size() - 1; i > 0; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % (i + 1));
    std::swap(order[i], order[j]);
  }
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    label[static_cast<std::size_t>(order[pos])] = static_cast<int>(pos % static_cast<std::size_t>(folds));
  }
  return label;
}

int argmin_score(const std::map<int, double>& scores) {
  int best = 0;
  double best_score = std::numeric_limits<double>::infinity();
  for (const auto& [k, s] : scores) {  // ascending k, so strict < keeps the smallest tie
    if (std::isfinite(s) && s < best_score) {
      best = k;
      best_score = s;
    }
  }
  if (best == 0) fail(ErrorCode::SelectionFailure, "select_k: every candidate failed to fit");
  return best;
}

CvResult select_k(const Dataset& data, const std::vector<int>& candidates, CvMode mode,
                  int folds, const FitOptions& opts, unsigned long long seed, int threads) {
  data.validate();
  opts.validate();
  require(!candidates.empty(), "select_k: candidate set is empty");
  const long n = static_cast<long>(data.size());
  require(folds >= 2 && folds <= n, "select_k: folds must lie in [2, N]");
  const std::set<int> unique(candidates.begin(), candidates.end());
  for (int k : unique) require(k >= 1, "select_k: candidates must be positive");
  const std::vector<int> ks(unique.begin(), unique.end());

  const auto label = fold_assignment(n, folds, seed);
  std::vector<std::vector<Eigen::Index>> held_out(static_cast<std::size_t>(folds));
  for (long i = 0; i < n; ++i) held_out[static_cast<std::size_t>(label[static_cast<std::size_t>(i)])].push_back(i);

  struct Job {
    std::vector<double> predictions;  // aligned with held_out[fold]
    bool failed = false;
  };
  const std::size_t jobs = ks.size() * static_cast<std::size_t>(folds);
  std::vector<Job> results(jobs);

  parallel_for(jobs, threads, [&](std::size_t idx) {
    const int k = ks[idx / static_cast<std::size_t>(folds)];
    const auto fold = idx % static_cast<std::size_t>(folds);
    const auto& out_rows = held_out[fold];
    std::vector<Eigen::Index> in_rows;
    in_rows.reserve(static_cast<std::size_t>(n) - out_rows.size());
    for (long i = 0; i < n; ++i) {
      if (label[static_cast<std::size_t>(i)] != static_cast<int>(fold)) in_rows.push_back(i);
    }
    Job& job = results[idx];
    try {
      const Dataset train = data.subset(in_rows);
      const Dataset test = data.subset(out_rows);
      const auto model = fit_single_index(train, k, opts);
      if (!model.converged) {
        job.failed = true;
        return;
      }
      const Eigen::VectorXd pi_out = predict_propensity(model, test.covariates, opts.prop_clip);
      double beta = 0.0;
      if (mode == CvMode::OutcomePrediction) {
        const Eigen::VectorXd pi_in = predict_propensity(model, train.covariates, opts.prop_clip);
        beta = weighted_ate(train, pi_in, 0.95).point;
      }
      job.predictions.resize(out_rows.size());
      for (std::size_t j = 0; j < out_rows.size(); ++j) {
        const auto row = static_cast<Eigen::Index>(j);
        job.predictions[j] = mode == CvMode::TreatmentPrediction
                                 ? pi_out[row]
                                 : beta * (test.treatments[row] - pi_out[row]);
      }
    } catch (const Error&) {
      job.failed = true;
    }
  });

  CvResult out;
  out.mode = mode;
  out.folds = folds;
  for (std::size_t ki = 0; ki < ks.size(); ++ki) {
    const int k = ks[ki];
    std::vector<double> errors(static_cast<std::size_t>(n), std::numeric_limits<double>::quiet_NaN());
    int failed = 0;
    for (int f = 0; f < folds; ++f) {
      const Job& job = results[ki * static_cast<std::size_t>(folds) + static_cast<std::size_t>(f)];
      if (job.failed) {
        ++failed;
        continue;
      }
      const auto& rows = held_out[static_cast<std::size_t>(f)];
      for (std::size_t j = 0; j < rows.size(); ++j) {
        const double target = mode == CvMode::TreatmentPrediction ? data.treatments[rows[j]]
                                                                  : data.outcomes[rows[j]];
        errors[static_cast<std::size_t>(rows[j])] = job.predictions[j] - target;
      }
    }
    double score = std::numeric_limits<double>::infinity();
    if (failed == 0) {
      score = 0.0;
      for (double e : errors) score += e * e;
    }
    out.candidate_scores[k] = score;
    out.unit_errors[k] = std::move(errors);
    out.failed_fits[k] = failed;
  }
  out.chosen_k = argmin_score(out.candidate_scores);
  return out;
}

std::string to_string(CvMode mode) {
  return mode == CvMode::TreatmentPrediction ? "treatment_prediction" : "outcome_prediction";
}

}  // namespace sieveate
