#pragma once

#include "sieveate/dataset.hpp"
#include "sieveate/index_mle.hpp"

#include <map>
#include <string>
#include <vector>

namespace sieveate {

enum class CvMode { TreatmentPrediction, OutcomePrediction };

struct CvResult {
  int chosen_k = 0;
  std::map<int, double> candidate_scores;  // raw sum of squared held-out errors
  std::map<int, std::vector<double>> unit_errors;  // per unit, in row order
  std::map<int, int> failed_fits;
  CvMode mode = CvMode::TreatmentPrediction;
  int folds = 0;
};

/// max(1, floor(N^{1/5}))
int default_k(long n);

/// {2, ..., max(default_k(N), 6)}
std::vector<int> default_candidates(long n);

/// Fold label per row. folds == N gives the identity (exact leave-one-out);
/// otherwise a seeded shuffle dealt round-robin.
std::vector<int> fold_assignment(long n, int folds, unsigned long long seed);

CvResult select_k(const Dataset& data, const std::vector<int>& candidates, CvMode mode,
                  int folds, const FitOptions& opts = {}, unsigned long long seed = 0,
                  int threads = 1);

/// Smallest k among the minimal finite scores; throws SelectionFailure if none is finite.
int argmin_score(const std::map<int, double>& scores);

std::string to_string(CvMode mode);

}  // namespace sieveate
