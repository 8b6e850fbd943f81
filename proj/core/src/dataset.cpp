#include "sieveate/dataset.hpp"

#include "sieveate/error.hpp"

#include <string>

namespace sieveate {

void Dataset::validate() const {
  const auto n = outcomes.size();
  if (treatments.size() != n || covariates.rows() != n) {
    fail(ErrorCode::InvalidArgument,
         "dataset: outcome, treatment and covariate row counts differ (" + std::to_string(n) +
             ", " + std::to_string(treatments.size()) + ", " +
             std::to_string(covariates.rows()) + ")");
  }
  if (covariates.cols() < 1) fail(ErrorCode::InvalidArgument, "dataset: no covariates");
  if (n < covariates.cols() + 2) {
    fail(ErrorCode::InsufficientData, "dataset: need at least d + 2 = " +
                                          std::to_string(covariates.cols() + 2) +
                                          " rows, got " + std::to_string(n));
  }
  if (!outcomes.allFinite() || !covariates.allFinite()) {
    fail(ErrorCode::InvalidArgument, "dataset: non-finite outcome or covariate entry");
  }
  bool any_treated = false, any_control = false;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double d = treatments[i];
    if (d == 1.0) {
      any_treated = true;
    } else if (d == 0.0) {
      any_control = true;
    } else {
      fail(ErrorCode::Validation, "dataset: treatment at row " + std::to_string(i + 1) +
                                      " is not 0 or 1");
    }
  }
  if (!any_treated || !any_control) {
    fail(ErrorCode::InvalidArgument, "dataset: treatment has only one arm");
  }
}

Dataset Dataset::subset(const std::vector<Eigen::Index>& rows) const {
  Dataset out;
  const auto m = static_cast<Eigen::Index>(rows.size());
  out.outcomes.resize(m);
  out.treatments.resize(m);
  out.covariates.resize(m, covariates.cols());
  for (Eigen::Index i = 0; i < m; ++i) {
    out.outcomes[i] = outcomes[rows[i]];
    out.treatments[i] = treatments[rows[i]];
    out.covariates.row(i) = covariates.row(rows[i]);
  }
  return out;
}

}  // namespace sieveate
