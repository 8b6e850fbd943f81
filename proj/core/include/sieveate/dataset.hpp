#pragma once

#include <Eigen/Dense>

#include <vector>

namespace sieveate {

/// Observed sample: outcome Y, binary treatment D, covariates X (N x d).
struct Dataset {
  Eigen::VectorXd outcomes;
  Eigen::VectorXd treatments;
  Eigen::MatrixXd covariates;

  Eigen::Index size() const { return outcomes.size(); }
  Eigen::Index dim() const { return covariates.cols(); }

  /// Throws unless shapes agree, N >= d + 2, entries are finite, and both arms are present.
  void validate() const;

  /// Rows in `rows`, in that order.
  Dataset subset(const std::vector<Eigen::Index>& rows) const;
};

}  // namespace sieveate
