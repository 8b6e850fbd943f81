#pragma once

#include "sieveate/dataset.hpp"
#include "sieveate/error.hpp"

#include <Eigen/Dense>
#include <doctest.h>

#include <random>

namespace testutil {

// Small random logistic single-index sample with both arms present.
inline sieveate::Dataset random_dataset(std::mt19937_64& rng, long n, long d) {
  std::normal_distribution<double> z;
  std::uniform_real_distribution<double> u;
  sieveate::Dataset data;
  for (;;) {
    data.covariates.resize(n, d);
    data.outcomes.resize(n);
    data.treatments.resize(n);
    Eigen::VectorXd theta(d);
    for (long j = 0; j < d; ++j) theta[j] = z(rng);
    theta.normalize();
    for (long i = 0; i < n; ++i) {
      for (long j = 0; j < d; ++j) data.covariates(i, j) = z(rng);
      const double w = data.covariates.row(i).dot(theta);
      const double p = 1.0 / (1.0 + std::exp(-(0.3 + std::sin(w) + 0.5 * w)));
      data.treatments[i] = u(rng) < p ? 1.0 : 0.0;
      data.outcomes[i] = data.treatments[i] + w + z(rng);
    }
    const double s = data.treatments.sum();
    if (s >= 2.0 && s <= static_cast<double>(n) - 2.0) return data;
  }
}

inline Eigen::VectorXd random_unit(std::mt19937_64& rng, long d) {
  std::normal_distribution<double> z;
  Eigen::VectorXd v(d);
  for (long j = 0; j < d; ++j) v[j] = z(rng);
  return v.normalized();
}

inline Eigen::VectorXd random_vector(std::mt19937_64& rng, long k, double scale = 1.0) {
  std::normal_distribution<double> z(0.0, scale);
  Eigen::VectorXd v(k);
  for (long j = 0; j < k; ++j) v[j] = z(rng);
  return v;
}

template <typename F>
sieveate::ErrorCode error_code_of(F&& f) {
  try {
    f();
  } catch (const sieveate::Error& e) {
    return e.code();
  }
  FAIL("expected sieveate::Error");
  return sieveate::ErrorCode::InvalidArgument;
}

}  // namespace testutil
