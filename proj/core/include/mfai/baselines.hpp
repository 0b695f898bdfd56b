#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "mfai/data.hpp"

namespace mfai {

struct HardImputeResult {
  Eigen::MatrixXd estimate;
  std::size_t iterations = 0;
  std::vector<double> objective;  ///< observed-entry squared error per iteration
};

/// Alternating fill-in and rank-k truncated SVD, starting from zero.
/// Stops when the relative Frobenius change of the estimate drops below tol.
HardImputeResult hard_impute_trace(const MaskedMatrix& y, std::size_t k, std::size_t max_iter,
                                   double tol);
Eigen::MatrixXd hard_impute(const MaskedMatrix& y, std::size_t k, std::size_t max_iter = 500,
                            double tol = 1e-6);

/// Observed entries kept; missing entries get their column's observed mean
/// (the global mean for columns with nothing observed).
Eigen::MatrixXd column_mean_impute(const MaskedMatrix& y);

}  // namespace mfai
