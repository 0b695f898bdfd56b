#pragma once

#include <cstddef>
#include <cstdint>

#include <Eigen/Dense>

#include "mfai/aux_table.hpp"
#include "mfai/data.hpp"

namespace mfai {

/// Synthetic design: X ~ U(-10, 10), factor means from three fixed
/// functional forms, loadings ~ N(0, 1), Gaussian noise calibrated to a
/// target proportion of variance explained (PVE).
struct SimConfig {
  std::size_t n = 1000;
  std::size_t m = 1000;
  std::size_t c = 3;
  std::size_t k = 3;
  double pve_factor = 0.95;
  double pve_total = 0.5;
  double missing_ratio = 0.5;
  std::uint64_t seed = 1;
};

struct SimTruth {
  AuxTable x;
  Eigen::MatrixXd f;       ///< N x K noiseless factor means F_k(X)
  Eigen::MatrixXd z;       ///< N x K factors
  Eigen::MatrixXd w;       ///< M x K loadings
  Eigen::MatrixXd y_true;  ///< Z W^T
  MaskedMatrix y;          ///< noisy, masked observation
  double tau_true = 0.0;
  Eigen::VectorXd beta_true;
};

/// The three mean functions. `form` is taken modulo 3:
///   0: x1/2 - x2
///   1: x1^2/10 - x2^2/10 + x1*x2/5
///   2: 5 sin(x3^3/100)
double sim_mean_function(std::size_t form, double x1, double x2, double x3);

/// Factor k uses form k mod 3 applied to covariate columns 3*(k/3) .. 3*(k/3)+2,
/// so C must be at least 3*ceil(K/3); any further columns are pure noise.
/// Variances are population variances of the realized draw, so the returned
/// beta_true and tau_true reproduce pve_factor and pve_total exactly.
SimTruth simulate_dataset(const SimConfig& cfg);

/// [X, X_pmt, X_rdd]: X_pmt holds the first n_permuted columns of X with
/// rows permuted (one shared permutation), X_rdd holds n_redundant fresh
/// U(-10, 10) columns.
AuxTable augment_covariates(const AuxTable& x, std::size_t n_permuted, std::size_t n_redundant,
                            std::uint64_t seed);

}  // namespace mfai
