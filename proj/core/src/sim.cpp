#include "mfai/sim.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "mfai/rng.hpp"

namespace mfai {

namespace {

constexpr int kMaxAttempts = 10;

void validate(const SimConfig& cfg) {
  const auto inside = [](double p) { return p > 0.0 && p < 1.0; };
  if (cfg.n == 0 || cfg.m == 0 || cfg.k == 0) {
    throw std::invalid_argument("simulate_dataset: n, m and k must be positive");
  }
  if (cfg.k > std::min(cfg.n, cfg.m)) {
    throw std::invalid_argument("simulate_dataset: k exceeds min(n, m)");
  }
  const std::size_t groups = (cfg.k + 2) / 3;
  if (cfg.c < 3 * groups) {
    throw std::invalid_argument("simulate_dataset: k = " + std::to_string(cfg.k) +
                                " needs at least " + std::to_string(3 * groups) + " covariates");
  }
  if (!inside(cfg.pve_factor) || !inside(cfg.pve_total)) {
    throw std::invalid_argument("simulate_dataset: PVE values must lie in (0, 1)");
  }
  if (!(cfg.missing_ratio >= 0.0 && cfg.missing_ratio < 1.0)) {
    throw std::invalid_argument("simulate_dataset: missing ratio must lie in [0, 1)");
  }
}

double variance_of(const Eigen::Ref<const Eigen::VectorXd>& v) {
  return population_variance(std::span<const double>(v.data(), static_cast<std::size_t>(v.size())));
}

}  // namespace

double sim_mean_function(std::size_t form, double x1, double x2, double x3) {
  switch (form % 3) {
    case 0:
      return 0.5 * x1 - x2;
    case 1:
      return x1 * x1 / 10.0 - x2 * x2 / 10.0 + x1 * x2 / 5.0;
    default:
      return 5.0 * std::sin(x3 * x3 * x3 / 100.0);
  }
}

SimTruth simulate_dataset(const SimConfig& cfg) {
  validate(cfg);
  const auto n = static_cast<Eigen::Index>(cfg.n);
  const auto m = static_cast<Eigen::Index>(cfg.m);
  const auto k = static_cast<Eigen::Index>(cfg.k);

  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(attempt)));

    Eigen::MatrixXd x(n, static_cast<Eigen::Index>(cfg.c));
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      for (Eigen::Index i = 0; i < n; ++i) x(i, c) = rng.uniform(-10.0, 10.0);
    }

    Eigen::MatrixXd f(n, k);
    Eigen::VectorXd beta(k);
    bool degenerate = false;
    for (Eigen::Index j = 0; j < k; ++j) {
      const Eigen::Index base = 3 * (j / 3);
      for (Eigen::Index i = 0; i < n; ++i) {
        f(i, j) = sim_mean_function(static_cast<std::size_t>(j), x(i, base), x(i, base + 1),
                                    x(i, base + 2));
      }
      const double var = variance_of(f.col(j));
      if (!(var > 0.0)) {
        degenerate = true;
        break;
      }
      beta(j) = cfg.pve_factor / ((1.0 - cfg.pve_factor) * var);
    }
    if (degenerate) continue;

    Eigen::MatrixXd z(n, k);
    for (Eigen::Index j = 0; j < k; ++j) {
      const double sd = 1.0 / std::sqrt(beta(j));
      for (Eigen::Index i = 0; i < n; ++i) z(i, j) = f(i, j) + sd * rng.normal();
    }
    Eigen::MatrixXd w(m, k);
    for (Eigen::Index j = 0; j < k; ++j) {
      for (Eigen::Index i = 0; i < m; ++i) w(i, j) = rng.normal();
    }

    Eigen::MatrixXd y_true = z * w.transpose();
    const double var_true = population_variance(
        std::span<const double>(y_true.data(), static_cast<std::size_t>(y_true.size())));
    if (!(var_true > 0.0)) continue;
    const double tau = cfg.pve_total / ((1.0 - cfg.pve_total) * var_true);
    const double noise_sd = 1.0 / std::sqrt(tau);

    Eigen::MatrixXd y_noisy(n, m);
    for (Eigen::Index c = 0; c < m; ++c) {
      for (Eigen::Index i = 0; i < n; ++i) y_noisy(i, c) = y_true(i, c) + noise_sd * rng.normal();
    }
    MaskedMatrix y = mask_entries(MaskedMatrix::from_dense(y_noisy), cfg.missing_ratio,
                                  derive_seed(cfg.seed, 1000 + static_cast<std::uint64_t>(attempt)));

    SimTruth truth;
    truth.x = AuxTable::numeric(x);
    truth.f = std::move(f);
    truth.z = std::move(z);
    truth.w = std::move(w);
    truth.y_true = std::move(y_true);
    truth.y = std::move(y);
    truth.tau_true = tau;
    truth.beta_true = std::move(beta);
    return truth;
  }
  throw std::runtime_error("simulate_dataset: degenerate draw after " +
                           std::to_string(kMaxAttempts) + " attempts");
}

AuxTable augment_covariates(const AuxTable& x, std::size_t n_permuted, std::size_t n_redundant,
                            std::uint64_t seed) {
  if (n_permuted > x.n_cols()) {
    throw std::invalid_argument("augment_covariates: n_permuted exceeds the column count");
  }
  if (n_permuted == 0 && n_redundant == 0) return x;
  Rng rng(seed);
  std::vector<std::size_t> perm(x.n_rows());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  rng.shuffle(perm);

  std::vector<ColumnSpec> specs;
  std::vector<std::vector<double>> columns;
  for (std::size_t c = 0; c < n_permuted; ++c) {
    ColumnSpec spec = x.spec(c);
    spec.name += "_pmt";
    const auto src = x.column(c);
    std::vector<double> col(x.n_rows());
    for (std::size_t r = 0; r < x.n_rows(); ++r) col[r] = src[perm[r]];
    specs.push_back(std::move(spec));
    columns.push_back(std::move(col));
  }
  for (std::size_t j = 0; j < n_redundant; ++j) {
    specs.push_back({"rdd" + std::to_string(j + 1), ColumnKind::numeric, {}});
    std::vector<double> col(x.n_rows());
    for (double& v : col) v = rng.uniform(-10.0, 10.0);
    columns.push_back(std::move(col));
  }
  return x.hstack(AuxTable(x.n_rows(), std::move(specs), std::move(columns)));
}

}  // namespace mfai
