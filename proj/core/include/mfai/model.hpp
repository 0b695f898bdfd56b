#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "mfai/aux_table.hpp"
#include "mfai/data.hpp"
#include "mfai/factor.hpp"

namespace mfai {

struct MfaiModel {
  std::size_t n = 0;
  std::size_t m = 0;
  std::size_t c = 0;
  NoiseMode noise_mode = NoiseMode::shared;
  std::vector<ColumnSpec> schema;
  std::vector<FactorState> factors;
  /// Summed per-factor ELBO after each backfitting sweep; first entry is the
  /// value before the first sweep. Empty for greedy fits.
  std::vector<double> backfit_trace;

  std::size_t k() const { return factors.size(); }
};

struct BackfitOptions {
  std::size_t max_sweeps = 100;
  double tol_rel = 1e-6;
};

/// Greedy fit: factor k is fitted to the residual left by factors 1..k-1 on
/// the observed entries. Factor 1 uses opts.seed; later ones derived seeds.
MfaiModel fit_greedy(const MaskedMatrix& y, const AuxTable& x, std::size_t k,
                     const FitOptions& opts);

/// Greedy with a null check: stops before the first factor whose
/// null_check_statistic falls below `sc`, discarding it.
MfaiModel fit_greedy_auto(const MaskedMatrix& y, const AuxTable& x, std::size_t k_max, double sc,
                          const FitOptions& opts);

/// Var(mu nu^T) * tau over all N*M entries of the outer product. For a
/// per-feature state tau is the reciprocal of the mean noise variance.
double null_check_statistic(const FactorState& s);

/// Cyclic warm-started refits of each factor against the residual of the
/// others, until the summed ELBO changes by less than tol_rel.
MfaiModel backfit(MfaiModel model, const MaskedMatrix& y, const AuxTable& x,
                  const FitOptions& opts, const BackfitOptions& bopts = {});

/// Sum of mu_k nu_k^T.
Eigen::MatrixXd impute(const MfaiModel& model);

/// Y - impute(model) on the observed entries, in observed-cell order.
std::vector<double> observed_residual(const MfaiModel& model, const MaskedMatrix& y);

/// One vector per factor: total ensemble importance.
std::vector<std::vector<double>> model_importance(const MfaiModel& model, bool normalize = false);

inline constexpr int kModelFormatVersion = 1;

std::string format_model(const MfaiModel& model);
MfaiModel parse_model(std::string_view json_text, const std::string& source = "<string>");
void save_model(const std::filesystem::path& path, const MfaiModel& model);
MfaiModel load_model(const std::filesystem::path& path);

}  // namespace mfai
