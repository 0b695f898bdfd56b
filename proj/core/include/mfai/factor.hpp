#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "mfai/aux_table.hpp"
#include "mfai/boost.hpp"
#include "mfai/data.hpp"
#include "mfai/rtree.hpp"

namespace mfai {

enum class NoiseMode { shared, per_feature };

std::string_view to_string(NoiseMode mode);
NoiseMode noise_mode_from_string(std::string_view s);

/// Which E-step / M-step / ELBO formulas to use. `dense` requires a fully
/// observed matrix and keeps a2, b2 constant; `observed` sums over the
/// observed set. `automatic` picks dense exactly when nothing is missing.
enum class Route { automatic, dense, observed };

struct FitOptions {
  std::size_t max_iter = 500;
  double tol_elbo_rel = 1e-6;
  double shrinkage = 0.1;
  TreeParams tree_params;
  NoiseMode noise_mode = NoiseMode::shared;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  Route route = Route::automatic;
  /// Called after every EM iteration with (iteration, elbo).
  std::function<void(std::size_t, double)> on_iteration;

  void validate() const;
};

/// Variational posterior and parameters of one factor.
struct FactorState {
  Eigen::VectorXd mu;   ///< N posterior means of z
  Eigen::VectorXd a2;   ///< N posterior variances of z
  Eigen::VectorXd nu;   ///< M posterior means of w
  Eigen::VectorXd b2;   ///< M posterior variances of w
  Eigen::VectorXd tau;  ///< size 1 (shared) or M (per feature)
  double beta = 1.0;
  TreeEnsemble f;
  Eigen::VectorXd fx;  ///< cached F(X), kept in step with f
  std::vector<double> elbo_trace;
  std::size_t iterations = 0;
  bool converged = false;

  NoiseMode noise_mode() const { return tau.size() == 1 ? NoiseMode::shared : NoiseMode::per_feature; }
  double tau_at(Eigen::Index m) const { return tau.size() == 1 ? tau(0) : tau(m); }
};

/// A matrix and covariate table bound together for fitting. Caches dense
/// copies of Y when the dense route is selected.
class FactorProblem {
 public:
  FactorProblem(const MaskedMatrix& y, const AuxTable& x, Route route = Route::automatic,
                std::size_t threads = 1);

  const MaskedMatrix& y() const { return y_; }
  const AuxTable& x() const { return *x_; }
  bool dense() const { return dense_; }
  std::size_t threads() const { return threads_; }
  const Eigen::MatrixXd& y_dense() const { return y_dense_; }
  const Eigen::MatrixXd& y_dense_t() const { return y_dense_t_; }
  /// Mean square of observed values, or 1 when that is zero. Sets the scale
  /// of the precision clamps.
  double scale2() const { return scale2_; }

 private:
  MaskedMatrix y_;
  const AuxTable* x_;
  bool dense_ = false;
  std::size_t threads_ = 1;
  Eigen::MatrixXd y_dense_;
  Eigen::MatrixXd y_dense_t_;
  double scale2_ = 1.0;
};

/// Closed-form update of q(z) then q(w).
void e_step(const FactorProblem& p, FactorState& s);
/// Closed-form tau (shared or per column) and beta.
void m_step_precisions(const FactorProblem& p, FactorState& s);
/// Fits one least-squares tree to mu - F(X) and appends it with `shrinkage`.
void m_step_function(const FactorProblem& p, FactorState& s, double shrinkage,
                     const TreeParams& params);
/// Evidence lower bound, including every constant.
double elbo(const FactorProblem& p, const FactorState& s);

/// Start point: leading singular pair of the mean-imputed matrix.
FactorState initialize_factor(const FactorProblem& p, const FitOptions& opts);

/// Runs EM from `s` until converged or max_iter; appends to the ELBO trace.
void run_em(const FactorProblem& p, FactorState& s, const FitOptions& opts);

FactorState fit_single_factor(const MaskedMatrix& y, const AuxTable& x, const FitOptions& opts);

/// Warm start: continues EM from an existing state on a (possibly different)
/// matrix with the same shape. The ELBO trace restarts.
FactorState continue_fit(FactorState s, const MaskedMatrix& y, const AuxTable& x,
                         const FitOptions& opts);

/// Precision clamp bounds, applied as [lo, hi] / scale.
inline constexpr double kPrecisionFloor = 1e-12;
inline constexpr double kPrecisionCeil = 1e12;

}  // namespace mfai
