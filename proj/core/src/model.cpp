#include "mfai/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "mfai/rng.hpp"

namespace mfai {

namespace {

void check_shapes(const MaskedMatrix& y, const AuxTable& x) {
  if (x.n_rows() != y.n_rows()) {
    throw std::invalid_argument("covariates have " + std::to_string(x.n_rows()) +
                                " rows, matrix has " + std::to_string(y.n_rows()));
  }
  if (y.n_observed() == 0) throw std::invalid_argument("matrix has no observed entries");
}

MfaiModel empty_model(const MaskedMatrix& y, const AuxTable& x, const FitOptions& opts) {
  MfaiModel model;
  model.n = y.n_rows();
  model.m = y.n_cols();
  model.c = x.n_cols();
  model.noise_mode = opts.noise_mode;
  model.schema = x.schema();
  return model;
}

FitOptions factor_options(const FitOptions& opts, std::size_t k) {
  FitOptions o = opts;
  if (k > 0) o.seed = derive_seed(opts.seed, k);
  return o;
}

// r -= sign * mu nu^T on the observed cells
void add_outer(std::vector<double>& r, const MaskedMatrix& y, const FactorState& s, double sign) {
  const auto cells = y.cells();
  for (std::size_t k = 0; k < cells.size(); ++k) {
    r[k] += sign * s.mu(cells[k].row) * s.nu(cells[k].col);
  }
}

double summed_elbo(const MfaiModel& model, const MaskedMatrix& y, const AuxTable& x,
                   const FitOptions& opts) {
  std::vector<double> r = observed_residual(model, y);
  double total = 0.0;
  for (const auto& s : model.factors) {
    add_outer(r, y, s, 1.0);
    const FactorProblem p(y.with_values(r), x, opts.route, opts.threads);
    total += elbo(p, s);
    add_outer(r, y, s, -1.0);
  }
  return total;
}

MfaiModel greedy(const MaskedMatrix& y, const AuxTable& x, std::size_t k_max, const double* sc,
                 const FitOptions& opts) {
  opts.validate();
  check_shapes(y, x);
  if (k_max > std::min(y.n_rows(), y.n_cols())) {
    throw std::invalid_argument("rank " + std::to_string(k_max) + " exceeds min(N, M)");
  }
  MfaiModel model = empty_model(y, x, opts);
  std::vector<double> r(y.values().begin(), y.values().end());
  for (std::size_t k = 0; k < k_max; ++k) {
    FactorState s = fit_single_factor(y.with_values(r), x, factor_options(opts, k));
    if (sc != nullptr && null_check_statistic(s) < *sc) break;
    add_outer(r, y, s, -1.0);
    model.factors.push_back(std::move(s));
  }
  return model;
}

}  // namespace

MfaiModel fit_greedy(const MaskedMatrix& y, const AuxTable& x, std::size_t k,
                     const FitOptions& opts) {
  return greedy(y, x, k, nullptr, opts);
}

MfaiModel fit_greedy_auto(const MaskedMatrix& y, const AuxTable& x, std::size_t k_max, double sc,
                          const FitOptions& opts) {
  if (k_max < 1) throw std::invalid_argument("k_max must be >= 1");
  if (!(sc >= 0.0)) throw std::invalid_argument("null-check constant must be >= 0");
  return greedy(y, x, k_max, &sc, opts);
}

double null_check_statistic(const FactorState& s) {
  const double n = static_cast<double>(s.mu.size());
  const double m = static_cast<double>(s.nu.size());
  // Var over all entries of mu nu^T, population convention
  const double second = (s.mu.squaredNorm() / n) * (s.nu.squaredNorm() / m);
  const double first = (s.mu.sum() / n) * (s.nu.sum() / m);
  const double var = std::max(0.0, second - first * first);
  double tau = s.tau(0);
  if (s.tau.size() > 1) tau = 1.0 / s.tau.cwiseInverse().mean();
  return var * tau;
}

MfaiModel backfit(MfaiModel model, const MaskedMatrix& y, const AuxTable& x,
                  const FitOptions& opts, const BackfitOptions& bopts) {
  opts.validate();
  check_shapes(y, x);
  if (model.n != y.n_rows() || model.m != y.n_cols() || model.c != x.n_cols()) {
    throw std::invalid_argument("backfit: model shape does not match the data");
  }
  if (bopts.max_sweeps < 1 || !(bopts.tol_rel > 0.0)) {
    throw std::invalid_argument("backfit: max_sweeps must be >= 1 and tol > 0");
  }
  model.backfit_trace.clear();
  if (model.factors.empty()) return model;
  // loaded models carry no cached F(X)
  for (auto& s : model.factors) {
    if (s.fx.size() != static_cast<Eigen::Index>(model.n)) s.fx = s.f.evaluate(x);
  }

  double prev = summed_elbo(model, y, x, opts);
  model.backfit_trace.push_back(prev);
  std::vector<double> r = observed_residual(model, y);
  for (std::size_t sweep = 0; sweep < bopts.max_sweeps; ++sweep) {
    double total = 0.0;
    for (auto& s : model.factors) {
      add_outer(r, y, s, 1.0);
      s = continue_fit(std::move(s), y.with_values(r), x, opts);
      total += s.elbo_trace.back();
      add_outer(r, y, s, -1.0);
    }
    model.backfit_trace.push_back(total);
    if (std::abs(total - prev) <= bopts.tol_rel * std::max(1.0, std::abs(prev))) break;
    prev = total;
  }
  return model;
}

Eigen::MatrixXd impute(const MfaiModel& model) {
  Eigen::MatrixXd out =
      Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(model.n), static_cast<Eigen::Index>(model.m));
  for (const auto& s : model.factors) out.noalias() += s.mu * s.nu.transpose();
  return out;
}

std::vector<double> observed_residual(const MfaiModel& model, const MaskedMatrix& y) {
  if (model.n != y.n_rows() || model.m != y.n_cols()) {
    throw std::invalid_argument("model shape does not match the matrix");
  }
  std::vector<double> r(y.values().begin(), y.values().end());
  for (const auto& s : model.factors) add_outer(r, y, s, -1.0);
  return r;
}

std::vector<std::vector<double>> model_importance(const MfaiModel& model, bool normalize) {
  std::vector<std::vector<double>> out;
  out.reserve(model.factors.size());
  for (const auto& s : model.factors) out.push_back(s.f.total_importance(normalize));
  return out;
}

}  // namespace mfai
