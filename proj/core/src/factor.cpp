#include "mfai/factor.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "mfai/parallel.hpp"
#include "mfai/rng.hpp"

namespace mfai {

std::string_view to_string(NoiseMode mode) {
  return mode == NoiseMode::shared ? "shared" : "per-feature";
}

NoiseMode noise_mode_from_string(std::string_view s) {
  if (s == "shared") return NoiseMode::shared;
  if (s == "per-feature" || s == "per_feature") return NoiseMode::per_feature;
  throw std::invalid_argument("unknown noise mode '" + std::string(s) + "'");
}

void FitOptions::validate() const {
  if (max_iter < 1) throw std::invalid_argument("FitOptions: max_iter must be >= 1");
  if (!(tol_elbo_rel > 0.0)) throw std::invalid_argument("FitOptions: tol must be > 0");
  if (!(shrinkage > 0.0 && shrinkage < 1.0)) {
    throw std::invalid_argument("FitOptions: shrinkage must lie in (0, 1)");
  }
  if (threads < 1) throw std::invalid_argument("FitOptions: threads must be >= 1");
  tree_params.validate();
}

FactorProblem::FactorProblem(const MaskedMatrix& y, const AuxTable& x, Route route,
                             std::size_t threads)
    : y_(y), x_(&x), threads_(std::max<std::size_t>(1, threads)) {
  if (y.n_observed() == 0) throw std::invalid_argument("fit: matrix has no observed entries");
  if (x.n_rows() != y.n_rows()) {
    throw std::invalid_argument("fit: covariates have " + std::to_string(x.n_rows()) +
                                " rows, matrix has " + std::to_string(y.n_rows()));
  }
  if (route == Route::dense && !y.fully_observed()) {
    throw std::invalid_argument("fit: dense route needs a fully observed matrix");
  }
  dense_ = route == Route::dense || (route == Route::automatic && y.fully_observed());
  if (dense_) {
    y_dense_ = y.to_dense();
    y_dense_t_ = y_dense_.transpose();
  }
  double ss = 0.0;
  for (const double v : y.values()) ss += v * v;
  ss /= static_cast<double>(y.n_observed());
  if (ss > 0.0 && std::isfinite(ss)) scale2_ = ss;
}

namespace {

using Eigen::Index;

double clamp_precision(double v, double scale) {
  const double lo = kPrecisionFloor / scale;
  const double hi = kPrecisionCeil / scale;
  if (std::isnan(v)) return hi;
  return std::clamp(v, lo, hi);
}

void check_state(const FactorProblem& p, const FactorState& s) {
  const auto n = static_cast<Index>(p.y().n_rows());
  const auto m = static_cast<Index>(p.y().n_cols());
  if (s.mu.size() != n || s.a2.size() != n || s.fx.size() != n || s.nu.size() != m ||
      s.b2.size() != m || (s.tau.size() != 1 && s.tau.size() != m)) {
    throw std::invalid_argument("factor state does not match the matrix shape");
  }
}

// Per column: observed count and
//   Q_m = sum_n [(y - mu nu)^2 + mu^2 b2 + a2 nu^2 + a2 b2]
// over the observed rows of column m.
struct ColumnTerms {
  Eigen::VectorXd q;
  Eigen::VectorXd count;
};

ColumnTerms column_terms(const FactorProblem& p, const FactorState& s) {
  const auto m = static_cast<Index>(p.y().n_cols());
  ColumnTerms out{Eigen::VectorXd(m), Eigen::VectorXd(m)};
  if (p.dense()) {
    const auto& y = p.y_dense();
    const double mu2 = s.mu.squaredNorm();
    const double sa2 = s.a2.sum();
    parallel_for(static_cast<std::size_t>(m), p.threads(), [&](std::size_t b, std::size_t e) {
      for (auto j = static_cast<Index>(b); j < static_cast<Index>(e); ++j) {
        const double nuj = s.nu(j);
        double sse = 0.0;
        for (Index i = 0; i < y.rows(); ++i) {
          const double d = y(i, j) - s.mu(i) * nuj;
          sse += d * d;
        }
        out.q(j) = sse + mu2 * s.b2(j) + sa2 * nuj * nuj + sa2 * s.b2(j);
        out.count(j) = static_cast<double>(y.rows());
      }
    });
    return out;
  }
  const auto cells = p.y().cells();
  const auto vals = p.y().values();
  parallel_for(static_cast<std::size_t>(m), p.threads(), [&](std::size_t b, std::size_t e) {
    for (std::size_t j = b; j < e; ++j) {
      const auto jj = static_cast<Index>(j);
      const double nuj = s.nu(jj);
      const double b2j = s.b2(jj);
      double q = 0.0;
      const auto pos = p.y().col_positions(j);
      for (const std::size_t k : pos) {
        const auto i = static_cast<Index>(cells[k].row);
        const double d = vals[k] - s.mu(i) * nuj;
        q += d * d + s.mu(i) * s.mu(i) * b2j + s.a2(i) * nuj * nuj + s.a2(i) * b2j;
      }
      out.q(jj) = q;
      out.count(jj) = static_cast<double>(pos.size());
    }
  });
  return out;
}

}  // namespace

void e_step(const FactorProblem& p, FactorState& s) {
  check_state(p, s);
  const auto n = static_cast<Index>(p.y().n_rows());
  const auto m = static_cast<Index>(p.y().n_cols());
  const bool shared = s.tau.size() == 1;
  const double beta = s.beta;

  if (p.dense()) {
    // q(z): shared scalar variance
    double prec = 0.0;
    if (shared) {
      prec = s.tau(0) * (s.nu.squaredNorm() + s.b2.sum());
    } else {
      for (Index j = 0; j < m; ++j) prec += s.tau(j) * (s.nu(j) * s.nu(j) + s.b2(j));
    }
    const double a2 = 1.0 / (beta + prec);
    const Eigen::VectorXd tnu = shared ? Eigen::VectorXd(s.tau(0) * s.nu)
                                       : Eigen::VectorXd(s.tau.cwiseProduct(s.nu));
    const auto& yt = p.y_dense_t();
    parallel_for(static_cast<std::size_t>(n), p.threads(), [&](std::size_t b, std::size_t e) {
      for (auto i = static_cast<Index>(b); i < static_cast<Index>(e); ++i) {
        s.mu(i) = a2 * (beta * s.fx(i) + yt.col(i).dot(tnu));
      }
    });
    s.a2.setConstant(a2);
    // q(w) uses the fresh q(z)
    const double zz = s.mu.squaredNorm() + s.a2.sum();
    const auto& y = p.y_dense();
    parallel_for(static_cast<std::size_t>(m), p.threads(), [&](std::size_t b, std::size_t e) {
      for (auto j = static_cast<Index>(b); j < static_cast<Index>(e); ++j) {
        const double t = s.tau_at(j);
        const double b2 = 1.0 / (1.0 + t * zz);
        s.b2(j) = b2;
        s.nu(j) = b2 * t * y.col(j).dot(s.mu);
      }
    });
    return;
  }

  const auto cells = p.y().cells();
  const auto vals = p.y().values();
  parallel_for(static_cast<std::size_t>(n), p.threads(), [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      double prec = 0.0;
      double lin = 0.0;
      for (std::size_t k = p.y().row_begin(i); k < p.y().row_end(i); ++k) {
        const auto j = static_cast<Index>(cells[k].col);
        const double t = s.tau_at(j);
        prec += t * (s.nu(j) * s.nu(j) + s.b2(j));
        lin += t * vals[k] * s.nu(j);
      }
      const auto ii = static_cast<Index>(i);
      const double a2 = 1.0 / (beta + prec);
      s.a2(ii) = a2;
      s.mu(ii) = a2 * (beta * s.fx(ii) + lin);
    }
  });
  parallel_for(static_cast<std::size_t>(m), p.threads(), [&](std::size_t b, std::size_t e) {
    for (std::size_t j = b; j < e; ++j) {
      double zz = 0.0;
      double lin = 0.0;
      for (const std::size_t k : p.y().col_positions(j)) {
        const auto i = static_cast<Index>(cells[k].row);
        zz += s.mu(i) * s.mu(i) + s.a2(i);
        lin += vals[k] * s.mu(i);
      }
      const auto jj = static_cast<Index>(j);
      const double t = s.tau_at(jj);
      const double b2 = 1.0 / (1.0 + t * zz);
      s.b2(jj) = b2;
      s.nu(jj) = b2 * t * lin;
    }
  });
}

void m_step_precisions(const FactorProblem& p, FactorState& s) {
  check_state(p, s);
  const ColumnTerms ct = column_terms(p, s);
  const double scale = p.scale2();
  if (s.tau.size() == 1) {
    s.tau(0) = clamp_precision(ct.count.sum() / ct.q.sum(), scale);
  } else {
    for (Index j = 0; j < s.tau.size(); ++j) {
      if (ct.count(j) > 0.0) s.tau(j) = clamp_precision(ct.count(j) / ct.q(j), scale);
    }
  }
  const double prior = (s.mu - s.fx).squaredNorm() + s.a2.sum();
  s.beta = clamp_precision(static_cast<double>(s.mu.size()) / prior, std::sqrt(scale));
}

void m_step_function(const FactorProblem& p, FactorState& s, double shrinkage,
                     const TreeParams& params) {
  check_state(p, s);
  const Eigen::VectorXd r = s.mu - s.fx;
  RegressionTree tree = fit_tree(p.x(), std::span<const double>(r.data(), r.size()), params);
  const Eigen::VectorXd pred = tree.predict(p.x());
  s.f.push(std::move(tree), shrinkage);
  for (Index i = 0; i < s.fx.size(); ++i) s.fx(i) += shrinkage * pred(i);
}

double elbo(const FactorProblem& p, const FactorState& s) {
  check_state(p, s);
  const ColumnTerms ct = column_terms(p, s);
  const double log2pi = std::log(2.0 * std::numbers::pi);
  double lik = 0.0;
  if (s.tau.size() == 1) {
    const double cnt = ct.count.sum();
    lik = 0.5 * cnt * (std::log(s.tau(0)) - log2pi) - 0.5 * s.tau(0) * ct.q.sum();
  } else {
    for (Index j = 0; j < s.tau.size(); ++j) {
      lik += 0.5 * ct.count(j) * (std::log(s.tau(j)) - log2pi) - 0.5 * s.tau(j) * ct.q(j);
    }
  }
  const double n = static_cast<double>(s.mu.size());
  const double m = static_cast<double>(s.nu.size());
  const double prior_z =
      0.5 * n * std::log(s.beta) - 0.5 * s.beta * ((s.mu - s.fx).squaredNorm() + s.a2.sum());
  const double prior_w = -0.5 * (s.nu.squaredNorm() + s.b2.sum());
  const double entropy =
      0.5 * s.a2.array().log().sum() + 0.5 * s.b2.array().log().sum() + 0.5 * (n + m);
  return lik + prior_z + prior_w + entropy;
}

FactorState initialize_factor(const FactorProblem& p, const FitOptions& opts) {
  const auto n = static_cast<Index>(p.y().n_rows());
  const auto m = static_cast<Index>(p.y().n_cols());

  // column-mean imputation, global mean for empty columns
  double global = 0.0;
  for (const double v : p.y().values()) global += v;
  global /= static_cast<double>(p.y().n_observed());
  Eigen::MatrixXd d;
  if (p.dense()) {
    d = p.y_dense();
  } else {
    d.resize(n, m);
    const auto cells = p.y().cells();
    const auto vals = p.y().values();
    for (Index j = 0; j < m; ++j) {
      const auto pos = p.y().col_positions(static_cast<std::size_t>(j));
      double mean = global;
      if (!pos.empty()) {
        mean = 0.0;
        for (const std::size_t k : pos) mean += vals[k];
        mean /= static_cast<double>(pos.size());
      }
      d.col(j).setConstant(mean);
      for (const std::size_t k : pos) d(cells[k].row, j) = vals[k];
    }
  }

  // leading singular triplet by power iteration
  Rng rng(derive_seed(opts.seed, 0x5eed));
  Eigen::VectorXd v(m);
  for (Index j = 0; j < m; ++j) v(j) = rng.normal();
  v.normalize();
  Eigen::VectorXd u = Eigen::VectorXd::Zero(n);
  double sigma = 0.0;
  for (int it = 0; it < 1000; ++it) {
    u.noalias() = d * v;
    const double su = u.norm();
    if (!(su > 0.0)) {
      sigma = 0.0;
      break;
    }
    u /= su;
    Eigen::VectorXd v_next = d.transpose() * u;
    sigma = v_next.norm();
    if (!(sigma > 0.0)) break;
    v_next /= sigma;
    const double change = (v_next - v).norm();
    v = std::move(v_next);
    if (change < 1e-10) break;
  }
  if (v.sum() < 0.0) {
    u = -u;
    v = -v;
  }

  FactorState s;
  const double root = std::sqrt(sigma);
  s.mu = sigma > 0.0 ? Eigen::VectorXd(u * root) : Eigen::VectorXd::Zero(n);
  s.nu = sigma > 0.0 ? Eigen::VectorXd(v * root) : Eigen::VectorXd::Zero(m);
  s.a2 = Eigen::VectorXd::Ones(n);
  s.b2 = Eigen::VectorXd::Ones(m);

  const double var_y = population_variance(p.y().values());
  const double tau0 = var_y > 0.0 && std::isfinite(var_y) ? 1.0 / var_y : 1.0;
  const double t = clamp_precision(tau0, p.scale2());
  s.tau = opts.noise_mode == NoiseMode::shared ? Eigen::VectorXd::Constant(1, t)
                                               : Eigen::VectorXd::Constant(m, t);
  const double var_mu =
      population_variance(std::span<const double>(s.mu.data(), static_cast<std::size_t>(n)));
  const double beta0 = var_mu > 0.0 && std::isfinite(var_mu) ? 1.0 / var_mu : 1.0;
  s.beta = clamp_precision(beta0, std::sqrt(p.scale2()));
  s.f = TreeEnsemble(p.x().n_cols());
  s.fx = Eigen::VectorXd::Zero(n);
  s.elbo_trace = {elbo(p, s)};
  return s;
}

void run_em(const FactorProblem& p, FactorState& s, const FitOptions& opts) {
  opts.validate();
  check_state(p, s);
  if (s.elbo_trace.empty()) s.elbo_trace.push_back(elbo(p, s));
  for (std::size_t it = 1; it <= opts.max_iter; ++it) {
    e_step(p, s);
    m_step_precisions(p, s);
    m_step_function(p, s, opts.shrinkage, opts.tree_params);
    const double prev = s.elbo_trace.back();
    const double cur = elbo(p, s);
    s.elbo_trace.push_back(cur);
    ++s.iterations;
    if (opts.on_iteration) opts.on_iteration(it, cur);
    if (std::abs(cur - prev) <= opts.tol_elbo_rel * std::max(1.0, std::abs(prev))) {
      s.converged = true;
      break;
    }
  }
}

FactorState fit_single_factor(const MaskedMatrix& y, const AuxTable& x, const FitOptions& opts) {
  opts.validate();
  const FactorProblem p(y, x, opts.route, opts.threads);
  FactorState s = initialize_factor(p, opts);
  run_em(p, s, opts);
  return s;
}

FactorState continue_fit(FactorState s, const MaskedMatrix& y, const AuxTable& x,
                         const FitOptions& opts) {
  opts.validate();
  const FactorProblem p(y, x, opts.route, opts.threads);
  if (s.noise_mode() != opts.noise_mode) {
    throw std::invalid_argument("continue_fit: state noise mode differs from options");
  }
  if (s.f.n_covariates() != x.n_cols()) {
    throw std::invalid_argument("continue_fit: ensemble covariate count mismatch");
  }
  if (s.fx.size() != static_cast<Index>(y.n_rows())) s.fx = s.f.evaluate(x);
  check_state(p, s);
  s.elbo_trace = {elbo(p, s)};
  s.iterations = 0;
  s.converged = false;
  run_em(p, s, opts);
  return s;
}

}  // namespace mfai
