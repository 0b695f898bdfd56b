#include "mfai/baselines.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include <Eigen/SVD>

namespace mfai {

HardImputeResult hard_impute_trace(const MaskedMatrix& y, std::size_t k, std::size_t max_iter,
                                   double tol) {
  const auto n = static_cast<Eigen::Index>(y.n_rows());
  const auto m = static_cast<Eigen::Index>(y.n_cols());
  if (k > std::min(y.n_rows(), y.n_cols())) {
    throw std::invalid_argument("hard_impute: rank " + std::to_string(k) + " exceeds min(N, M)");
  }
  if (max_iter < 1 || !(tol > 0.0)) {
    throw std::invalid_argument("hard_impute: max_iter must be >= 1 and tol > 0");
  }
  const auto cells = y.cells();
  const auto vals = y.values();
  const auto kk = static_cast<Eigen::Index>(k);

  HardImputeResult res;
  res.estimate = Eigen::MatrixXd::Zero(n, m);
  if (k == 0) return res;
  Eigen::MatrixXd filled(n, m);
  for (std::size_t it = 0; it < max_iter; ++it) {
    filled = res.estimate;
    for (std::size_t i = 0; i < cells.size(); ++i) filled(cells[i].row, cells[i].col) = vals[i];
    Eigen::BDCSVD<Eigen::MatrixXd> svd(filled, Eigen::ComputeThinU | Eigen::ComputeThinV);
    Eigen::MatrixXd next = svd.matrixU().leftCols(kk) *
                           svd.singularValues().head(kk).asDiagonal() *
                           svd.matrixV().leftCols(kk).transpose();
    const double denom = std::max(next.norm(), 1e-300);
    const double change = (next - res.estimate).norm() / denom;
    res.estimate = std::move(next);
    res.iterations = it + 1;
    double obj = 0.0;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      const double d = vals[i] - res.estimate(cells[i].row, cells[i].col);
      obj += d * d;
    }
    res.objective.push_back(obj);
    if (change < tol) break;
  }
  return res;
}

Eigen::MatrixXd hard_impute(const MaskedMatrix& y, std::size_t k, std::size_t max_iter,
                            double tol) {
  return hard_impute_trace(y, k, max_iter, tol).estimate;
}

Eigen::MatrixXd column_mean_impute(const MaskedMatrix& y) {
  const auto n = static_cast<Eigen::Index>(y.n_rows());
  const auto m = static_cast<Eigen::Index>(y.n_cols());
  const auto cells = y.cells();
  const auto vals = y.values();
  double global = 0.0;
  for (const double v : vals) global += v;
  if (!vals.empty()) global /= static_cast<double>(vals.size());
  Eigen::MatrixXd out(n, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    const auto pos = y.col_positions(static_cast<std::size_t>(j));
    double mean = global;
    if (!pos.empty()) {
      mean = 0.0;
      for (const std::size_t k : pos) mean += vals[k];
      mean /= static_cast<double>(pos.size());
    }
    out.col(j).setConstant(mean);
    for (const std::size_t k : pos) out(cells[k].row, j) = vals[k];
  }
  return out;
}

}  // namespace mfai
