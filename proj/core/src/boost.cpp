#include "mfai/boost.hpp"

#include <numeric>
#include <stdexcept>
#include <string>

namespace mfai {

namespace {

void check_shrinkage(double s) {
  if (!(s > 0.0 && s < 1.0)) {
    throw std::invalid_argument("TreeEnsemble: shrinkage must lie in (0, 1), got " +
                                std::to_string(s));
  }
}

}  // namespace

Eigen::VectorXd TreeEnsemble::evaluate(const AuxTable& x) const {
  if (x.n_cols() != n_covariates_) {
    throw std::invalid_argument("TreeEnsemble::evaluate: expected " +
                                std::to_string(n_covariates_) + " covariates, got " +
                                std::to_string(x.n_cols()));
  }
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(x.n_rows()));
  for (const auto& stage : stages_) {
    for (std::size_t r = 0; r < x.n_rows(); ++r) {
      out(static_cast<Eigen::Index>(r)) += stage.shrinkage * stage.tree->predict(x, r);
    }
  }
  return out;
}

double TreeEnsemble::evaluate(const AuxTable& x, std::size_t r) const {
  if (x.n_cols() != n_covariates_) {
    throw std::invalid_argument("TreeEnsemble::evaluate: covariate count mismatch");
  }
  double sum = 0.0;
  for (const auto& stage : stages_) sum += stage.shrinkage * stage.tree->predict(x, r);
  return sum;
}

TreeEnsemble TreeEnsemble::append(RegressionTree tree, double shrinkage) const {
  TreeEnsemble out = *this;
  out.push(std::move(tree), shrinkage);
  return out;
}

void TreeEnsemble::push(RegressionTree tree, double shrinkage) {
  check_shrinkage(shrinkage);
  if (tree.n_covariates() != n_covariates_) {
    throw std::invalid_argument("TreeEnsemble: tree covariate count mismatch");
  }
  stages_.push_back({std::make_shared<const RegressionTree>(std::move(tree)), shrinkage});
}

std::vector<double> TreeEnsemble::total_importance(bool normalize) const {
  std::vector<double> total(n_covariates_, 0.0);
  for (const auto& stage : stages_) {
    const auto& imp = stage.tree->importance();
    for (std::size_t c = 0; c < n_covariates_; ++c) total[c] += imp[c];
  }
  return normalize ? normalize_importance(std::move(total)) : total;
}

std::vector<double> normalize_importance(std::vector<double> importance) {
  const double sum = std::accumulate(importance.begin(), importance.end(), 0.0);
  if (sum > 0.0) {
    for (double& v : importance) v /= sum;
  }
  return importance;
}

bool operator==(const TreeEnsemble& a, const TreeEnsemble& b) {
  if (a.n_covariates_ != b.n_covariates_ || a.stages_.size() != b.stages_.size()) return false;
  for (std::size_t i = 0; i < a.stages_.size(); ++i) {
    if (a.stages_[i].shrinkage != b.stages_[i].shrinkage) return false;
    if (!(*a.stages_[i].tree == *b.stages_[i].tree)) return false;
  }
  return true;
}

}  // namespace mfai
