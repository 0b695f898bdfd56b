#pragma once

#include <cstddef>
#include <memory>
#include <vector>

#include <Eigen/Dense>

#include "mfai/aux_table.hpp"
#include "mfai/rtree.hpp"

namespace mfai {

struct Stage {
  std::shared_ptr<const RegressionTree> tree;
  double shrinkage = 0.1;
};

/// F(x) = sum over stages of shrinkage * tree(x). Empty evaluates to zero.
class TreeEnsemble {
 public:
  TreeEnsemble() = default;
  explicit TreeEnsemble(std::size_t n_covariates) : n_covariates_(n_covariates) {}

  std::size_t n_covariates() const { return n_covariates_; }
  std::size_t size() const { return stages_.size(); }
  bool empty() const { return stages_.empty(); }
  const std::vector<Stage>& stages() const { return stages_; }

  Eigen::VectorXd evaluate(const AuxTable& x) const;
  double evaluate(const AuxTable& x, std::size_t r) const;

  /// Returns a copy with one more stage. Stages are shared, not cloned.
  TreeEnsemble append(RegressionTree tree, double shrinkage) const;
  void push(RegressionTree tree, double shrinkage);

  /// Per-covariate sum of stage tree importances. With `normalize`, rescaled
  /// to sum to one (all zeros stay zeros).
  std::vector<double> total_importance(bool normalize = false) const;

  friend bool operator==(const TreeEnsemble& a, const TreeEnsemble& b);

 private:
  std::size_t n_covariates_ = 0;
  std::vector<Stage> stages_;
};

std::vector<double> normalize_importance(std::vector<double> importance);

}  // namespace mfai
