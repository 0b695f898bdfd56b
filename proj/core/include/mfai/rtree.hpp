#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mfai/aux_table.hpp"

namespace mfai {

/// Raised when a tree cannot be grown from the given data.
class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TreeParams {
  std::size_t max_depth = 3;
  std::size_t min_node = 10;
  double min_gain = 0.0;
  std::size_t max_surrogates = 5;

  void validate() const;
};

enum class Side : std::uint8_t { left, right };

/// One routing rule. Numeric: rows with value < threshold go to `below`, the
/// rest to the other side. Categorical: a level goes left or right by
/// membership; levels in neither list (unseen in training) count as missing.
struct SplitRule {
  std::size_t var = 0;
  ColumnKind kind = ColumnKind::numeric;
  double threshold = 0.0;
  Side below = Side::left;
  std::vector<int> left_levels;
  std::vector<int> right_levels;

  /// nullopt when the value is missing or an unseen level.
  std::optional<Side> route(double value) const;

  friend bool operator==(const SplitRule&, const SplitRule&) = default;
};

struct Surrogate {
  SplitRule rule;
  double agreement = 0.0;          ///< in [0, 1]
  double adjusted_goodness = 0.0;  ///< goodness x (agreement - majority baseline)

  friend bool operator==(const Surrogate&, const Surrogate&) = default;
};

struct TreeNode {
  double value = 0.0;  ///< mean training response routed to this node
  std::size_t n_train = 0;
  // internal nodes only
  SplitRule rule;
  double goodness = 0.0;  ///< SSE reduction of the primary split
  std::vector<Surrogate> surrogates;
  Side majority = Side::left;
  int left = -1;
  int right = -1;

  bool is_leaf() const { return left < 0; }

  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

/// Least-squares CART tree. Node 0 is the root.
class RegressionTree {
 public:
  RegressionTree() = default;
  RegressionTree(std::vector<TreeNode> nodes, std::size_t n_covariates);

  /// Single-leaf tree predicting `value` everywhere.
  static RegressionTree constant(double value, std::size_t n_covariates);

  const std::vector<TreeNode>& nodes() const { return nodes_; }
  std::size_t n_covariates() const { return n_covariates_; }

  /// Per-covariate importance: goodness summed over splits where the
  /// covariate is primary plus adjusted goodness where it is a surrogate.
  const std::vector<double>& importance() const { return importance_; }

  /// Routes through primary rule, then surrogates in order, then majority.
  double predict(std::span<const double> row) const;
  double predict(const AuxTable& x, std::size_t r) const;
  Eigen::VectorXd predict(const AuxTable& x) const;

  /// Index of the leaf a row lands in.
  std::size_t leaf_index(std::span<const double> row) const;

  std::size_t depth() const;
  std::size_t n_leaves() const;

  friend bool operator==(const RegressionTree&, const RegressionTree&) = default;

 private:
  template <class Get>
  std::size_t walk(Get&& get) const;

  std::vector<TreeNode> nodes_;
  std::size_t n_covariates_ = 0;
  std::vector<double> importance_;
};

/// Greedy recursive partitioning minimizing squared error.
///
/// Numeric splits scan midpoints between sorted distinct values; categorical
/// splits order levels by mean response and scan that order. Candidate
/// splits are scored on the rows where the variable is observed. Ties go to
/// the lowest covariate index, then the smallest threshold. Rows missing the
/// split variable follow the best available surrogate, else the majority
/// child. Rows with no observed covariate never drive a split; they follow
/// the majority child and still count toward leaf means.
///
/// Throws FitError when no row has an observed covariate, and
/// std::invalid_argument for shape mismatches or non-finite responses.
RegressionTree fit_tree(const AuxTable& x, std::span<const double> y, const TreeParams& params);

std::vector<double> tree_importance(const RegressionTree& tree);

}  // namespace mfai
