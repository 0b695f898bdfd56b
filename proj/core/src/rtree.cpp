#include "mfai/rtree.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <utility>

namespace mfai {

void TreeParams::validate() const {
  if (max_depth < 1) throw std::invalid_argument("TreeParams: max_depth must be >= 1");
  if (min_node < 1) throw std::invalid_argument("TreeParams: min_node must be >= 1");
  if (!(min_gain >= 0.0)) throw std::invalid_argument("TreeParams: min_gain must be >= 0");
}

std::optional<Side> SplitRule::route(double value) const {
  if (std::isnan(value)) return std::nullopt;
  if (kind == ColumnKind::numeric) {
    const Side other = below == Side::left ? Side::right : Side::left;
    return value < threshold ? below : other;
  }
  const int level = static_cast<int>(value);
  if (std::binary_search(left_levels.begin(), left_levels.end(), level)) return Side::left;
  if (std::binary_search(right_levels.begin(), right_levels.end(), level)) return Side::right;
  return std::nullopt;
}

namespace {

// Relative slack used when comparing split gains, so that candidates whose
// gains differ only by rounding resolve to the first one in scan order.
constexpr double kGainSlack = 1e-10;

struct Candidate {
  SplitRule rule;
  double gain = 0.0;
};

class TreeBuilder {
 public:
  TreeBuilder(const AuxTable& x, std::span<const double> y, const TreeParams& params)
      : x_(x), y_(y), params_(params), importance_(x.n_cols(), 0.0) {}

  std::vector<TreeNode> build(std::vector<std::size_t> rows) {
    grow(std::move(rows), 0);
    return std::move(nodes_);
  }

  std::vector<double> importance() const { return importance_; }

 private:
  int grow(std::vector<std::size_t> rows, std::size_t depth) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    double mean = 0.0;
    for (const std::size_t r : rows) mean += y_[r];
    mean /= static_cast<double>(rows.size());
    double sse = 0.0;
    double ss = 0.0;
    for (const std::size_t r : rows) {
      sse += (y_[r] - mean) * (y_[r] - mean);
      ss += y_[r] * y_[r];
    }
    nodes_[id].value = mean;
    nodes_[id].n_train = rows.size();

    // sse at rounding level of the raw sum of squares means a constant node
    if (depth >= params_.max_depth || rows.size() < 2 * params_.min_node ||
        !(sse > 1e-24 * ss)) {
      return id;
    }
    const double slack = kGainSlack * sse;
    std::optional<Candidate> best;
    for (std::size_t v = 0; v < x_.n_cols(); ++v) {
      auto cand = best_split_on(v, rows, slack);
      if (cand && (!best || cand->gain > best->gain + slack)) best = std::move(cand);
    }
    if (!best || !(best->gain > slack) || best->gain < params_.min_gain) return id;

    // primary routing for rows with the split variable observed
    std::vector<std::optional<Side>> side(rows.size());
    std::size_t n_left = 0;
    std::size_t n_right = 0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      side[i] = best->rule.route(x_(rows[i], best->rule.var));
      if (side[i]) (*side[i] == Side::left ? n_left : n_right)++;
    }
    const Side majority = n_left >= n_right ? Side::left : Side::right;
    auto surrogates = find_surrogates(*best, rows, side);

    std::vector<std::size_t> left_rows;
    std::vector<std::size_t> right_rows;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      std::optional<Side> s = side[i];
      for (auto it = surrogates.begin(); !s && it != surrogates.end(); ++it) {
        s = it->rule.route(x_(rows[i], it->rule.var));
      }
      ((s.value_or(majority) == Side::left) ? left_rows : right_rows).push_back(rows[i]);
    }

    importance_[best->rule.var] += best->gain;
    for (const auto& s : surrogates) importance_[s.rule.var] += s.adjusted_goodness;

    nodes_[id].rule = best->rule;
    nodes_[id].goodness = best->gain;
    nodes_[id].surrogates = std::move(surrogates);
    nodes_[id].majority = majority;
    rows.clear();
    rows.shrink_to_fit();
    const int l = grow(std::move(left_rows), depth + 1);
    const int r = grow(std::move(right_rows), depth + 1);
    nodes_[id].left = l;
    nodes_[id].right = r;
    return id;
  }

  std::optional<Candidate> best_split_on(std::size_t v, const std::vector<std::size_t>& rows,
                                         double slack) const {
    std::vector<std::pair<double, double>> xy;
    xy.reserve(rows.size());
    for (const std::size_t r : rows) {
      const double xv = x_(r, v);
      if (!std::isnan(xv)) xy.emplace_back(xv, y_[r]);
    }
    const std::size_t n = xy.size();
    const std::size_t min_node = params_.min_node;
    if (n < 2 * min_node || n < 2) return std::nullopt;
    double mean = 0.0;
    for (const auto& p : xy) mean += p.second;
    mean /= static_cast<double>(n);
    const double dn = static_cast<double>(n);

    std::optional<Candidate> best;
    const auto consider = [&](double gain, auto&& make_rule) {
      if (!best || gain > best->gain + slack) best = Candidate{make_rule(), gain};
    };

    if (x_.spec(v).kind == ColumnKind::numeric) {
      std::stable_sort(xy.begin(), xy.end(),
                       [](const auto& a, const auto& b) { return a.first < b.first; });
      double cum = 0.0;
      for (std::size_t i = 0; i + 1 < n; ++i) {
        cum += xy[i].second - mean;
        if (!(xy[i].first < xy[i + 1].first)) continue;
        const std::size_t nl = i + 1;
        const std::size_t nr = n - nl;
        if (nl < min_node || nr < min_node) continue;
        const double gain = cum * cum * dn / (static_cast<double>(nl) * static_cast<double>(nr));
        consider(gain, [&] {
          SplitRule rule;
          rule.var = v;
          rule.kind = ColumnKind::numeric;
          const double lo = xy[i].first;
          const double hi = xy[i + 1].first;
          double mid = lo + (hi - lo) / 2.0;
          if (!(mid > lo)) mid = hi;
          rule.threshold = mid;
          rule.below = Side::left;
          return rule;
        });
      }
      return best;
    }

    // categorical: order levels by mean response, then scan like a numeric axis
    std::map<int, std::pair<std::size_t, double>> stats;
    for (const auto& p : xy) {
      auto& s = stats[static_cast<int>(p.first)];
      s.first += 1;
      s.second += p.second - mean;
    }
    std::vector<std::pair<int, std::pair<std::size_t, double>>> levels(stats.begin(), stats.end());
    std::stable_sort(levels.begin(), levels.end(), [](const auto& a, const auto& b) {
      return a.second.second / static_cast<double>(a.second.first) <
             b.second.second / static_cast<double>(b.second.first);
    });
    double cum = 0.0;
    std::size_t nl = 0;
    for (std::size_t i = 0; i + 1 < levels.size(); ++i) {
      cum += levels[i].second.second;
      nl += levels[i].second.first;
      const std::size_t nr = n - nl;
      if (nl < min_node || nr < min_node) continue;
      const double gain = cum * cum * dn / (static_cast<double>(nl) * static_cast<double>(nr));
      consider(gain, [&] {
        SplitRule rule;
        rule.var = v;
        rule.kind = ColumnKind::categorical;
        for (std::size_t j = 0; j < levels.size(); ++j) {
          (j <= i ? rule.left_levels : rule.right_levels).push_back(levels[j].first);
        }
        std::sort(rule.left_levels.begin(), rule.left_levels.end());
        std::sort(rule.right_levels.begin(), rule.right_levels.end());
        return rule;
      });
    }
    return best;
  }

  std::vector<Surrogate> find_surrogates(const Candidate& primary,
                                         const std::vector<std::size_t>& rows,
                                         const std::vector<std::optional<Side>>& side) const {
    std::vector<Surrogate> out;
    if (params_.max_surrogates == 0) return out;
    for (std::size_t v = 0; v < x_.n_cols(); ++v) {
      if (v == primary.rule.var) continue;
      std::vector<std::pair<double, Side>> xs;
      for (std::size_t i = 0; i < rows.size(); ++i) {
        const double xv = x_(rows[i], v);
        if (side[i] && !std::isnan(xv)) xs.emplace_back(xv, *side[i]);
      }
      if (xs.size() < 2) continue;
      const std::size_t n = xs.size();
      const auto n_left = static_cast<std::size_t>(std::count_if(
          xs.begin(), xs.end(), [](const auto& p) { return p.second == Side::left; }));
      const double baseline =
          static_cast<double>(std::max(n_left, n - n_left)) / static_cast<double>(n);

      std::optional<Surrogate> cand;
      if (x_.spec(v).kind == ColumnKind::numeric) {
        std::stable_sort(xs.begin(), xs.end(),
                         [](const auto& a, const auto& b) { return a.first < b.first; });
        std::size_t left_below = 0;
        std::size_t count_below = 0;
        std::size_t best_match = 0;
        for (std::size_t i = 0; i + 1 < n; ++i) {
          ++count_below;
          if (xs[i].second == Side::left) ++left_below;
          if (!(xs[i].first < xs[i + 1].first)) continue;
          const std::size_t right_below = count_below - left_below;
          const std::size_t left_above = n_left - left_below;
          const std::size_t right_above = (n - n_left) - right_below;
          const std::size_t keep = left_below + right_above;  // below -> left
          const std::size_t flip = right_below + left_above;  // below -> right
          const std::size_t match = std::max(keep, flip);
          if (match > best_match) {
            best_match = match;
            SplitRule rule;
            rule.var = v;
            rule.kind = ColumnKind::numeric;
            const double lo = xs[i].first;
            const double hi = xs[i + 1].first;
            double mid = lo + (hi - lo) / 2.0;
            if (!(mid > lo)) mid = hi;
            rule.threshold = mid;
            rule.below = keep >= flip ? Side::left : Side::right;
            cand = Surrogate{std::move(rule), static_cast<double>(match) / static_cast<double>(n),
                             0.0};
          }
        }
      } else {
        std::map<int, std::pair<std::size_t, std::size_t>> counts;
        for (const auto& p : xs) {
          auto& c = counts[static_cast<int>(p.first)];
          (p.second == Side::left ? c.first : c.second)++;
        }
        SplitRule rule;
        rule.var = v;
        rule.kind = ColumnKind::categorical;
        const Side majority = n_left >= n - n_left ? Side::left : Side::right;
        std::size_t match = 0;
        for (const auto& [level, c] : counts) {
          Side s = c.first > c.second ? Side::left : Side::right;
          if (c.first == c.second) s = majority;
          (s == Side::left ? rule.left_levels : rule.right_levels).push_back(level);
          match += std::max(c.first, c.second);
        }
        cand = Surrogate{std::move(rule), static_cast<double>(match) / static_cast<double>(n), 0.0};
      }
      if (!cand || !(cand->agreement > baseline + 1e-12)) continue;
      cand->adjusted_goodness = primary.gain * (cand->agreement - baseline);
      out.push_back(std::move(*cand));
    }
    std::stable_sort(out.begin(), out.end(), [](const Surrogate& a, const Surrogate& b) {
      return a.agreement > b.agreement;
    });
    if (out.size() > params_.max_surrogates) out.resize(params_.max_surrogates);
    return out;
  }

  const AuxTable& x_;
  std::span<const double> y_;
  const TreeParams& params_;
  std::vector<TreeNode> nodes_;
  std::vector<double> importance_;
};

}  // namespace

RegressionTree::RegressionTree(std::vector<TreeNode> nodes, std::size_t n_covariates)
    : nodes_(std::move(nodes)), n_covariates_(n_covariates), importance_(n_covariates, 0.0) {
  if (nodes_.empty()) throw std::invalid_argument("RegressionTree: no nodes");
  for (const auto& node : nodes_) {
    if (node.is_leaf()) continue;
    const auto n = static_cast<int>(nodes_.size());
    if (node.left >= n || node.right < 0 || node.right >= n || node.rule.var >= n_covariates) {
      throw std::invalid_argument("RegressionTree: malformed node");
    }
    importance_[node.rule.var] += node.goodness;
    for (const auto& s : node.surrogates) {
      if (s.rule.var >= n_covariates) throw std::invalid_argument("RegressionTree: bad surrogate");
      importance_[s.rule.var] += s.adjusted_goodness;
    }
  }
}

RegressionTree RegressionTree::constant(double value, std::size_t n_covariates) {
  TreeNode leaf;
  leaf.value = value;
  return RegressionTree({leaf}, n_covariates);
}

template <class Get>
std::size_t RegressionTree::walk(Get&& get) const {
  std::size_t id = 0;
  while (!nodes_[id].is_leaf()) {
    const TreeNode& node = nodes_[id];
    std::optional<Side> s = node.rule.route(get(node.rule.var));
    for (auto it = node.surrogates.begin(); !s && it != node.surrogates.end(); ++it) {
      s = it->rule.route(get(it->rule.var));
    }
    id = static_cast<std::size_t>(s.value_or(node.majority) == Side::left ? node.left
                                                                          : node.right);
  }
  return id;
}

std::size_t RegressionTree::leaf_index(std::span<const double> row) const {
  return walk([&](std::size_t v) { return row[v]; });
}

double RegressionTree::predict(std::span<const double> row) const {
  return nodes_[leaf_index(row)].value;
}

double RegressionTree::predict(const AuxTable& x, std::size_t r) const {
  return nodes_[walk([&](std::size_t v) { return x(r, v); })].value;
}

Eigen::VectorXd RegressionTree::predict(const AuxTable& x) const {
  if (x.n_cols() != n_covariates_) {
    throw std::invalid_argument("RegressionTree::predict: covariate count mismatch");
  }
  Eigen::VectorXd out(static_cast<Eigen::Index>(x.n_rows()));
  for (std::size_t r = 0; r < x.n_rows(); ++r) out(static_cast<Eigen::Index>(r)) = predict(x, r);
  return out;
}

std::size_t RegressionTree::depth() const {
  std::vector<std::size_t> d(nodes_.size(), 0);
  std::size_t deepest = 0;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    deepest = std::max(deepest, d[i]);
    if (!nodes_[i].is_leaf()) {
      d[static_cast<std::size_t>(nodes_[i].left)] = d[i] + 1;
      d[static_cast<std::size_t>(nodes_[i].right)] = d[i] + 1;
    }
  }
  return deepest;
}

std::size_t RegressionTree::n_leaves() const {
  return static_cast<std::size_t>(
      std::count_if(nodes_.begin(), nodes_.end(), [](const TreeNode& n) { return n.is_leaf(); }));
}

RegressionTree fit_tree(const AuxTable& x, std::span<const double> y, const TreeParams& params) {
  params.validate();
  if (y.size() != x.n_rows()) {
    throw std::invalid_argument("fit_tree: response has " + std::to_string(y.size()) +
                                " rows, covariates have " + std::to_string(x.n_rows()));
  }
  if (y.empty()) throw std::invalid_argument("fit_tree: empty response");
  for (const double v : y) {
    if (!std::isfinite(v)) throw std::invalid_argument("fit_tree: non-finite response");
  }
  bool usable = false;
  for (std::size_t r = 0; r < x.n_rows() && !usable; ++r) {
    for (std::size_t c = 0; c < x.n_cols() && !usable; ++c) usable = !x.is_missing(r, c);
  }
  if (!usable) throw FitError("fit_tree: no row has an observed covariate");

  std::vector<std::size_t> rows(y.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  TreeBuilder builder(x, y, params);
  auto nodes = builder.build(std::move(rows));
  return RegressionTree(std::move(nodes), x.n_cols());
}

std::vector<double> tree_importance(const RegressionTree& tree) { return tree.importance(); }

}  // namespace mfai
