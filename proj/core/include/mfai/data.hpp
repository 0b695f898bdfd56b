#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace mfai {

/// A (row, col) coordinate.
struct Cell {
  std::uint32_t row = 0;
  std::uint32_t col = 0;

  friend auto operator<=>(const Cell&, const Cell&) = default;
};

using IndexSet = std::vector<Cell>;

struct Entry {
  std::uint32_t row = 0;
  std::uint32_t col = 0;
  double value = 0.0;
};

/// N x M matrix with an explicit set of observed cells.
///
/// Observed cells are kept as a row-major sorted coordinate list with
/// per-row offsets and a per-column adjacency list, so both row sums and
/// column sums over the observed set run in time proportional to the
/// number of cells touched. The sparsity pattern is immutable and shared
/// between copies; matrices that differ only in values (residuals) reuse it.
class MaskedMatrix {
 public:
  MaskedMatrix();

  /// Throws std::invalid_argument on out-of-range or duplicate cells.
  MaskedMatrix(std::size_t n_rows, std::size_t n_cols, std::vector<Entry> entries);

  /// Every finite entry of `dense` is observed; NaN marks a missing cell.
  static MaskedMatrix from_dense(const Eigen::MatrixXd& dense);

  std::size_t n_rows() const { return pattern_->n_rows; }
  std::size_t n_cols() const { return pattern_->n_cols; }
  std::size_t n_observed() const { return values_.size(); }
  bool fully_observed() const { return n_observed() == n_rows() * n_cols(); }
  double missing_ratio() const;

  /// Observed cells in row-major order; values()[i] belongs to cells()[i].
  std::span<const Cell> cells() const { return pattern_->cells; }
  std::span<const double> values() const { return values_; }

  /// Positions (into cells()/values()) of the observed cells of row r:
  /// a contiguous range [row_begin(r), row_end(r)).
  std::size_t row_begin(std::size_t r) const { return pattern_->row_ptr[r]; }
  std::size_t row_end(std::size_t r) const { return pattern_->row_ptr[r + 1]; }

  /// Positions of the observed cells of column c, in increasing row order.
  std::span<const std::size_t> col_positions(std::size_t c) const {
    const auto& p = *pattern_;
    return {p.col_pos.data() + p.col_ptr[c], p.col_ptr[c + 1] - p.col_ptr[c]};
  }

  std::optional<double> at(std::size_t r, std::size_t c) const;
  bool is_observed(std::size_t r, std::size_t c) const { return find(r, c).has_value(); }

  IndexSet indices() const { return {cells().begin(), cells().end()}; }

  /// Dense copy with unobserved cells set to `fill`.
  Eigen::MatrixXd to_dense(double fill = 0.0) const;

  /// Same pattern, new values (one per observed cell, in cells() order).
  MaskedMatrix with_values(std::vector<double> values) const;

  /// Keeps only the listed cells; each must be observed here.
  MaskedMatrix restrict_to(const IndexSet& keep) const;

  /// Removes the listed cells from the observed set.
  MaskedMatrix without(const IndexSet& drop) const;

  bool same_pattern(const MaskedMatrix& other) const;

  friend bool operator==(const MaskedMatrix& a, const MaskedMatrix& b);

 private:
  struct Pattern {
    std::size_t n_rows = 0;
    std::size_t n_cols = 0;
    std::vector<Cell> cells;
    std::vector<std::size_t> row_ptr;
    std::vector<std::size_t> col_ptr;
    std::vector<std::size_t> col_pos;
  };

  MaskedMatrix(std::shared_ptr<const Pattern> pattern, std::vector<double> values)
      : pattern_(std::move(pattern)), values_(std::move(values)) {}

  static std::shared_ptr<const Pattern> build_pattern(std::size_t n_rows, std::size_t n_cols,
                                                      std::vector<Cell> cells);
  std::optional<std::size_t> find(std::size_t r, std::size_t c) const;

  std::shared_ptr<const Pattern> pattern_;
  std::vector<double> values_;
};

/// Removes round(ratio * |observed|) uniformly chosen cells (without
/// replacement) from the observed set. Deterministic in (Y, ratio, seed).
MaskedMatrix mask_entries(const MaskedMatrix& y, double ratio, std::uint64_t seed);

/// Random partition of `cells` into (train, test) with
/// |train| = round(train_ratio * |cells|). Both parts come back sorted.
std::pair<IndexSet, IndexSet> split_observed(const IndexSet& cells, double train_ratio,
                                             std::uint64_t seed);

/// Root-mean-square error over eval_set.
double rmse(const Eigen::MatrixXd& pred, const MaskedMatrix& truth, const IndexSet& eval_set);
double rmse(const MaskedMatrix& pred, const MaskedMatrix& truth, const IndexSet& eval_set);
double rmse(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& truth, const IndexSet& eval_set);

/// Population variance (divides by the count).
double population_variance(std::span<const double> xs);

}  // namespace mfai
