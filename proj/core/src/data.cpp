#include "mfai/data.hpp"

#include <algorithm>
#include <cstring>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "mfai/rng.hpp"

namespace mfai {

MaskedMatrix::MaskedMatrix() : pattern_(build_pattern(0, 0, {})) {}

MaskedMatrix::MaskedMatrix(std::size_t n_rows, std::size_t n_cols, std::vector<Entry> entries) {
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    return Cell{a.row, a.col} < Cell{b.row, b.col};
  });
  std::vector<Cell> cells;
  cells.reserve(entries.size());
  values_.reserve(entries.size());
  for (const auto& e : entries) {
    cells.push_back({e.row, e.col});
    values_.push_back(e.value);
  }
  pattern_ = build_pattern(n_rows, n_cols, std::move(cells));
}

std::shared_ptr<const MaskedMatrix::Pattern> MaskedMatrix::build_pattern(std::size_t n_rows,
                                                                         std::size_t n_cols,
                                                                         std::vector<Cell> cells) {
  if (n_rows > UINT32_MAX || n_cols > UINT32_MAX) {
    throw std::invalid_argument("MaskedMatrix: dimensions exceed 32-bit indices");
  }
  auto p = std::make_shared<Pattern>();
  p->n_rows = n_rows;
  p->n_cols = n_cols;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const Cell& c = cells[i];
    if (c.row >= n_rows || c.col >= n_cols) {
      throw std::invalid_argument("MaskedMatrix: cell (" + std::to_string(c.row) + ", " +
                                  std::to_string(c.col) + ") outside " + std::to_string(n_rows) +
                                  "x" + std::to_string(n_cols));
    }
    if (i > 0 && !(cells[i - 1] < c)) {
      throw std::invalid_argument("MaskedMatrix: duplicate cell (" + std::to_string(c.row) +
                                  ", " + std::to_string(c.col) + ")");
    }
  }
  p->row_ptr.assign(n_rows + 1, 0);
  p->col_ptr.assign(n_cols + 1, 0);
  for (const Cell& c : cells) {
    ++p->row_ptr[c.row + 1];
    ++p->col_ptr[c.col + 1];
  }
  std::partial_sum(p->row_ptr.begin(), p->row_ptr.end(), p->row_ptr.begin());
  std::partial_sum(p->col_ptr.begin(), p->col_ptr.end(), p->col_ptr.begin());
  p->col_pos.resize(cells.size());
  std::vector<std::size_t> fill(p->col_ptr.begin(), p->col_ptr.end() - 1);
  for (std::size_t i = 0; i < cells.size(); ++i) {
    p->col_pos[fill[cells[i].col]++] = i;
  }
  p->cells = std::move(cells);
  return p;
}

MaskedMatrix MaskedMatrix::from_dense(const Eigen::MatrixXd& dense) {
  std::vector<Entry> entries;
  entries.reserve(static_cast<std::size_t>(dense.size()));
  for (Eigen::Index r = 0; r < dense.rows(); ++r) {
    for (Eigen::Index c = 0; c < dense.cols(); ++c) {
      const double v = dense(r, c);
      if (!std::isnan(v)) {
        entries.push_back({static_cast<std::uint32_t>(r), static_cast<std::uint32_t>(c), v});
      }
    }
  }
  return MaskedMatrix(static_cast<std::size_t>(dense.rows()),
                      static_cast<std::size_t>(dense.cols()), std::move(entries));
}

double MaskedMatrix::missing_ratio() const {
  const double total = static_cast<double>(n_rows()) * static_cast<double>(n_cols());
  if (total == 0.0) return 0.0;
  return 1.0 - static_cast<double>(n_observed()) / total;
}

std::optional<std::size_t> MaskedMatrix::find(std::size_t r, std::size_t c) const {
  if (r >= n_rows() || c >= n_cols()) return std::nullopt;
  const auto& cells = pattern_->cells;
  const auto first = cells.begin() + static_cast<std::ptrdiff_t>(row_begin(r));
  const auto last = cells.begin() + static_cast<std::ptrdiff_t>(row_end(r));
  const Cell key{static_cast<std::uint32_t>(r), static_cast<std::uint32_t>(c)};
  const auto it = std::lower_bound(first, last, key);
  if (it == last || *it != key) return std::nullopt;
  return static_cast<std::size_t>(it - cells.begin());
}

std::optional<double> MaskedMatrix::at(std::size_t r, std::size_t c) const {
  const auto pos = find(r, c);
  if (!pos) return std::nullopt;
  return values_[*pos];
}

Eigen::MatrixXd MaskedMatrix::to_dense(double fill) const {
  Eigen::MatrixXd out = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(n_rows()),
                                                  static_cast<Eigen::Index>(n_cols()), fill);
  const auto cs = cells();
  for (std::size_t i = 0; i < cs.size(); ++i) out(cs[i].row, cs[i].col) = values_[i];
  return out;
}

MaskedMatrix MaskedMatrix::with_values(std::vector<double> values) const {
  if (values.size() != n_observed()) {
    throw std::invalid_argument("MaskedMatrix::with_values: size mismatch");
  }
  return MaskedMatrix(pattern_, std::move(values));
}

MaskedMatrix MaskedMatrix::restrict_to(const IndexSet& keep) const {
  std::vector<Entry> entries;
  entries.reserve(keep.size());
  for (const Cell& c : keep) {
    const auto pos = find(c.row, c.col);
    if (!pos) {
      throw std::invalid_argument("MaskedMatrix::restrict_to: cell (" + std::to_string(c.row) +
                                  ", " + std::to_string(c.col) + ") is not observed");
    }
    entries.push_back({c.row, c.col, values_[*pos]});
  }
  return MaskedMatrix(n_rows(), n_cols(), std::move(entries));
}

MaskedMatrix MaskedMatrix::without(const IndexSet& drop) const {
  std::vector<char> removed(n_observed(), 0);
  for (const Cell& c : drop) {
    if (const auto pos = find(c.row, c.col)) removed[*pos] = 1;
  }
  std::vector<Entry> entries;
  entries.reserve(n_observed());
  const auto cs = cells();
  for (std::size_t i = 0; i < cs.size(); ++i) {
    if (!removed[i]) entries.push_back({cs[i].row, cs[i].col, values_[i]});
  }
  return MaskedMatrix(n_rows(), n_cols(), std::move(entries));
}

bool MaskedMatrix::same_pattern(const MaskedMatrix& other) const {
  if (pattern_ == other.pattern_) return true;
  return n_rows() == other.n_rows() && n_cols() == other.n_cols() &&
         pattern_->cells == other.pattern_->cells;
}

bool operator==(const MaskedMatrix& a, const MaskedMatrix& b) {
  if (!a.same_pattern(b)) return false;
  // bitwise comparison so that signed zeros and NaN payloads are respected
  return std::equal(a.values_.begin(), a.values_.end(), b.values_.begin(), b.values_.end(),
                    [](double x, double y) {
                      return std::memcmp(&x, &y, sizeof(double)) == 0;
                    });
}

MaskedMatrix mask_entries(const MaskedMatrix& y, double ratio, std::uint64_t seed) {
  if (!(ratio >= 0.0 && ratio < 1.0)) {
    throw std::invalid_argument("mask_entries: ratio must lie in [0, 1)");
  }
  const std::size_t n = y.n_observed();
  const auto n_drop = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(n)));
  if (n_drop == 0) return y;
  if (n_drop >= n) {
    throw std::invalid_argument("mask_entries: every observed entry would be masked");
  }
  Rng rng(seed);
  const auto picked = sample_without_replacement(n, n_drop, rng);
  const auto cs = y.cells();
  IndexSet drop;
  drop.reserve(n_drop);
  for (const std::size_t i : picked) drop.push_back(cs[i]);
  return y.without(drop);
}

std::pair<IndexSet, IndexSet> split_observed(const IndexSet& cells, double train_ratio,
                                             std::uint64_t seed) {
  if (!(train_ratio > 0.0 && train_ratio < 1.0)) {
    throw std::invalid_argument("split_observed: train_ratio must lie in (0, 1)");
  }
  if (cells.size() < 2) {
    throw std::invalid_argument("split_observed: need at least two cells");
  }
  const auto n_train = static_cast<std::size_t>(
      std::llround(train_ratio * static_cast<double>(cells.size())));
  Rng rng(seed);
  const auto picked = sample_without_replacement(cells.size(), n_train, rng);
  std::vector<char> in_train(cells.size(), 0);
  for (const std::size_t i : picked) in_train[i] = 1;
  IndexSet train;
  IndexSet test;
  train.reserve(n_train);
  test.reserve(cells.size() - n_train);
  for (std::size_t i = 0; i < cells.size(); ++i) {
    (in_train[i] ? train : test).push_back(cells[i]);
  }
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {std::move(train), std::move(test)};
}

namespace {

template <class Pred, class Truth>
double rmse_impl(const IndexSet& eval_set, Pred&& pred, Truth&& truth) {
  if (eval_set.empty()) throw std::invalid_argument("rmse: empty evaluation set");
  double sum = 0.0;
  for (const Cell& c : eval_set) {
    const double d = pred(c) - truth(c);
    sum += d * d;
  }
  return std::sqrt(sum / static_cast<double>(eval_set.size()));
}

void check_cell(const Cell& c, std::size_t rows, std::size_t cols) {
  if (c.row >= rows || c.col >= cols) {
    throw std::invalid_argument("rmse: cell (" + std::to_string(c.row) + ", " +
                                std::to_string(c.col) + ") out of range");
  }
}

double observed_value(const MaskedMatrix& m, const Cell& c, const char* what) {
  const auto v = m.at(c.row, c.col);
  if (!v) {
    throw std::invalid_argument(std::string("rmse: cell (") + std::to_string(c.row) + ", " +
                                std::to_string(c.col) + ") not observed in " + what);
  }
  return *v;
}

}  // namespace

double rmse(const Eigen::MatrixXd& pred, const MaskedMatrix& truth, const IndexSet& eval_set) {
  return rmse_impl(
      eval_set,
      [&](const Cell& c) {
        check_cell(c, static_cast<std::size_t>(pred.rows()), static_cast<std::size_t>(pred.cols()));
        return pred(c.row, c.col);
      },
      [&](const Cell& c) { return observed_value(truth, c, "truth"); });
}

double rmse(const MaskedMatrix& pred, const MaskedMatrix& truth, const IndexSet& eval_set) {
  return rmse_impl(
      eval_set, [&](const Cell& c) { return observed_value(pred, c, "prediction"); },
      [&](const Cell& c) { return observed_value(truth, c, "truth"); });
}

double rmse(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& truth, const IndexSet& eval_set) {
  return rmse_impl(
      eval_set,
      [&](const Cell& c) {
        check_cell(c, static_cast<std::size_t>(pred.rows()), static_cast<std::size_t>(pred.cols()));
        return pred(c.row, c.col);
      },
      [&](const Cell& c) {
        check_cell(c, static_cast<std::size_t>(truth.rows()),
                   static_cast<std::size_t>(truth.cols()));
        return truth(c.row, c.col);
      });
}

double population_variance(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  const double n = static_cast<double>(xs.size());
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  double ss = 0.0;
  for (const double x : xs) ss += (x - mean) * (x - mean);
  return ss / n;
}

}  // namespace mfai
