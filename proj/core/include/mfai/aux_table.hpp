#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace mfai {

enum class ColumnKind { numeric, categorical };

std::string_view to_string(ColumnKind kind);
ColumnKind column_kind_from_string(std::string_view s);

struct ColumnSpec {
  std::string name;
  ColumnKind kind = ColumnKind::numeric;
  /// Level names of a categorical column; the stored code is the index here.
  std::vector<std::string> levels;

  friend bool operator==(const ColumnSpec&, const ColumnSpec&) = default;
};

/// Auxiliary covariates: N rows by C columns, column-major.
///
/// Missing cells are NaN. Categorical cells hold the integer level code as a
/// double, so every column shares one storage type.
class AuxTable {
 public:
  AuxTable() = default;

  /// Throws std::invalid_argument on ragged columns or invalid level codes.
  AuxTable(std::size_t n_rows, std::vector<ColumnSpec> specs,
           std::vector<std::vector<double>> columns);

  /// All-numeric table; columns named x1, x2, ...
  static AuxTable numeric(const Eigen::MatrixXd& values);

  std::size_t n_rows() const { return n_rows_; }
  std::size_t n_cols() const { return specs_.size(); }

  const ColumnSpec& spec(std::size_t c) const { return specs_[c]; }
  const std::vector<ColumnSpec>& schema() const { return specs_; }
  std::span<const double> column(std::size_t c) const { return columns_[c]; }

  double operator()(std::size_t r, std::size_t c) const { return columns_[c][r]; }
  bool is_missing(std::size_t r, std::size_t c) const { return std::isnan(columns_[c][r]); }

  std::vector<double> row(std::size_t r) const;

  /// Column-wise concatenation [this, other].
  AuxTable hstack(const AuxTable& other) const;

  friend bool operator==(const AuxTable& a, const AuxTable& b);

 private:
  std::size_t n_rows_ = 0;
  std::vector<ColumnSpec> specs_;
  std::vector<std::vector<double>> columns_;
};

}  // namespace mfai
