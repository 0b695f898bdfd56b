#include "mfai/aux_table.hpp"

#include <cstring>
#include <stdexcept>

namespace mfai {

std::string_view to_string(ColumnKind kind) {
  return kind == ColumnKind::numeric ? "numeric" : "categorical";
}

ColumnKind column_kind_from_string(std::string_view s) {
  if (s == "numeric") return ColumnKind::numeric;
  if (s == "categorical") return ColumnKind::categorical;
  throw std::invalid_argument("unknown column kind '" + std::string(s) + "'");
}

AuxTable::AuxTable(std::size_t n_rows, std::vector<ColumnSpec> specs,
                   std::vector<std::vector<double>> columns)
    : n_rows_(n_rows), specs_(std::move(specs)), columns_(std::move(columns)) {
  if (specs_.size() != columns_.size()) {
    throw std::invalid_argument("AuxTable: schema has " + std::to_string(specs_.size()) +
                                " columns but data has " + std::to_string(columns_.size()));
  }
  for (std::size_t c = 0; c < columns_.size(); ++c) {
    if (columns_[c].size() != n_rows_) {
      throw std::invalid_argument("AuxTable: column '" + specs_[c].name + "' has " +
                                  std::to_string(columns_[c].size()) + " rows, expected " +
                                  std::to_string(n_rows_));
    }
    if (specs_[c].kind != ColumnKind::categorical) continue;
    for (const double v : columns_[c]) {
      if (std::isnan(v)) continue;
      const bool integral = v >= 0.0 && v == std::floor(v);
      const bool in_range = specs_[c].levels.empty() ||
                            v < static_cast<double>(specs_[c].levels.size());
      if (!integral || !in_range) {
        throw std::invalid_argument("AuxTable: invalid level code in column '" + specs_[c].name +
                                    "'");
      }
    }
  }
}

AuxTable AuxTable::numeric(const Eigen::MatrixXd& values) {
  std::vector<ColumnSpec> specs;
  std::vector<std::vector<double>> columns;
  for (Eigen::Index c = 0; c < values.cols(); ++c) {
    specs.push_back({"x" + std::to_string(c + 1), ColumnKind::numeric, {}});
    columns.emplace_back(values.col(c).data(), values.col(c).data() + values.rows());
  }
  return AuxTable(static_cast<std::size_t>(values.rows()), std::move(specs), std::move(columns));
}

std::vector<double> AuxTable::row(std::size_t r) const {
  std::vector<double> out(n_cols());
  for (std::size_t c = 0; c < n_cols(); ++c) out[c] = columns_[c][r];
  return out;
}

AuxTable AuxTable::hstack(const AuxTable& other) const {
  if (other.n_rows_ != n_rows_) throw std::invalid_argument("AuxTable::hstack: row mismatch");
  auto specs = specs_;
  auto columns = columns_;
  specs.insert(specs.end(), other.specs_.begin(), other.specs_.end());
  columns.insert(columns.end(), other.columns_.begin(), other.columns_.end());
  return AuxTable(n_rows_, std::move(specs), std::move(columns));
}

bool operator==(const AuxTable& a, const AuxTable& b) {
  if (a.n_rows_ != b.n_rows_ || a.specs_ != b.specs_) return false;
  for (std::size_t c = 0; c < a.columns_.size(); ++c) {
    if (std::memcmp(a.columns_[c].data(), b.columns_[c].data(),
                    a.columns_[c].size() * sizeof(double)) != 0) {
      return false;
    }
  }
  return true;
}

}  // namespace mfai
