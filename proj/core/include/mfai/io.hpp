#pragma once

#include <cstddef>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "mfai/aux_table.hpp"
#include "mfai/data.hpp"

namespace mfai {

/// Malformed input file. what() carries the path and 1-based line number.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& message);

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

enum class MatrixFormat { dense_csv, coo };

MatrixFormat matrix_format_from_string(std::string_view s);
std::string_view to_string(MatrixFormat format);
/// ".coo" selects coo, anything else dense CSV.
MatrixFormat matrix_format_from_path(const std::filesystem::path& path);

/// Shortest text that reads back to the same double: %.17g.
std::string format_number(double x);

/// Dense CSV: optional header row, comma separated, "NA" marks a missing cell.
/// COO: a header line "N M nnz", then nnz lines "row col value" (0-based).
MaskedMatrix load_matrix(const std::filesystem::path& path, MatrixFormat format);
MaskedMatrix load_matrix(const std::filesystem::path& path);
MaskedMatrix parse_matrix(std::string_view text, MatrixFormat format,
                          const std::string& source = "<string>");

void save_matrix(const std::filesystem::path& path, const MaskedMatrix& y, MatrixFormat format);
std::string format_matrix(const MaskedMatrix& y, MatrixFormat format);

/// Dense matrix; NaN cells are written as NA.
void save_dense(const std::filesystem::path& path, const Eigen::MatrixXd& y,
                MatrixFormat format = MatrixFormat::dense_csv);

/// Cell set stored as a coo file; values are ignored on read.
IndexSet load_index_set(const std::filesystem::path& path);

/// Schema sidecar: a JSON array of {"name", "kind": "numeric"|"categorical",
/// optional "levels": [...]}.
std::vector<ColumnSpec> parse_schema(std::string_view json_text, const std::string& source = "<string>");
std::vector<ColumnSpec> load_schema(const std::filesystem::path& path);
std::string format_schema(const std::vector<ColumnSpec>& schema);

/// Auxiliary CSV (header row required) interpreted through its schema.
/// Categorical columns without declared levels get their distinct values
/// sorted lexicographically as levels.
AuxTable parse_aux(std::string_view csv_text, std::vector<ColumnSpec> schema,
                   const std::string& source = "<string>");
AuxTable load_aux(const std::filesystem::path& csv_path, const std::filesystem::path& schema_path);
void save_aux(const std::filesystem::path& csv_path, const std::filesystem::path& schema_path,
              const AuxTable& x);
std::string format_aux_csv(const AuxTable& x);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace mfai
