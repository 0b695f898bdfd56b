#include "mfai/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

namespace mfai {

namespace {

using json = nlohmann::json;

constexpr std::string_view kMissing = "NA";

std::string_view trim(std::string_view s) {
  const auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    const std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) {
      lines.push_back(text.substr(start));
      break;
    }
    lines.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  return lines;
}

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t end = line.find(',', start);
    if (end == std::string_view::npos) {
      cells.push_back(trim(line.substr(start)));
      return cells;
    }
    cells.push_back(trim(line.substr(start, end - start)));
    start = end + 1;
  }
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    const std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

bool parse_double(std::string_view s, double& out) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return false;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

template <class Int>
bool parse_int(std::string_view s, Int& out) {
  if (s.empty()) return false;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

bool is_blank_or_comment(std::string_view line) {
  const auto t = trim(line);
  return t.empty() || t.front() == '%' || t.front() == '#';
}

MaskedMatrix parse_dense_csv(std::string_view text, const std::string& source) {
  const auto lines = split_lines(text);
  std::vector<Entry> entries;
  std::size_t n_cols = 0;
  std::size_t n_rows = 0;
  bool first = true;
  for (std::size_t li = 0; li < lines.size(); ++li) {
    if (trim(lines[li]).empty()) continue;
    const auto cells = split_csv(lines[li]);
    if (first) {
      first = false;
      n_cols = cells.size();
      const bool header = std::any_of(cells.begin(), cells.end(), [](std::string_view c) {
        double v = 0.0;
        return c != kMissing && !parse_double(c, v);
      });
      if (header) continue;
    }
    if (cells.size() != n_cols) {
      throw ParseError(source, li + 1,
                       "expected " + std::to_string(n_cols) + " columns, found " +
                           std::to_string(cells.size()));
    }
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (cells[c] == kMissing) continue;
      double v = 0.0;
      if (!parse_double(cells[c], v) || !std::isfinite(v)) {
        throw ParseError(source, li + 1, "invalid number '" + std::string(cells[c]) + "'");
      }
      entries.push_back({static_cast<std::uint32_t>(n_rows), static_cast<std::uint32_t>(c), v});
    }
    ++n_rows;
  }
  return MaskedMatrix(n_rows, n_cols, std::move(entries));
}

MaskedMatrix parse_coo(std::string_view text, const std::string& source) {
  const auto lines = split_lines(text);
  std::size_t li = 0;
  while (li < lines.size() && is_blank_or_comment(lines[li])) ++li;
  if (li == lines.size()) throw ParseError(source, 1, "missing 'N M nnz' header");
  const auto head = split_ws(lines[li]);
  std::size_t n_rows = 0;
  std::size_t n_cols = 0;
  std::size_t nnz = 0;
  if (head.size() != 3 || !parse_int(head[0], n_rows) || !parse_int(head[1], n_cols) ||
      !parse_int(head[2], nnz)) {
    throw ParseError(source, li + 1, "malformed header, expected 'N M nnz'");
  }
  std::vector<Entry> entries;
  entries.reserve(nnz);
  std::set<Cell> seen;
  for (++li; li < lines.size(); ++li) {
    if (is_blank_or_comment(lines[li])) continue;
    const auto fields = split_ws(lines[li]);
    std::uint32_t r = 0;
    std::uint32_t c = 0;
    double v = 0.0;
    if (fields.size() != 3 || !parse_int(fields[0], r) || !parse_int(fields[1], c)) {
      throw ParseError(source, li + 1, "malformed entry, expected 'row col value'");
    }
    if (!parse_double(fields[2], v) || !std::isfinite(v)) {
      throw ParseError(source, li + 1, "invalid value '" + std::string(fields[2]) + "'");
    }
    if (r >= n_rows || c >= n_cols) {
      throw ParseError(source, li + 1, "index out of range");
    }
    if (!seen.insert(Cell{r, c}).second) {
      throw ParseError(source, li + 1, "duplicate entry");
    }
    if (entries.size() == nnz) {
      throw ParseError(source, li + 1, "more entries than the declared nnz");
    }
    entries.push_back({r, c, v});
  }
  if (entries.size() != nnz) {
    throw ParseError(source, lines.size(),
                     "declared " + std::to_string(nnz) + " entries, found " +
                         std::to_string(entries.size()));
  }
  return MaskedMatrix(n_rows, n_cols, std::move(entries));
}

}  // namespace

ParseError::ParseError(const std::string& source, std::size_t line, const std::string& message)
    : std::runtime_error(source + ":" + std::to_string(line) + ": " + message), line_(line) {}

MatrixFormat matrix_format_from_string(std::string_view s) {
  if (s == "dense-csv" || s == "csv") return MatrixFormat::dense_csv;
  if (s == "coo") return MatrixFormat::coo;
  throw std::invalid_argument("unknown matrix format '" + std::string(s) + "'");
}

std::string_view to_string(MatrixFormat format) {
  return format == MatrixFormat::coo ? "coo" : "dense-csv";
}

MatrixFormat matrix_format_from_path(const std::filesystem::path& path) {
  return path.extension() == ".coo" ? MatrixFormat::coo : MatrixFormat::dense_csv;
}

std::string format_number(double x) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x, std::chars_format::general, 17);
  return std::string(buf, ptr);
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw std::runtime_error("write to '" + path.string() + "' failed");
}

MaskedMatrix parse_matrix(std::string_view text, MatrixFormat format, const std::string& source) {
  return format == MatrixFormat::coo ? parse_coo(text, source) : parse_dense_csv(text, source);
}

MaskedMatrix load_matrix(const std::filesystem::path& path, MatrixFormat format) {
  return parse_matrix(read_text_file(path), format, path.string());
}

MaskedMatrix load_matrix(const std::filesystem::path& path) {
  return load_matrix(path, matrix_format_from_path(path));
}

std::string format_matrix(const MaskedMatrix& y, MatrixFormat format) {
  std::string out;
  if (format == MatrixFormat::coo) {
    out += std::to_string(y.n_rows()) + " " + std::to_string(y.n_cols()) + " " +
           std::to_string(y.n_observed()) + "\n";
    const auto cells = y.cells();
    const auto values = y.values();
    for (std::size_t i = 0; i < cells.size(); ++i) {
      out += std::to_string(cells[i].row) + " " + std::to_string(cells[i].col) + " " +
             format_number(values[i]) + "\n";
    }
    return out;
  }
  for (std::size_t r = 0; r < y.n_rows(); ++r) {
    std::size_t pos = y.row_begin(r);
    const std::size_t end = y.row_end(r);
    for (std::size_t c = 0; c < y.n_cols(); ++c) {
      if (c > 0) out += ',';
      if (pos < end && y.cells()[pos].col == c) {
        out += format_number(y.values()[pos]);
        ++pos;
      } else {
        out += kMissing;
      }
    }
    out += '\n';
  }
  return out;
}

void save_matrix(const std::filesystem::path& path, const MaskedMatrix& y, MatrixFormat format) {
  write_text_file(path, format_matrix(y, format));
}

void save_dense(const std::filesystem::path& path, const Eigen::MatrixXd& y,
                MatrixFormat format) {
  save_matrix(path, MaskedMatrix::from_dense(y), format);
}

IndexSet load_index_set(const std::filesystem::path& path) {
  return load_matrix(path, MatrixFormat::coo).indices();
}

std::vector<ColumnSpec> parse_schema(std::string_view json_text, const std::string& source) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError(source, 1, e.what());
  }
  const json& cols = doc.is_object() && doc.contains("columns") ? doc.at("columns") : doc;
  if (!cols.is_array()) throw ParseError(source, 1, "schema must be a JSON array of columns");
  std::vector<ColumnSpec> schema;
  try {
    for (const auto& item : cols) {
      ColumnSpec spec;
      spec.name = item.at("name").get<std::string>();
      spec.kind = column_kind_from_string(item.at("kind").get<std::string>());
      if (item.contains("levels")) spec.levels = item.at("levels").get<std::vector<std::string>>();
      schema.push_back(std::move(spec));
    }
  } catch (const std::exception& e) {
    throw ParseError(source, 1, std::string("invalid schema entry: ") + e.what());
  }
  return schema;
}

std::vector<ColumnSpec> load_schema(const std::filesystem::path& path) {
  return parse_schema(read_text_file(path), path.string());
}

std::string format_schema(const std::vector<ColumnSpec>& schema) {
  json cols = json::array();
  for (const auto& spec : schema) {
    json item = {{"name", spec.name}, {"kind", std::string(to_string(spec.kind))}};
    if (spec.kind == ColumnKind::categorical) item["levels"] = spec.levels;
    cols.push_back(std::move(item));
  }
  return cols.dump(2) + "\n";
}

AuxTable parse_aux(std::string_view csv_text, std::vector<ColumnSpec> schema,
                   const std::string& source) {
  const auto lines = split_lines(csv_text);
  std::size_t li = 0;
  while (li < lines.size() && trim(lines[li]).empty()) ++li;
  if (li == lines.size()) throw ParseError(source, 1, "missing header row");
  const auto header = split_csv(lines[li]);

  // Reorder the schema to follow the CSV header.
  std::map<std::string, ColumnSpec, std::less<>> by_name;
  for (auto& spec : schema) {
    const std::string name = spec.name;
    if (!by_name.emplace(name, std::move(spec)).second) {
      throw ParseError(source, li + 1, "schema lists column '" + name + "' twice");
    }
  }
  std::vector<ColumnSpec> specs;
  for (const auto name : header) {
    const auto it = by_name.find(name);
    if (it == by_name.end()) {
      throw ParseError(source, li + 1, "column '" + std::string(name) + "' missing from schema");
    }
    specs.push_back(it->second);
  }
  if (specs.size() != by_name.size()) {
    throw ParseError(source, li + 1, "schema declares columns absent from the CSV header");
  }

  const std::size_t n_cols = specs.size();
  std::vector<std::vector<std::string_view>> raw(n_cols);
  std::vector<std::size_t> line_of_row;
  for (++li; li < lines.size(); ++li) {
    if (trim(lines[li]).empty()) continue;
    const auto cells = split_csv(lines[li]);
    if (cells.size() != n_cols) {
      throw ParseError(source, li + 1,
                       "expected " + std::to_string(n_cols) + " columns, found " +
                           std::to_string(cells.size()));
    }
    for (std::size_t c = 0; c < n_cols; ++c) raw[c].push_back(cells[c]);
    line_of_row.push_back(li + 1);
  }

  const std::size_t n_rows = line_of_row.size();
  std::vector<std::vector<double>> columns(n_cols, std::vector<double>(n_rows));
  for (std::size_t c = 0; c < n_cols; ++c) {
    auto& spec = specs[c];
    if (spec.kind == ColumnKind::categorical && spec.levels.empty()) {
      std::set<std::string, std::less<>> distinct;
      for (const auto cell : raw[c]) {
        if (cell != kMissing) distinct.emplace(cell);
      }
      spec.levels.assign(distinct.begin(), distinct.end());
    }
    std::map<std::string, double, std::less<>> codes;
    for (std::size_t l = 0; l < spec.levels.size(); ++l) {
      codes.emplace(spec.levels[l], static_cast<double>(l));
    }
    for (std::size_t r = 0; r < n_rows; ++r) {
      const auto cell = raw[c][r];
      if (cell == kMissing) {
        columns[c][r] = std::nan("");
      } else if (spec.kind == ColumnKind::numeric) {
        double v = 0.0;
        if (!parse_double(cell, v) || !std::isfinite(v)) {
          throw ParseError(source, line_of_row[r], "invalid number '" + std::string(cell) + "'");
        }
        columns[c][r] = v;
      } else {
        const auto it = codes.find(cell);
        if (it == codes.end()) {
          throw ParseError(source, line_of_row[r],
                           "undeclared level '" + std::string(cell) + "' in column '" +
                               spec.name + "'");
        }
        columns[c][r] = it->second;
      }
    }
  }
  return AuxTable(n_rows, std::move(specs), std::move(columns));
}

AuxTable load_aux(const std::filesystem::path& csv_path, const std::filesystem::path& schema_path) {
  return parse_aux(read_text_file(csv_path), load_schema(schema_path), csv_path.string());
}

std::string format_aux_csv(const AuxTable& x) {
  std::string out;
  for (std::size_t c = 0; c < x.n_cols(); ++c) {
    if (c > 0) out += ',';
    out += x.spec(c).name;
  }
  out += '\n';
  for (std::size_t r = 0; r < x.n_rows(); ++r) {
    for (std::size_t c = 0; c < x.n_cols(); ++c) {
      if (c > 0) out += ',';
      const double v = x(r, c);
      if (std::isnan(v)) {
        out += kMissing;
      } else if (x.spec(c).kind == ColumnKind::categorical && !x.spec(c).levels.empty()) {
        out += x.spec(c).levels[static_cast<std::size_t>(v)];
      } else {
        out += format_number(v);
      }
    }
    out += '\n';
  }
  return out;
}

void save_aux(const std::filesystem::path& csv_path, const std::filesystem::path& schema_path,
              const AuxTable& x) {
  write_text_file(csv_path, format_aux_csv(x));
  write_text_file(schema_path, format_schema(x.schema()));
}

}  // namespace mfai
