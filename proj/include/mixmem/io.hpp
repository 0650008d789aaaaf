#pragma once

// Dataset files and flat plot-data files.
//
// Dataset: comma-delimited UTF-8 text, LF or CRLF line endings. The first row
// is a header (id column label, then attribute labels); each further row is an
// observation id followed by M non-negative integer counts. Missing cells are
// rejected. Quoted fields are not supported.
//
// Plot-data files: comma-delimited with a block of "# key: value" metadata
// lines before the column header.

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mixmem/data.hpp"

namespace mixmem {

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace io {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

/// Lines with any trailing CR removed; a final empty line is dropped.
inline std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    auto pos = text.find('\n', start);
    if (pos == std::string_view::npos) pos = text.size();
    auto line = text.substr(start, pos - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = pos + 1;
  }
  return lines;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetError("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << contents;
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

/// Shortest decimal text that reads back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace io

inline CountMatrix parse_dataset(std::string_view text, const std::string& source = "<input>") {
  const auto lines = io::split_lines(text);
  if (lines.empty()) throw DatasetError(source + ": empty file, header required");
  const auto header = io::split_fields(lines[0]);
  if (header.size() < 2) throw DatasetError(source + ": header needs an id column and at least one attribute");
  const std::size_t n_attr = header.size() - 1;
  std::vector<std::string> col_ids;
  for (std::size_t c = 1; c < header.size(); ++c) col_ids.emplace_back(io::trim(header[c]));

  std::vector<std::string> row_ids;
  std::vector<CountMatrix::Value> cells;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    const std::string where = source + ": line " + std::to_string(li + 1);
    if (lines[li].empty()) {
      if (li + 1 == lines.size()) break;
      throw DatasetError(where + ": empty row");
    }
    const auto fields = io::split_fields(lines[li]);
    if (fields.size() != header.size()) {
      throw DatasetError(where + ": expected " + std::to_string(header.size()) + " fields, found " +
                         std::to_string(fields.size()));
    }
    row_ids.emplace_back(io::trim(fields[0]));
    for (std::size_t c = 1; c < fields.size(); ++c) {
      const auto cell = io::trim(fields[c]);
      const std::string at = where + ", column " + std::to_string(c + 1) + " ('" + col_ids[c - 1] + "')";
      if (cell.empty() || cell == "NA" || cell == "NaN" || cell == "nan") {
        throw DatasetError(at + ": missing value");
      }
      CountMatrix::Value v = 0;
      const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (res.ec != std::errc() || res.ptr != cell.data() + cell.size()) {
        throw DatasetError(at + ": '" + std::string(cell) + "' is not an integer");
      }
      if (v < 0) throw DatasetError(at + ": negative count " + std::string(cell));
      cells.push_back(v);
    }
  }
  if (row_ids.empty()) throw DatasetError(source + ": no observations");
  Grid<CountMatrix::Value> values(static_cast<Eigen::Index>(row_ids.size()), static_cast<Eigen::Index>(n_attr));
  for (std::size_t i = 0; i < cells.size(); ++i) values.data()[i] = cells[i];
  return CountMatrix(std::move(values), std::move(row_ids), std::move(col_ids), std::string(io::trim(header[0])));
}

inline CountMatrix load_dataset(const std::string& path) { return parse_dataset(io::read_file(path), path); }

inline std::string format_dataset(const CountMatrix& x) {
  std::string out = x.id_header();
  for (const auto& c : x.col_ids()) out += "," + c;
  out += '\n';
  for (std::size_t n = 0; n < x.rows(); ++n) {
    out += x.row_ids()[n];
    for (std::size_t m = 0; m < x.cols(); ++m) out += "," + std::to_string(x(n, m));
    out += '\n';
  }
  return out;
}

inline void save_dataset(const CountMatrix& x, const std::string& path) { io::write_file(path, format_dataset(x)); }

/// Reads a numeric CSV (header row, optional leading label column when
/// `label_column` is set) into a real grid.
inline RealGrid load_real_grid(const std::string& path, bool label_column) {
  const auto text = io::read_file(path);
  std::vector<std::string_view> lines;
  for (auto line : io::split_lines(text)) {
    if (!line.empty() && line.front() != '#') lines.push_back(line);
  }
  if (lines.size() < 2) throw DatasetError(path + ": no data rows");
  const std::size_t skip = label_column ? 1 : 0;
  const std::size_t width = io::split_fields(lines[0]).size() - skip;
  RealGrid out(static_cast<Eigen::Index>(lines.size() - 1), static_cast<Eigen::Index>(width));
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto fields = io::split_fields(lines[r]);
    if (fields.size() != width + skip) throw DatasetError(path + ": ragged row " + std::to_string(r + 1));
    for (std::size_t c = 0; c < width; ++c) {
      const std::string cell(io::trim(fields[c + skip]));
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(cell, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != cell.size() || cell.empty()) {
        throw DatasetError(path + ": row " + std::to_string(r + 1) + " has non-numeric cell '" + cell + "'");
      }
      out(static_cast<Eigen::Index>(r - 1), static_cast<Eigen::Index>(c)) = v;
    }
  }
  return out;
}

/// Quotes a field that holds a comma, quote or newline.
inline std::string csv_field(const std::string& field) {
  if (field.find_first_of(",\"\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

/// FNV-1a 64-bit digest, rendered as 16 hex digits.
inline std::string fnv1a_hex(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

/// A flat delimited table preceded by "# key: value" metadata lines.
struct PlotFile {
  std::vector<std::pair<std::string, std::string>> meta;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  std::string format() const {
    std::string out;
    for (const auto& [k, v] : meta) out += "# " + k + ": " + v + "\n";
    for (std::size_t i = 0; i < columns.size(); ++i) out += (i ? "," : "") + csv_field(columns[i]);
    out += '\n';
    for (const auto& row : rows) {
      for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + csv_field(row[i]);
      out += '\n';
    }
    return out;
  }
  void write(const std::string& path) const { io::write_file(path, format()); }
};

}  // namespace mixmem
