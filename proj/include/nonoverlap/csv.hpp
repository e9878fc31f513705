#pragma once

// Comma-delimited input with a header row. Quoted fields follow RFC 4180
// (doubled quotes escape, newlines allowed inside quotes).

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "nonoverlap/dataset.hpp"
#include "nonoverlap/errors.hpp"

namespace nonoverlap {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

inline CsvTable parse_csv(std::istream& in) {
  CsvTable table;
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool quoted = false;
  bool field_started = false;
  char ch;
  auto end_field = [&] {
    record.push_back(field);
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    end_field();
    if (!(record.size() == 1 && record[0].empty())) records.push_back(record);
    record.clear();
  };
  while (in.get(ch)) {
    if (quoted) {
      if (ch == '"') {
        if (in.peek() == '"') {
          in.get(ch);
          field += '"';
        } else {
          quoted = false;
        }
      } else {
        field += ch;
      }
    } else if (ch == '"' && !field_started) {
      quoted = true;
      field_started = true;
    } else if (ch == ',') {
      end_field();
    } else if (ch == '\n') {
      end_record();
    } else if (ch == '\r') {
      if (in.peek() == '\n') in.get(ch);
      end_record();
    } else {
      field += ch;
      field_started = true;
    }
  }
  if (quoted) throw DataError("CSV input ends inside a quoted field");
  if (field_started || !field.empty() || !record.empty()) end_record();
  if (records.empty()) throw DataError("CSV input is empty");
  // UTF-8 byte order mark
  if (records[0][0].rfind("\xEF\xBB\xBF", 0) == 0) records[0][0].erase(0, 3);
  table.header = std::move(records[0]);
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != table.header.size()) {
      std::ostringstream os;
      os << "CSV row " << r << " has " << records[r].size() << " fields, header has "
         << table.header.size();
      throw DataError(os.str());
    }
    table.rows.push_back(std::move(records[r]));
  }
  return table;
}

struct ColumnSpec {
  std::string outcome = "Y";
  std::string treatment = "A";
  std::vector<std::string> covariates;   ///< empty: every other column
  std::vector<std::string> categorical;  ///< covariates to one-hot encode
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

inline bool is_missing(std::string_view s) {
  s = trim(s);
  return s.empty() || s == "NA" || s == "NaN" || s == "nan" || s == "null";
}

inline std::string cell_location(std::size_t row, const std::string& column) {
  // Row numbers count data rows from 1; the header is line 1 of the file.
  return "row " + std::to_string(row + 1) + ", column '" + column + "'";
}

inline double parse_number(const std::string& raw, std::size_t row, const std::string& column) {
  if (is_missing(raw)) throw DataError("missing value at " + cell_location(row, column));
  auto s = trim(raw);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    throw DataError("non-numeric value '" + raw + "' at " + cell_location(row, column));
  return v;
}

}  // namespace detail

/// Builds a Dataset from named columns. Categorical covariates with L levels
/// (sorted lexicographically) become L - 1 indicators, the first level being
/// the reference; indicator columns are named "column=level".
inline Dataset dataset_from_table(const CsvTable& table, const ColumnSpec& spec) {
  std::map<std::string, std::size_t> index;
  for (std::size_t j = 0; j < table.header.size(); ++j) index[table.header[j]] = j;
  auto locate = [&](const std::string& name) {
    const auto it = index.find(name);
    if (it == index.end()) throw DataError("CSV has no column named '" + name + "'");
    return it->second;
  };
  const std::size_t y_col = locate(spec.outcome);
  const std::size_t a_col = locate(spec.treatment);
  std::vector<std::string> covariates = spec.covariates;
  if (covariates.empty())
    for (const auto& h : table.header)
      if (h != spec.outcome && h != spec.treatment) covariates.push_back(h);
  const std::set<std::string> categorical(spec.categorical.begin(), spec.categorical.end());
  for (const auto& c : categorical)
    if (std::find(covariates.begin(), covariates.end(), c) == covariates.end())
      throw DataError("categorical column '" + c + "' is not among the covariates");

  const std::size_t n = table.rows.size();
  Dataset d;
  d.A.resize(static_cast<Eigen::Index>(n));
  d.Y.resize(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    d.Y[static_cast<Eigen::Index>(i)] = detail::parse_number(table.rows[i][y_col], i, spec.outcome);
    d.A[static_cast<Eigen::Index>(i)] = detail::parse_number(table.rows[i][a_col], i, spec.treatment);
  }

  std::vector<Eigen::VectorXd> columns;
  for (const auto& name : covariates) {
    const std::size_t j = locate(name);
    if (categorical.count(name)) {
      std::set<std::string> levels;
      for (std::size_t i = 0; i < n; ++i) {
        if (detail::is_missing(table.rows[i][j]))
          throw DataError("missing value at " + detail::cell_location(i, name));
        levels.insert(std::string(detail::trim(table.rows[i][j])));
      }
      for (auto it = std::next(levels.begin(), levels.empty() ? 0 : 1); it != levels.end(); ++it) {
        Eigen::VectorXd col(static_cast<Eigen::Index>(n));
        for (std::size_t i = 0; i < n; ++i)
          col[static_cast<Eigen::Index>(i)] = detail::trim(table.rows[i][j]) == *it ? 1.0 : 0.0;
        columns.push_back(std::move(col));
        d.covariate_names.push_back(name + "=" + *it);
      }
    } else {
      Eigen::VectorXd col(static_cast<Eigen::Index>(n));
      for (std::size_t i = 0; i < n; ++i)
        col[static_cast<Eigen::Index>(i)] = detail::parse_number(table.rows[i][j], i, name);
      columns.push_back(std::move(col));
      d.covariate_names.push_back(name);
    }
  }
  d.X.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(columns.size()));
  for (std::size_t k = 0; k < columns.size(); ++k) d.X.col(static_cast<Eigen::Index>(k)) = columns[k];
  return d;
}

inline Dataset ingest_csv(const std::string& path, const ColumnSpec& spec) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  return dataset_from_table(parse_csv(in), spec);
}

}  // namespace nonoverlap
