#include "petreg/io.hpp"

#include <cmath>
#include <cstdlib>
#include <istream>
#include <sstream>

#include "petreg/errors.hpp"

namespace petreg {
namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  std::size_t b = s.find_last_not_of(" \t\r");
  return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') cells.push_back("");
  return cells;
}

long checked_count(double v, long row, long col, const char* what) {
  if (!std::isfinite(v) || v != std::floor(v))
    throw ParseError(std::string(what) + " must be an integer", row, col);
  if (v < 0) throw ParseError(std::string(what) + " must be nonnegative", row, col);
  if (v > 9.0e15) throw ParseError(std::string(what) + " is too large", row, col);
  return static_cast<long>(v);
}

}  // namespace

std::size_t CsvTable::column_index(const std::string& name) const {
  for (std::size_t j = 0; j < columns.size(); ++j)
    if (columns[j] == name) return j;
  throw ParseError("missing column '" + name + "'", 1, 0);
}

CsvTable read_csv(std::istream& in) {
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty input: header row required", 1, 0);
  t.columns = split_line(line);
  if (t.columns.empty() || (t.columns.size() == 1 && t.columns[0].empty()))
    throw ParseError("header row has no columns", 1, 0);
  for (std::size_t j = 0; j < t.columns.size(); ++j)
    if (t.columns[j].empty())
      throw ParseError("empty column name", 1, static_cast<long>(j) + 1);

  long row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;  // ignore blank lines
    const std::vector<std::string> cells = split_line(line);
    if (cells.size() != t.columns.size())
      throw ParseError("expected " + std::to_string(t.columns.size()) + " cells, found " +
                           std::to_string(cells.size()),
                       row, 0);
    std::vector<double> vals(cells.size());
    for (std::size_t j = 0; j < cells.size(); ++j) {
      const std::string& c = cells[j];
      if (c.empty()) throw ParseError("empty cell", row, static_cast<long>(j) + 1);
      char* end = nullptr;
      const double v = std::strtod(c.c_str(), &end);
      if (end != c.c_str() + c.size() || !std::isfinite(v))
        throw ParseError("cell '" + c + "' is not a finite number", row,
                         static_cast<long>(j) + 1);
      vals[j] = v;
    }
    t.rows.push_back(std::move(vals));
  }
  return t;
}

RegressionData regression_from_csv(const CsvTable& table, const std::string& response,
                                   const std::vector<std::string>& covariates,
                                   bool intercept) {
  const std::size_t yj = table.column_index(response);
  std::vector<std::size_t> xj;
  for (const std::string& name : covariates) xj.push_back(table.column_index(name));

  const std::size_t n = table.rows.size();
  const std::size_t q = xj.size() + (intercept ? 1 : 0);
  if (q == 0) throw ParseError("no covariates and no intercept requested", 1, 0);

  std::vector<long> y(n);
  Eigen::MatrixXd X(n, q);
  std::vector<std::string> names;
  if (intercept) names.push_back("intercept");
  for (const std::string& name : covariates) names.push_back(name);

  for (std::size_t i = 0; i < n; ++i) {
    const long row = static_cast<long>(i) + 2;  // 1-based file line, after the header
    y[i] = checked_count(table.rows[i][yj], row, static_cast<long>(yj) + 1, "response");
    std::size_t k = 0;
    if (intercept) X(i, k++) = 1.0;
    for (std::size_t j : xj) X(i, k++) = table.rows[i][j];
  }
  return RegressionData(std::move(y), std::move(X), std::move(names));
}

FrequencyTable frequency_from_csv(const CsvTable& table) {
  const std::size_t yj = table.column_index("y");
  const std::size_t cj = table.column_index("count");
  long y_max = 0;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const long row = static_cast<long>(i) + 2;
    const long y = checked_count(table.rows[i][yj], row, static_cast<long>(yj) + 1, "y");
    if (y > 1000000) throw ParseError("y value too large for a frequency table", row,
                                      static_cast<long>(yj) + 1);
    y_max = std::max(y_max, y);
  }
  std::vector<long long> counts(static_cast<std::size_t>(y_max) + 1, 0);
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const long row = static_cast<long>(i) + 2;
    const long y = checked_count(table.rows[i][yj], row, static_cast<long>(yj) + 1, "y");
    counts[y] += checked_count(table.rows[i][cj], row, static_cast<long>(cj) + 1, "count");
  }
  return FrequencyTable(std::move(counts));
}

}  // namespace petreg
