#ifndef PETREG_IO_HPP
#define PETREG_IO_HPP

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "petreg/fit.hpp"
#include "petreg/study.hpp"

namespace petreg {

// Comma-separated numeric table with a header row. Parse failures carry
// 1-based file coordinates (the header is line 1); column 0 flags a
// whole-row problem.
struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  // index of a named column; throws naming the column when missing
  std::size_t column_index(const std::string& name) const;
};

CsvTable read_csv(std::istream& in);

// responses must be nonnegative integers; an intercept column named
// "intercept" is prepended when requested
RegressionData regression_from_csv(const CsvTable& table, const std::string& response,
                                   const std::vector<std::string>& covariates,
                                   bool intercept = true);

// grouped-count mode: integer columns y and count, rows in any order
FrequencyTable frequency_from_csv(const CsvTable& table);

// shared JSON plumbing: numbers at 17 significant digits so doubles
// round-trip exactly
void json_number(std::ostream& os, double v);
void json_escape(std::ostream& os, std::string_view s);

struct ReportOptions {
  std::uint64_t seed = 0;
  std::string version;
  bool timestamp = true;
};

// fit report schema:
// {"model":"PET","coefficients":[{"name","estimate","std_error"}...],
//  "dispersion":{"phi","p"},"godambe_cov":[[...]...],
//  "fit":{"converged","iterations","paic","paic_se"},"seed","version"}
// plus a "timestamp" field unless suppressed; absent pAIC serializes as null
void write_fit_report_json(std::ostream& os, const FitResult& fit,
                           const std::vector<std::string>& names, const ReportOptions& opts);
// coefficient table: header name,estimate,std_error
void write_fit_report_csv(std::ostream& os, const FitResult& fit,
                          const std::vector<std::string>& names);

} // namespace petreg

#endif
