#include "petreg/io.hpp"

#include <cstdio>
#include <ctime>
#include <ostream>

#include "petreg/errors.hpp"

namespace petreg {

void json_number(std::ostream& os, double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  os << buf;
}

void json_escape(std::ostream& os, std::string_view s) {
  for (char c : s) {
    switch (c) {
      case '"': os << "\\\""; break;
      case '\\': os << "\\\\"; break;
      case '\n': os << "\\n"; break;
      case '\r': os << "\\r"; break;
      case '\t': os << "\\t"; break;
      default:
        if (static_cast<unsigned char>(c) < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof buf, "\\u%04x", c);
          os << buf;
        } else {
          os << c;
        }
    }
  }
}

void write_fit_report_json(std::ostream& os, const FitResult& fit,
                           const std::vector<std::string>& names, const ReportOptions& opts) {
  const Eigen::Index q = fit.beta.size();
  if (names.size() != static_cast<std::size_t>(q))
    throw DomainError("report: one name per coefficient required");

  os << "{\"model\":\"PET\",\"coefficients\":[";
  for (Eigen::Index j = 0; j < q; ++j) {
    os << (j ? ",{" : "{") << "\"name\":\"";
    json_escape(os, names[j]);
    os << "\",\"estimate\":";
    json_number(os, fit.beta[j]);
    os << ",\"std_error\":";
    json_number(os, fit.std_errors[j]);
    os << "}";
  }
  os << "],\"dispersion\":{\"phi\":";
  json_number(os, fit.phi);
  os << ",\"p\":";
  json_number(os, fit.p);
  os << "},\"godambe_cov\":[";
  for (Eigen::Index i = 0; i < fit.godambe_cov.rows(); ++i) {
    os << (i ? ",[" : "[");
    for (Eigen::Index j = 0; j < fit.godambe_cov.cols(); ++j) {
      if (j) os << ",";
      json_number(os, fit.godambe_cov(i, j));
    }
    os << "]";
  }
  os << "],\"fit\":{\"converged\":" << (fit.converged ? "true" : "false")
     << ",\"iterations\":" << fit.iterations << ",\"paic\":";
  if (fit.paic) json_number(os, *fit.paic);
  else os << "null";
  os << ",\"paic_se\":";
  if (fit.paic_se) json_number(os, *fit.paic_se);
  else os << "null";
  os << "},\"seed\":" << opts.seed << ",\"version\":\"";
  json_escape(os, opts.version);
  os << "\"";
  if (opts.timestamp) {
    std::time_t now = std::time(nullptr);
    std::tm tm_utc;
    gmtime_r(&now, &tm_utc);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    os << ",\"timestamp\":\"" << buf << "\"";
  }
  os << "}\n";
}

void write_fit_report_csv(std::ostream& os, const FitResult& fit,
                          const std::vector<std::string>& names) {
  const Eigen::Index q = fit.beta.size();
  if (names.size() != static_cast<std::size_t>(q))
    throw DomainError("report: one name per coefficient required");
  os << "name,estimate,std_error\n";
  char buf[32];
  for (Eigen::Index j = 0; j < q; ++j) {
    os << names[j] << ',';
    std::snprintf(buf, sizeof buf, "%.17g", fit.beta[j]);
    os << buf << ',';
    std::snprintf(buf, sizeof buf, "%.17g", fit.std_errors[j]);
    os << buf << '\n';
  }
}

}  // namespace petreg
