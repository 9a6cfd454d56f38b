#ifndef PETREG_ERRORS_HPP
#define PETREG_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace petreg {

// invalid parameter or input values
class DomainError : public std::runtime_error {
public:
  explicit DomainError(const std::string& what) : std::runtime_error(what) {}
};

// a series or quadrature failed to reach its tolerance; carries what was accumulated
class EvaluationError : public std::runtime_error {
public:
  EvaluationError(const std::string& what, double partial, double bound)
      : std::runtime_error(what), partial_sum(partial), error_bound(bound) {}
  double partial_sum;
  double error_bound;
};

// an iterative procedure exhausted its budget
class ConvergenceError : public std::runtime_error {
public:
  ConvergenceError(const std::string& what, long attempts)
      : std::runtime_error(what), attempts(attempts) {}
  long attempts;
};

// a linear system was rank deficient or too ill-conditioned to trust
class RankError : public std::runtime_error {
public:
  explicit RankError(const std::string& what) : std::runtime_error(what) {}
};

// malformed input file; coordinates are 1-based, column 0 = whole-row problem
class ParseError : public std::runtime_error {
public:
  ParseError(const std::string& what, long row, long column)
      : std::runtime_error(what), row(row), column(column) {}
  long row;
  long column;
};

} // namespace petreg

#endif
