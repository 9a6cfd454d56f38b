#ifndef PETREG_QUADRATURE_HPP
#define PETREG_QUADRATURE_HPP

#include <cstddef>
#include <vector>

namespace petreg {

// Gauss-Laguerre rule for integrals of the form int_0^inf exp(-x) g(x) dx.
//
// Weights are also kept in log form: for large n the far nodes carry weights
// around exp(-node) which underflow in double long before the node range does.
struct LaguerreRule {
  std::vector<double> nodes;
  std::vector<double> weights;      // may underflow to 0 for far nodes at large n
  std::vector<double> log_weights;  // always finite
};

// cached; nodes from the Jacobi-matrix eigenvalues, weights refined via the
// scaled three-term recurrence so log-weights stay accurate down the tail
const LaguerreRule& gauss_laguerre(std::size_t n);

} // namespace petreg

#endif
