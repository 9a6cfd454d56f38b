#include "petreg/quadrature.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <map>
#include <mutex>

#include "petreg/errors.hpp"

namespace petreg {
namespace {

// Laguerre polynomials L_0..L_m at x with running rescaling; returns
// log|L_m(x)| + sign, and the Newton ratio L_n/L_n' as side products.
struct ScaledEval {
  double value;      // mantissa of L_m
  double log_scale;  // true L_m = value * exp(log_scale)
};

// evaluate L_m(x); out_prev receives L_{m-1} on the same scale
ScaledEval laguerre_scaled(int m, double x, double* out_prev) {
  double lk = 1.0, lk1 = 0.0;  // L_0, L_{-1}
  double log_scale = 0.0;
  for (int k = 0; k < m; ++k) {
    const double next = ((2.0 * k + 1.0 - x) * lk - k * lk1) / (k + 1.0);
    lk1 = lk;
    lk = next;
    const double mag = std::fabs(lk);
    if (mag > 1e200 || (mag > 0.0 && mag < 1e-200)) {
      const double s = mag;
      lk /= s;
      lk1 /= s;
      log_scale += std::log(s);
    }
  }
  if (out_prev) *out_prev = lk1;
  return {lk, log_scale};
}

LaguerreRule build_rule(std::size_t n) {
  if (n < 1) throw DomainError("gauss_laguerre: need at least one node");
  const int ni = static_cast<int>(n);

  // Jacobi matrix eigenvalues give well-conditioned nodes
  Eigen::VectorXd diag(ni), sub(ni > 1 ? ni - 1 : 1);
  for (int k = 0; k < ni; ++k) diag[k] = 2.0 * k + 1.0;
  for (int k = 1; k < ni; ++k) sub[k - 1] = k;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
  es.computeFromTridiagonal(diag, ni > 1 ? sub : Eigen::VectorXd(), Eigen::EigenvaluesOnly);

  LaguerreRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  rule.log_weights.resize(n);

  for (std::size_t i = 0; i < n; ++i) {
    double x = es.eigenvalues()[static_cast<int>(i)];
    // Newton polish; eigenvalues are already close so a few steps suffice
    for (int it = 0; it < 4; ++it) {
      double prev = 0.0;
      const ScaledEval ln = laguerre_scaled(ni, x, &prev);
      if (ln.value == 0.0) break;
      const double deriv = ni * (ln.value - prev) / x;  // L_n' on the same scale
      if (deriv == 0.0) break;
      const double step = ln.value / deriv;
      x -= step;
      if (std::fabs(step) < 1e-15 * (1.0 + std::fabs(x))) break;
    }
    rule.nodes[i] = x;
    const ScaledEval lnp1 = laguerre_scaled(ni + 1, x, nullptr);
    const double log_abs_lnp1 = std::log(std::fabs(lnp1.value)) + lnp1.log_scale;
    const double logw = std::log(x) - 2.0 * std::log(ni + 1.0) - 2.0 * log_abs_lnp1;
    rule.log_weights[i] = logw;
    rule.weights[i] = std::exp(logw);
  }
  return rule;
}

} // namespace

const LaguerreRule& gauss_laguerre(std::size_t n) {
  static std::mutex mu;
  static std::map<std::size_t, LaguerreRule> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, build_rule(n)).first;
  return it->second;
}

} // namespace petreg
