#ifndef PETREG_PET_HPP
#define PETREG_PET_HPP

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "petreg/rng.hpp"

namespace petreg {

// Poisson-exponential-Tweedie count law:
//   Y | Z ~ Poisson(Z),  Z | X ~ Tw_p(m X, X^{1-p} phi),  X ~ Exp(1)
// Mean m, variance m + m^2 + phi m^p. Sampling and pmf evaluation require
// phi > 0; moment and index formulas also admit negative phi as long as the
// variance stays positive.
struct PetParams {
  double m;
  double phi;
  double p;

  PetParams(double m, double phi, double p);
};

double pet_mean(const PetParams& params);
double pet_variance(const PetParams& params);

std::vector<long> sample_pet(const PetParams& params, std::size_t n, Rng& rng);
// regression variant: one draw per entry of means, shared (phi, p)
std::vector<long> sample_pet_means(std::span<const double> means, double phi, double p, Rng& rng);

struct PmfEstimate {
  double value;
  double std_error;
};

// plain Monte Carlo average of the Poisson kernel over hierarchy draws
PmfEstimate pmf_mc(const PetParams& params, long y, std::size_t draws, Rng& rng);
// all of y = 0..y_max from one shared set of draws
std::vector<PmfEstimate> pmf_mc_table(const PetParams& params, long y_max, std::size_t draws,
                                      Rng& rng);

struct QuadratureOptions {
  std::size_t outer_nodes = 64;
  std::size_t inner_nodes = 128;  // validated but inert; see below
  bool self_check = true;         // double the node counts and compare
};

struct QuadratureResult {
  double value;
  double check_delta;  // |value - doubled-resolution value|; 0 when unchecked
  bool converged;
};

// Outer Gauss-Laguerre over the exponential mixing variable. The inner
// integral over z is eliminated exactly: conditional on the mixing draw the
// count law has a log generating function whose power-series coefficients
// are nonnegative for every p > 1, so the conditional pmf comes from a
// positive-term convolution recursion with no truncation or cancellation.
// inner_nodes is kept (and range-checked) for call-site compatibility but
// no longer selects any resolution. p = 1 has a discrete inner law the
// expansion does not cover; use pmf_mc for it.
QuadratureResult pmf_quadrature_checked(const PetParams& params, long y,
                                        const QuadratureOptions& opts = {});
// same, but throws EvaluationError when the self-check fails
double pmf_quadrature(const PetParams& params, long y, const QuadratureOptions& opts = {});
std::vector<double> pmf_quadrature_table(const PetParams& params, long y_max,
                                         const QuadratureOptions& opts = {});

// smallest y whose cumulative probability reaches 1 - mass_tol (capped)
long support_upper(const PetParams& params, double mass_tol = 1e-6, long cap = 10000,
                   const QuadratureOptions& opts = {});

// heavy-tail diagnostic pmf(y+1)/pmf(y); errors if either pmf underflows
double ht_index(const PetParams& params, long y, const QuadratureOptions& opts = {});

struct LoglikOptions {
  enum class Method { quadrature, mc } method = Method::quadrature;
  std::size_t draws = 1000000;  // mc only
  std::uint64_t seed = 0;       // mc only; substreams derive from it
  QuadratureOptions quad = {};
};

struct LoglikResult {
  double value;
  double std_error;  // 0 for the quadrature method
};

LoglikResult pet_log_likelihood(std::span<const long> y, const PetParams& params,
                                const LoglikOptions& opts = {});
// frequency-table variant: counts[k] observations equal to k
LoglikResult pet_log_likelihood_table(std::span<const long long> counts, const PetParams& params,
                                      const LoglikOptions& opts = {});
// regression variant: y[i] has mean means[i]; shared (phi, p)
LoglikResult pet_log_likelihood(std::span<const long> y, std::span<const double> means,
                                double phi, double p, const LoglikOptions& opts = {});

} // namespace petreg

#endif
