#ifndef PETREG_TWEEDIE_HPP
#define PETREG_TWEEDIE_HPP

#include <cstddef>
#include <vector>

#include "petreg/rng.hpp"

namespace petreg {

// Tweedie law Tw_p(mu, psi): mean mu, variance psi * mu^p.
// Supported powers: p = 1 (scaled Poisson), 1 < p < 2 (compound
// Poisson-gamma with an atom at zero), p = 2 (gamma), p > 2 (exponentially
// tilted one-sided stable; p = 3 is inverse Gaussian).
struct TweedieParams {
  double mu;
  double psi;
  double p;

  TweedieParams(double mu, double psi, double p);
};

// jump representation for 1 < p < 2: count ~ Poisson(rate),
// jump sizes ~ Gamma(shape, scale), zero with probability exp(-rate)
struct CpgDecomposition {
  double rate;
  double shape;
  double scale;
};

CpgDecomposition cpg_decomposition(const TweedieParams& params);

// tilted-stable representation for p > 2: the law is the exp(-theta z) tilt
// of k^{1/alpha} S0 where S0 has Laplace transform exp(-s^alpha)
struct StableTilt {
  double alpha;
  double theta;
  double k;
};

StableTilt stable_tilt(const TweedieParams& params);

std::vector<double> sample_tweedie(const TweedieParams& params, std::size_t n, Rng& rng);

// Density of Tw_p at z (z > 0); at z = 0 returns the atom mass for
// 1 < p < 2 and the density limit otherwise. Continuous branches only
// (p = 1 is a discrete law and is rejected).
double tweedie_density(const TweedieParams& params, double z);

namespace detail {

// log density with a cancellation diagnostic for the alternating stable
// series: when `reliable` is false the signed sum drowned in rounding noise
// and `log_bound` caps log|density| from the term envelope.
struct LogDensity {
  double log_value;
  bool reliable;
  double log_bound;
};

LogDensity tweedie_log_density_checked(const TweedieParams& params, double z);

} // namespace detail

} // namespace petreg

#endif
