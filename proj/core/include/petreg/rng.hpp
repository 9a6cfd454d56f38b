#ifndef PETREG_RNG_HPP
#define PETREG_RNG_HPP

#include <cstdint>
#include <random>
#include <string_view>

namespace petreg {

// Deterministic random stream with in-repo distribution transforms.
//
// All sampling in the library flows through this class so that a given seed
// produces the same draws on every platform and toolchain; the standard
// library pins mt19937_64 bit output but not its distribution algorithms.
//
// Substreams are derived from (master seed, task label, index) so that
// work items can be evaluated in any order or in parallel without changing
// results.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  static Rng stream(std::uint64_t master, std::string_view label, std::uint64_t index);
  // the raw derived state, for composing deeper hierarchies
  static std::uint64_t derive(std::uint64_t master, std::string_view label, std::uint64_t index);

  std::uint64_t bits() { return engine_(); }

  // uniform on [0,1) with 53 random bits
  double uniform();
  // uniform on (0,1], safe under log()
  double uniform_pos();
  double uniform(double lo, double hi);

  double exponential();                       // rate 1
  double normal();                            // standard, polar method
  double gamma(double shape, double scale);   // Marsaglia-Tsang; shape boost below 1
  long poisson(double lambda);                // inversion below 10, PTRD above
  double inverse_gaussian(double mu, double lambda);  // two-root transform
  // one-sided stable with Laplace transform exp(-s^alpha), 0 < alpha < 1 (Kanter)
  double positive_stable(double alpha);
  // exponential tilt of positive_stable: density proportional to
  // exp(-sigma*w) times the stable density, parameterized by
  // lambda = sigma^alpha, so the Laplace transform is
  // exp(lambda - (sigma + s)^alpha).  Exact, and the expected work grows
  // only like sqrt(lambda), so strong tilts stay affordable.
  double tilted_stable(double alpha, double lambda);
  // zero-shifted geometric on {0,1,...}: P(y) = q(1-q)^y
  long geometric0(double q);

private:
  std::mt19937_64 engine_;
  bool have_spare_normal_ = false;
  double spare_normal_ = 0.0;
};

} // namespace petreg

#endif
