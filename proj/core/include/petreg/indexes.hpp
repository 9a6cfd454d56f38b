#ifndef PETREG_INDEXES_HPP
#define PETREG_INDEXES_HPP

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "petreg/pet.hpp"

namespace petreg {

// Dispersion and zero-inflation diagnostics relative to two reference laws:
// Poisson (P-) and the zero-shifted geometric (G0-). The geometric reference
// has quadratic variance mean + mean^2, so G0-DI > 1 flags dispersion beyond
// even that benchmark.
struct IndexReport {
  enum class Source { empirical, theoretical };

  double p_di;                   // variance / mean
  double g0_di;                  // variance / (mean + mean^2)
  std::optional<double> p_zi;    // mean + log f0; absent when f0 unavailable
  std::optional<double> g0_zi;   // log(1 + mean) + log f0
  Source source;
  std::size_t n = 0;             // sample size, raw-sample path only
  std::optional<double> zero_fraction;
};

// raw-sample path; variance uses denominator n-1
IndexReport empirical_indexes(std::span<const long> y);
// summary-statistics path, for data published only as moments; ZI fields
// require the zero fraction
IndexReport indexes_from_summary(double mean, double variance,
                                 std::optional<double> zero_fraction = std::nullopt);
// model-based path: substitutes the law's mean, variance, and P(Y=0); the
// zero mass comes from quadrature, or Monte Carlo where quadrature does not
// apply (p = 1). phi <= 0 leaves the ZI fields absent.
IndexReport theoretical_indexes(const PetParams& params, const QuadratureOptions& opts = {});

// rows of theoretical indexes over a strictly increasing mean grid at fixed
// (p, phi), for plotting
struct IndexCurvePoint {
  double m;
  double p_di;
  double g0_di;
  std::optional<double> p_zi;
  std::optional<double> g0_zi;
};
std::vector<IndexCurvePoint> index_curves(double p, double phi, std::span<const double> m_grid,
                                          const QuadratureOptions& opts = {});
// header m,p_di,g0_di,p_zi,g0_zi; absent ZI cells left empty
void write_index_curves_csv(std::ostream& os, std::span<const IndexCurvePoint> points);

// one-sided test of H0: G0-DI <= 1 against ultra-overdispersion. The null is
// calibrated at the boundary by resampling from a geometric law with q
// matched to the sample mean; p-value (1 + #{replicate >= observed}) / (B+1).
struct G0TestResult {
  double statistic;  // empirical G0-DI
  double p_value;
  std::size_t replicates;
};
G0TestResult g0_dispersion_test(std::span<const long> y, std::size_t bootstrap_reps = 999,
                                std::uint64_t seed = 0);

} // namespace petreg

#endif
