#include "petreg/indexes.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "petreg/errors.hpp"

namespace petreg {
namespace {

IndexReport from_moments(double mean, double variance, std::optional<double> f0,
                         IndexReport::Source source) {
  if (!(mean > 0.0)) throw DomainError("indexes: undefined at nonpositive mean");
  if (variance < 0.0) throw DomainError("indexes: negative variance");
  IndexReport r;
  r.p_di = variance / mean;
  r.g0_di = variance / (mean + mean * mean);
  r.source = source;
  r.zero_fraction = f0;
  if (f0 && *f0 > 0.0) {
    const double lf0 = std::log(*f0);
    r.p_zi = mean + lf0;
    r.g0_zi = std::log1p(mean) + lf0;
  }
  return r;
}

} // namespace

IndexReport empirical_indexes(std::span<const long> y) {
  if (y.size() < 2) throw DomainError("indexes: need at least 2 observations");
  double mean = 0.0;
  std::size_t zeros = 0;
  for (long v : y) {
    if (v < 0) throw DomainError("indexes: counts must be nonnegative");
    mean += v;
    zeros += v == 0;
  }
  mean /= y.size();
  double ss = 0.0;
  for (long v : y) ss += (v - mean) * (v - mean);
  const double variance = ss / (y.size() - 1);
  IndexReport r = from_moments(mean, variance,
                               static_cast<double>(zeros) / y.size(),
                               IndexReport::Source::empirical);
  r.n = y.size();
  return r;
}

IndexReport indexes_from_summary(double mean, double variance,
                                 std::optional<double> zero_fraction) {
  if (zero_fraction && !(*zero_fraction >= 0.0 && *zero_fraction <= 1.0))
    throw DomainError("indexes: zero fraction must lie in [0,1]");
  return from_moments(mean, variance, zero_fraction, IndexReport::Source::empirical);
}

IndexReport theoretical_indexes(const PetParams& params, const QuadratureOptions& opts) {
  IndexReport r = from_moments(pet_mean(params), pet_variance(params), std::nullopt,
                               IndexReport::Source::theoretical);
  if (params.phi > 0.0) {
    double p0;
    if (params.p == 1.0) {
      // the quadrature route needs a continuous mixing layer; fall back to a
      // fixed-seed Monte Carlo zero mass
      Rng rng = Rng::stream(0x9e3779b97f4a7c15ULL, "theoretical-zero-mass", 0);
      p0 = pmf_mc(params, 0, 1000000, rng).value;
    } else {
      p0 = pmf_quadrature(params, 0, opts);
    }
    if (p0 > 0.0) {
      const double lp0 = std::log(p0);
      r.p_zi = params.m + lp0;
      r.g0_zi = std::log1p(params.m) + lp0;
      r.zero_fraction = p0;
    }
  }
  return r;
}

std::vector<IndexCurvePoint> index_curves(double p, double phi, std::span<const double> m_grid,
                                          const QuadratureOptions& opts) {
  for (std::size_t i = 1; i < m_grid.size(); ++i)
    if (!(m_grid[i] > m_grid[i - 1]))
      throw DomainError("index curves: mean grid must be strictly increasing");
  std::vector<IndexCurvePoint> out;
  out.reserve(m_grid.size());
  for (double m : m_grid) {
    const IndexReport r = theoretical_indexes(PetParams(m, phi, p), opts);
    out.push_back({m, r.p_di, r.g0_di, r.p_zi, r.g0_zi});
  }
  return out;
}

void write_index_curves_csv(std::ostream& os, std::span<const IndexCurvePoint> points) {
  os << "m,p_di,g0_di,p_zi,g0_zi\n";
  char buf[32];
  const auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    os << buf;
  };
  for (const IndexCurvePoint& pt : points) {
    num(pt.m);
    os << ',';
    num(pt.p_di);
    os << ',';
    num(pt.g0_di);
    os << ',';
    if (pt.p_zi) num(*pt.p_zi);
    os << ',';
    if (pt.g0_zi) num(*pt.g0_zi);
    os << '\n';
  }
}

G0TestResult g0_dispersion_test(std::span<const long> y, std::size_t bootstrap_reps,
                                std::uint64_t seed) {
  if (y.size() < 30) throw DomainError("dispersion test: need at least 30 observations");
  if (bootstrap_reps < 199) throw DomainError("dispersion test: need at least 199 replicates");
  const long first = y.empty() ? 0 : y.front();
  bool constant = true;
  for (long v : y) constant = constant && v == first;
  if (constant) throw DomainError("dispersion test: undefined for a constant sample");

  const IndexReport observed = empirical_indexes(y);
  double sample_mean = 0.0;
  for (long v : y) sample_mean += v;
  sample_mean /= y.size();
  const double q = 1.0 / (1.0 + sample_mean);  // geometric with matched mean

  std::size_t at_least = 0;
  std::vector<long> rep(y.size());
  for (std::size_t b = 0; b < bootstrap_reps; ++b) {
    Rng rng = Rng::stream(seed, "g0-bootstrap", b);
    for (auto& v : rep) v = rng.geometric0(q);
    double mean = 0.0;
    for (long v : rep) mean += v;
    mean /= rep.size();
    double stat = 0.0;
    if (mean > 0.0) {
      double ss = 0.0;
      for (long v : rep) ss += (v - mean) * (v - mean);
      stat = ss / (rep.size() - 1) / (mean + mean * mean);
    }
    at_least += stat >= observed.g0_di;
  }
  return {observed.g0_di, (1.0 + at_least) / (bootstrap_reps + 1.0),
          bootstrap_reps};
}

} // namespace petreg
