#include "petreg/pet.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <vector>

#include "petreg/errors.hpp"
#include "petreg/quadrature.hpp"

namespace petreg {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kMassFloor = 1e-300;   // log-likelihood floor for underflowed cells
constexpr double kHtFloor = 1e-280;     // tail-ratio denominators below this are noise
constexpr double kSelfCheckTol = 1e-8;  // absolute, on probabilities
constexpr double kLogKernelCut = 690.0;  // exp(-z) underflows near 709; switch early
// whole-table rescale: power of two so the scaling itself is exact
constexpr double kRescaleHi = 1e250;
constexpr double kRescaleFactor = 0x1p-512;
constexpr double kLogRescale = 354.89135644669199431;  // 512 ln 2

// Conditional on the mixing draw X = x, Y is mixed Poisson and its pgf is
//   G(t | x) = exp{ -x (zeta - sum_{j>=1} nu_j t^j) },
// with nu_j >= 0 for every p > 1 and sum_j nu_j = zeta (mass conservation);
// also sum_j j nu_j = m (the conditional mean is m x). The coefficients are
// free of x, so one pass sets up the whole outer rule.
struct InnerSeries {
  double zeta = 0.0;
  std::vector<double> jnu;  // jnu[j-1] = j * nu_j, the convolution kernel
};

InnerSeries inner_series(const PetParams& pr, long y_max) {
  const double m = pr.m, phi = pr.phi, p = pr.p;
  InnerSeries s;
  s.jnu.resize(static_cast<std::size_t>(y_max));
  if (p < 2.0) {
    // compound Poisson-gamma layer: nu_j = c0 r1 C(a+j-1, j) q^j
    const double a = (2.0 - p) / (p - 1.0);
    const double jump_scale = phi * (p - 1.0) * std::pow(m, p - 1.0);
    const double q = jump_scale / (1.0 + jump_scale);
    const double c0 = std::pow(m, 2.0 - p) / (phi * (2.0 - p));
    const double log_r1 = -a * std::log1p(jump_scale);
    s.zeta = -c0 * std::expm1(log_r1);
    double nu = c0 * std::exp(log_r1) * a * q;
    for (long j = 1; j <= y_max; ++j) {
      s.jnu[j - 1] = j * nu;
      nu *= q * (a + j) / (j + 1.0);
    }
  } else if (p == 2.0) {
    // gamma layer: nu_j = q^j / (j phi)
    const double theta = phi * m;
    const double q = theta / (1.0 + theta);
    s.zeta = std::log1p(theta) / phi;
    double nu = q / phi;
    for (long j = 1; j <= y_max; ++j) {
      s.jnu[j - 1] = j * nu;
      nu *= q * j / (j + 1.0);
    }
  } else {
    // tilted-stable layer: nu_{j+1} / nu_j = (j - alpha) / ((j+1)(1+theta))
    const double alpha = (p - 2.0) / (p - 1.0);
    const double theta = std::pow(m, 1.0 - p) / ((p - 1.0) * phi);
    const double ck = std::pow(p - 1.0, alpha) * std::pow(phi, alpha - 1.0) / (p - 2.0);
    s.zeta = ck * std::pow(theta, alpha) * std::expm1(alpha * std::log1p(1.0 / theta));
    double nu = ck * alpha * std::pow(1.0 + theta, alpha - 1.0);
    for (long j = 1; j <= y_max; ++j) {
      s.jnu[j - 1] = j * nu;
      nu *= (j - alpha) / ((j + 1.0) * (1.0 + theta));
    }
  }
  return s;
}

// P(Y = 0..y_max | X = x) on a shared scale: true value rho[n] * exp(log_off).
// The exp-of-series recursion n p_n = sum_j (j nu_j x) p_{n-j} has nonnegative
// terms throughout, so accuracy is limited only by rounding accumulation.
// Starting from rho[0] = 1 keeps the deepest tables alive; growth past the
// overflow guard rescales the whole prefix by an exact power of two.
void conditional_table(const InnerSeries& s, double x, std::vector<double>& rho,
                       double& log_off) {
  const long y_max = static_cast<long>(s.jnu.size());
  rho.assign(static_cast<std::size_t>(y_max) + 1, 0.0);
  rho[0] = 1.0;
  log_off = -x * s.zeta;
  const double* jnu = s.jnu.data();
  double* r = rho.data();
  for (long n = 1; n <= y_max; ++n) {
    double acc = 0.0;
    for (long j = 1; j <= n; ++j) acc += jnu[j - 1] * r[n - j];
    acc *= x / n;
    r[n] = acc;
    if (acc > kRescaleHi) {
      for (long i = 0; i <= n; ++i) r[i] *= kRescaleFactor;
      log_off += kLogRescale;
    }
  }
}

std::vector<double> pmf_table_at(const PetParams& pr, long y_max, std::size_t outer) {
  const LaguerreRule& rule = gauss_laguerre(outer);
  const InnerSeries series = inner_series(pr, y_max);
  std::vector<double> acc(static_cast<std::size_t>(y_max) + 1, 0.0);
  std::vector<double> rho;
  for (std::size_t i = 0; i < outer; ++i) {
    const double lw = rule.log_weights[i];
    double log_off = 0.0;
    // weight * exp(-x zeta) bounds the node by exp(lw + log_off); rescaled
    // entries stay under exp(586), so below -1350 nothing can surface
    if (lw - rule.nodes[i] * series.zeta < -1350.0) continue;
    conditional_table(series, rule.nodes[i], rho, log_off);
    const double t = lw + log_off;
    if (t > -kLogKernelCut) {
      const double scale = std::exp(t);
      for (long y = 0; y <= y_max; ++y) acc[y] += scale * rho[y];
    } else {
      for (long y = 0; y <= y_max; ++y) {
        if (rho[y] <= 0.0) continue;
        const double e = t + std::log(rho[y]);
        if (e > -745.0) acc[y] += std::exp(e);
      }
    }
  }
  for (double v : acc)
    if (!std::isfinite(v))
      throw EvaluationError("pmf quadrature overflowed", v, kInf);
  return acc;
}

void check_quadrature_inputs(const PetParams& pr, long y, const QuadratureOptions& opts) {
  if (y < 0) throw DomainError("pmf: y must be a nonnegative integer");
  if (!(pr.phi > 0.0))
    throw DomainError("pmf: the count law exists only for phi > 0");
  if (pr.p == 1.0)
    throw DomainError(
        "pmf quadrature: the p = 1 mixing law is discrete and outside the series "
        "expansion; use the Monte Carlo pmf");
  if (opts.outer_nodes < 8 || opts.inner_nodes < 8)
    throw DomainError("pmf quadrature: node counts below 8 are never adequate");
}

// Z-marginal sampler for the hierarchy. One object per parameter value so the
// per-draw work stays constant; all branches draw X fresh every call.
struct ZSampler {
  enum class Branch { scaled_poisson, cpg, gamma, tilted_stable, inv_gauss } branch;
  double m, phi;
  // cpg
  double rate = 0.0, shape = 0.0, scale = 0.0;
  // tilted stable
  double alpha = 0.0, theta = 0.0, ck = 0.0, tilt_rate = 0.0;

  explicit ZSampler(const PetParams& pr) : m(pr.m), phi(pr.phi) {
    const double p = pr.p;
    if (!(phi > 0.0)) throw DomainError("sampling requires phi > 0");
    if (p == 1.0) {
      branch = Branch::scaled_poisson;
    } else if (p < 2.0) {
      branch = Branch::cpg;
      rate = std::pow(m, 2.0 - p) / (phi * (2.0 - p));
      shape = (2.0 - p) / (p - 1.0);
      scale = phi * (p - 1.0) * std::pow(m, p - 1.0);
    } else if (p == 2.0) {
      branch = Branch::gamma;
    } else if (p == 3.0) {
      branch = Branch::inv_gauss;
    } else {
      branch = Branch::tilted_stable;
      alpha = (p - 2.0) / (p - 1.0);
      theta = std::pow(m, 1.0 - p) / ((p - 1.0) * phi);
      ck = std::pow(p - 1.0, alpha) * std::pow(phi, alpha - 1.0) / (p - 2.0);
      // tilt power per unit of x; equals m^(2-p) / (phi (p-2))
      tilt_rate = ck * std::pow(theta, alpha);
    }
  }

  double draw(Rng& rng) const {
    switch (branch) {
      case Branch::scaled_poisson: {
        const double x = rng.exponential();
        return phi * rng.poisson(m * x / phi);
      }
      case Branch::cpg: {
        const double x = rng.exponential();
        const long count = rng.poisson(rate * x);
        return count == 0 ? 0.0 : rng.gamma(count * shape, scale);
      }
      case Branch::gamma: {
        const double x = rng.exponential();
        return x == 0.0 ? 0.0 : rng.gamma(x / phi, phi * m);
      }
      case Branch::inv_gauss: {
        const double x = rng.exponential();
        return x == 0.0 ? 0.0 : rng.inverse_gaussian(m * x, x * x / phi);
      }
      case Branch::tilted_stable: {
        // conditional on x the law is a positive stable with mass ck*x tilted
        // by theta, drawn exactly, so x itself keeps its exact unit
        // exponential law; assembled in logs because ck*x to the 1/alpha can
        // overflow near the p = 2 boundary
        const double x = rng.exponential();
        if (x == 0.0) return 0.0;
        const double w = rng.tilted_stable(alpha, tilt_rate * x);
        return std::exp(std::log(ck * x) / alpha + std::log(w));
      }
    }
    return 0.0;  // unreachable
  }
};

// Poisson kernels for a block of y values from one z draw, written into
// kernel[0..y_max]; multiplicative in the safe range, log-stepped otherwise
void poisson_kernels(double z, long y_max, double* kernel) {
  if (z == 0.0) {
    kernel[0] = 1.0;
    for (long y = 1; y <= y_max; ++y) kernel[y] = 0.0;
    return;
  }
  if (z < kLogKernelCut) {
    double k = std::exp(-z);
    kernel[0] = k;
    for (long y = 1; y <= y_max; ++y) {
      k *= z / y;
      kernel[y] = k;
    }
    return;
  }
  const double lz = std::log(z);
  double lk = -z;
  kernel[0] = 0.0;
  for (long y = 1; y <= y_max; ++y) {
    lk += lz - std::log(static_cast<double>(y));
    kernel[y] = lk > -745.0 ? std::exp(lk) : 0.0;
  }
}

struct Welford {
  double mean = 0.0, m2 = 0.0;
  long n = 0;
  void add(double v) {
    ++n;
    const double d = v - mean;
    mean += d / n;
    m2 += d * (v - mean);
  }
  double variance() const { return n > 1 ? m2 / (n - 1) : 0.0; }
};

void validate_counts(std::span<const long long> counts) {
  for (long long c : counts)
    if (c < 0) throw DomainError("log-likelihood: negative frequency");
}

// core of the MC likelihood for one homogeneous group; z draws are cached so
// the variance pass sees exactly the estimation draws
LoglikResult loglik_mc_group(std::span<const long long> counts, const PetParams& pr,
                             std::size_t draws, std::uint64_t seed, std::uint64_t group) {
  if (draws < 2) throw DomainError("log-likelihood: need at least 2 draws");
  long y_max = static_cast<long>(counts.size()) - 1;
  while (y_max > 0 && counts[y_max] == 0) --y_max;

  const ZSampler sampler(pr);
  Rng rng = Rng::stream(seed, "pet-loglik", group);
  std::vector<double> zs(draws);
  for (double& z : zs) z = sampler.draw(rng);

  std::vector<double> kernel(static_cast<std::size_t>(y_max) + 1);
  std::vector<Welford> per_y(static_cast<std::size_t>(y_max) + 1);
  for (double z : zs) {
    poisson_kernels(z, y_max, kernel.data());
    for (long y = 0; y <= y_max; ++y)
      if (counts[y] > 0) per_y[y].add(kernel[y]);
  }

  double loglik = 0.0;
  bool degenerate = false;
  for (long y = 0; y <= y_max; ++y) {
    if (counts[y] == 0) continue;
    const double ph = per_y[y].mean;
    if (ph <= 0.0) degenerate = true;
    loglik += counts[y] * std::log(std::max(ph, kMassFloor));
  }
  if (degenerate) return {loglik, kInf};

  // delta method through the shared draws: l-hat varies through the per-draw
  // aggregate g = sum_y n_y K_y(z) / p-hat_y, so Var(l-hat) ~ Var(g)/D
  Welford g;
  for (double z : zs) {
    poisson_kernels(z, y_max, kernel.data());
    double sum = 0.0;
    for (long y = 0; y <= y_max; ++y)
      if (counts[y] > 0) sum += counts[y] * kernel[y] / per_y[y].mean;
    g.add(sum);
  }
  return {loglik, std::sqrt(g.variance() / draws)};
}

LoglikResult loglik_quadrature_group(std::span<const long long> counts, const PetParams& pr,
                                     const QuadratureOptions& quad) {
  long y_max = static_cast<long>(counts.size()) - 1;
  while (y_max > 0 && counts[y_max] == 0) --y_max;
  const std::vector<double> probs =
      pmf_quadrature_table(pr, y_max, quad);
  double loglik = 0.0;
  for (long y = 0; y <= y_max; ++y)
    if (counts[y] > 0) loglik += counts[y] * std::log(std::max(probs[y], kMassFloor));
  return {loglik, 0.0};
}

std::vector<long long> counts_from(std::span<const long> y) {
  long top = 0;
  for (long v : y) {
    if (v < 0) throw DomainError("log-likelihood: counts must be nonnegative");
    top = std::max(top, v);
  }
  std::vector<long long> counts(static_cast<std::size_t>(top) + 1, 0);
  for (long v : y) ++counts[v];
  return counts;
}

}  // namespace

PetParams::PetParams(double m_, double phi_, double p_) : m(m_), phi(phi_), p(p_) {
  if (!std::isfinite(m) || !std::isfinite(phi) || !std::isfinite(p))
    throw DomainError("pet: parameters must be finite");
  if (!(m > 0.0)) throw DomainError("pet: mean must be positive");
  if (p < 1.0) throw DomainError("pet: power must be 1 or greater");
  if (!(m + m * m + phi * std::pow(m, p) > 0.0))
    throw DomainError("pet: variance must stay positive; phi must exceed -(m^{2-p} + m^{1-p})");
}

double pet_mean(const PetParams& params) { return params.m; }

double pet_variance(const PetParams& params) {
  return params.m + params.m * params.m + params.phi * std::pow(params.m, params.p);
}

std::vector<long> sample_pet(const PetParams& params, std::size_t n, Rng& rng) {
  const ZSampler sampler(params);
  std::vector<long> out(n);
  for (auto& y : out) y = rng.poisson(sampler.draw(rng));
  return out;
}

std::vector<long> sample_pet_means(std::span<const double> means, double phi, double p,
                                   Rng& rng) {
  std::vector<long> out(means.size());
  for (std::size_t i = 0; i < means.size(); ++i) {
    const ZSampler sampler(PetParams(means[i], phi, p));
    out[i] = rng.poisson(sampler.draw(rng));
  }
  return out;
}

PmfEstimate pmf_mc(const PetParams& params, long y, std::size_t draws, Rng& rng) {
  if (y < 0) throw DomainError("pmf: y must be a nonnegative integer");
  if (draws < 10000) throw DomainError("Monte Carlo pmf needs at least 10^4 draws");
  const ZSampler sampler(params);
  const double lgy = std::lgamma(y + 1.0);
  Welford w;
  for (std::size_t d = 0; d < draws; ++d) {
    const double z = sampler.draw(rng);
    double k;
    if (z == 0.0) {
      k = y == 0 ? 1.0 : 0.0;
    } else {
      const double lk = -z + y * std::log(z) - lgy;
      k = lk > -745.0 ? std::exp(lk) : 0.0;
    }
    w.add(k);
  }
  return {w.mean, std::sqrt(w.variance() / draws)};
}

std::vector<PmfEstimate> pmf_mc_table(const PetParams& params, long y_max, std::size_t draws,
                                      Rng& rng) {
  if (y_max < 0) throw DomainError("pmf: y_max must be a nonnegative integer");
  if (draws < 10000) throw DomainError("Monte Carlo pmf needs at least 10^4 draws");
  const ZSampler sampler(params);
  std::vector<double> kernel(static_cast<std::size_t>(y_max) + 1);
  std::vector<Welford> per_y(static_cast<std::size_t>(y_max) + 1);
  for (std::size_t d = 0; d < draws; ++d) {
    const double z = sampler.draw(rng);
    poisson_kernels(z, y_max, kernel.data());
    for (long y = 0; y <= y_max; ++y) per_y[y].add(kernel[y]);
  }
  std::vector<PmfEstimate> out(static_cast<std::size_t>(y_max) + 1);
  for (long y = 0; y <= y_max; ++y)
    out[y] = {per_y[y].mean, std::sqrt(per_y[y].variance() / draws)};
  return out;
}

QuadratureResult pmf_quadrature_checked(const PetParams& params, long y,
                                        const QuadratureOptions& opts) {
  check_quadrature_inputs(params, y, opts);
  const std::vector<double> coarse = pmf_table_at(params, y, opts.outer_nodes);
  if (!opts.self_check) return {coarse[y], 0.0, true};
  const std::vector<double> fine = pmf_table_at(params, y, 2 * opts.outer_nodes);
  const double delta = std::fabs(fine[y] - coarse[y]);
  return {fine[y], delta, delta <= kSelfCheckTol};
}

double pmf_quadrature(const PetParams& params, long y, const QuadratureOptions& opts) {
  const QuadratureResult r = pmf_quadrature_checked(params, y, opts);
  if (!r.converged)
    throw EvaluationError("pmf quadrature self-check failed; raise outer_nodes", r.value,
                          r.check_delta);
  return r.value;
}

std::vector<double> pmf_quadrature_table(const PetParams& params, long y_max,
                                         const QuadratureOptions& opts) {
  check_quadrature_inputs(params, y_max, opts);
  std::vector<double> coarse = pmf_table_at(params, y_max, opts.outer_nodes);
  if (!opts.self_check) return coarse;
  std::vector<double> fine = pmf_table_at(params, y_max, 2 * opts.outer_nodes);
  double worst = 0.0;
  double at = 0.0;
  for (long y = 0; y <= y_max; ++y) {
    const double d = std::fabs(fine[y] - coarse[y]);
    if (d > worst) {
      worst = d;
      at = fine[y];
    }
  }
  if (worst > kSelfCheckTol)
    throw EvaluationError("pmf quadrature self-check failed; raise outer_nodes", at, worst);
  return fine;
}

long support_upper(const PetParams& params, double mass_tol, long cap,
                   const QuadratureOptions& opts) {
  if (!(mass_tol > 0.0 && mass_tol < 1.0))
    throw DomainError("support_upper: mass tolerance must lie in (0,1)");
  if (cap < 1) throw DomainError("support_upper: cap must be positive");
  long y_max = 16;
  for (;;) {
    y_max = std::min(y_max, cap);
    const std::vector<double> table = pmf_quadrature_table(params, y_max, opts);
    double cum = 0.0;
    for (long y = 0; y <= y_max; ++y) {
      cum += table[y];
      if (cum >= 1.0 - mass_tol) return y;
    }
    if (y_max == cap)
      throw ConvergenceError("support scan hit its cap before covering the requested mass",
                             cap);
    y_max *= 2;
  }
}

double ht_index(const PetParams& params, long y, const QuadratureOptions& opts) {
  if (y < 0) throw DomainError("ht_index: y must be a nonnegative integer");
  const std::vector<double> table = pmf_quadrature_table(params, y + 1, opts);
  if (table[y] < kHtFloor || table[y + 1] < kHtFloor)
    throw EvaluationError("heavy-tail ratio: pmf underflowed at the requested y", table[y + 1],
                          kHtFloor);
  return table[y + 1] / table[y];
}

LoglikResult pet_log_likelihood_table(std::span<const long long> counts, const PetParams& params,
                                      const LoglikOptions& opts) {
  validate_counts(counts);
  if (std::accumulate(counts.begin(), counts.end(), 0LL) == 0) return {0.0, 0.0};
  if (opts.method == LoglikOptions::Method::quadrature)
    return loglik_quadrature_group(counts, params, opts.quad);
  return loglik_mc_group(counts, params, opts.draws, opts.seed, 0);
}

LoglikResult pet_log_likelihood(std::span<const long> y, const PetParams& params,
                                const LoglikOptions& opts) {
  if (y.empty()) return {0.0, 0.0};
  const std::vector<long long> counts = counts_from(y);
  return pet_log_likelihood_table(counts, params, opts);
}

LoglikResult pet_log_likelihood(std::span<const long> y, std::span<const double> means,
                                double phi, double p, const LoglikOptions& opts) {
  if (y.size() != means.size())
    throw DomainError("log-likelihood: response and mean lengths differ");
  if (y.empty()) return {0.0, 0.0};

  // group observations that share a mean; substream index = rank of the mean
  // value, so the result does not depend on observation order
  std::vector<std::size_t> order(y.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return means[a] < means[b]; });

  double loglik = 0.0;
  double var_sum = 0.0;
  std::uint64_t group = 0;
  std::size_t i = 0;
  std::vector<long long> counts;
  while (i < order.size()) {
    const double mi = means[order[i]];
    long top = 0;
    std::size_t j = i;
    for (; j < order.size() && means[order[j]] == mi; ++j) {
      if (y[order[j]] < 0) throw DomainError("log-likelihood: counts must be nonnegative");
      top = std::max(top, y[order[j]]);
    }
    counts.assign(static_cast<std::size_t>(top) + 1, 0);
    for (std::size_t k = i; k < j; ++k) ++counts[y[order[k]]];

    const PetParams pr(mi, phi, p);
    LoglikResult r;
    if (opts.method == LoglikOptions::Method::quadrature)
      r = loglik_quadrature_group(counts, pr, opts.quad);
    else
      r = loglik_mc_group(counts, pr, opts.draws, opts.seed, group);
    loglik += r.value;
    var_sum += r.std_error * r.std_error;
    ++group;
    i = j;
  }
  return {loglik, std::sqrt(var_sum)};
}

}  // namespace petreg
