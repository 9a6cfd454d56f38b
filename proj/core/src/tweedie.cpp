#include "petreg/tweedie.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "petreg/errors.hpp"

namespace petreg {
namespace {

constexpr double kMinMuPsi = 1e-12;
constexpr double kSeriesRelTol = 1e-12;
constexpr int kSeriesMaxTerms = 10000;
constexpr double kPi = 3.14159265358979323846;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// log of the compound Poisson-gamma density by the jump-count series,
// summed outward from the dominant count
double cpg_log_density(double z, double lambda, double shape, double scale) {
  const double log_lambda = std::log(lambda);
  const double log_z = std::log(z);
  const double log_scale = std::log(scale);
  auto term = [&](long j) {
    const double ja = j * shape;
    return -lambda + j * log_lambda - std::lgamma(j + 1.0) + (ja - 1.0) * log_z -
           z / scale - std::lgamma(ja) - ja * log_scale;
  };
  // start at the stationary point of the log term (Stirling for both gamma
  // factors), then walk uphill to the exact dominant index; the term sequence
  // is unimodal in j, so outward sums from a true local maximum never rise
  const double jstar =
      std::pow(lambda * std::pow(z / (scale * shape), shape), 1.0 / (1.0 + shape));
  long jc = std::max<long>(1, std::lround(std::min(jstar, 9e17)));
  double lt_peak = term(jc);
  bool settled = false;
  for (int guard = 0; guard < kSeriesMaxTerms; ++guard) {
    const double up = term(jc + 1);
    const double down = jc > 1 ? term(jc - 1) : kNegInf;
    if (up > lt_peak) {
      ++jc;
      lt_peak = up;
    } else if (down > lt_peak) {
      --jc;
      lt_peak = down;
    } else {
      settled = true;
      break;
    }
  }
  if (!settled)
    throw EvaluationError("tweedie density series did not converge", lt_peak,
                          std::numeric_limits<double>::quiet_NaN());
  if (lt_peak == kNegInf) return kNegInf;

  long double acc = 1.0L;
  int used = 1;
  const double stop = std::log(kSeriesRelTol);
  for (long j = jc + 1;; ++j) {
    const double rel = term(j) - lt_peak;
    // unimodality from a true local maximum forbids this; trip loudly
    if (rel > 0.5)
      throw EvaluationError("tweedie density series did not converge", lt_peak, rel);
    acc += std::exp((long double)rel);
    if (++used >= kSeriesMaxTerms)
      throw EvaluationError("tweedie density series did not converge",
                            (double)(std::exp((long double)lt_peak) * acc),
                            std::exp(lt_peak + rel));
    if (rel < stop + std::log((double)acc)) break;
  }
  for (long j = jc - 1; j >= 1; --j) {
    const double rel = term(j) - lt_peak;
    if (rel > 0.5)
      throw EvaluationError("tweedie density series did not converge", lt_peak, rel);
    acc += std::exp((long double)rel);
    if (++used >= kSeriesMaxTerms)
      throw EvaluationError("tweedie density series did not converge",
                            (double)(std::exp((long double)lt_peak) * acc),
                            std::exp(lt_peak + rel));
    if (rel < stop + std::log((double)acc)) break;
  }
  return lt_peak + std::log((double)acc);
}

// signed series S(rho) = sum_j (-1)^{j+1} Gamma(j alpha + 1)/j! sin(j pi alpha) rho^j.
// Truncation keys off the sine-free envelope: for rational alpha the sine factor
// zeroes whole arithmetic progressions of terms and must not stop the sum.
struct SignedSum {
  double value;       // sum / exp(log_peak)
  double log_peak;    // max log envelope
  int terms;
  bool reliable;
};

SignedSum stable_series(double rho, double alpha) {
  const double log_rho = std::log(rho);
  // scan j upward, keeping the sum scaled to the running envelope maximum so
  // nothing overflows; the envelope is unimodal in j
  long double acc = 0.0L;
  long double acc_abs = 0.0L;  // same scaling, unsigned: measures cancellation
  double max_env = kNegInf;
  int terms = 0;
  int tail_small = 0;
  for (int j = 1; j <= kSeriesMaxTerms; ++j) {
    const double env = std::lgamma(j * alpha + 1.0) - std::lgamma(j + 1.0) + j * log_rho;
    ++terms;
    if (env > max_env) {
      const long double shrink = std::exp((long double)(max_env - env));
      acc *= shrink;  // first term: acc is 0, harmless
      acc_abs *= shrink;
      max_env = env;
    }
    const double sn = std::sin(j * kPi * alpha);
    const double sign = (j % 2 == 1) ? 1.0 : -1.0;
    const long double mag = std::exp((long double)(env - max_env));
    acc += (long double)(sign * sn) * mag;
    acc_abs += (long double)std::fabs(sn) * mag;
    // stop once past the envelope peak and the envelope is negligible next to
    // what the signed sum retained (or next to the cancellation floor)
    const double retained = std::log(std::max(std::fabs((double)acc), 1e-18)) + max_env;
    if (env < max_env && env < retained + std::log(kSeriesRelTol)) {
      if (++tail_small >= 3) break;
    } else {
      tail_small = 0;
    }
    if (j == kSeriesMaxTerms)
      throw EvaluationError("stable density series did not converge",
                            (double)acc * std::exp(max_env), max_env + std::log((double)terms));
  }
  SignedSum out;
  out.value = (double)acc;
  out.log_peak = max_env;
  out.terms = terms;
  // long double accumulation keeps ~18 digits, so once cancellation has eaten
  // twelve of them relative to the unsigned mass the signed sum is noise
  out.reliable = std::fabs(out.value) > 1e-12 * std::max(1.0, (double)acc_abs);
  return out;
}

double ig_log_density(double z, double mu, double lambda) {
  return 0.5 * (std::log(lambda) - std::log(2.0 * kPi) - 3.0 * std::log(z)) -
         lambda * (z - mu) * (z - mu) / (2.0 * mu * mu * z);
}

double gamma_log_density(double z, double shape, double scale) {
  return (shape - 1.0) * std::log(z) - z / scale - std::lgamma(shape) - shape * std::log(scale);
}

} // namespace

TweedieParams::TweedieParams(double mu_, double psi_, double p_) : mu(mu_), psi(psi_), p(p_) {
  if (!std::isfinite(mu) || !std::isfinite(psi) || !std::isfinite(p))
    throw DomainError("tweedie: parameters must be finite");
  if (mu < kMinMuPsi || psi < kMinMuPsi)
    throw DomainError("tweedie: mu and psi must be at least 1e-12");
  if (p < 1.0)
    throw DomainError("tweedie: power must be 1 or greater (no law exists for 0 < p < 1)");
}

CpgDecomposition cpg_decomposition(const TweedieParams& params) {
  const double p = params.p;
  if (!(p > 1.0 && p < 2.0))
    throw DomainError("cpg_decomposition: defined for 1 < p < 2 only");
  CpgDecomposition d;
  d.rate = std::pow(params.mu, 2.0 - p) / (params.psi * (2.0 - p));
  d.shape = (2.0 - p) / (p - 1.0);
  d.scale = params.psi * (p - 1.0) * std::pow(params.mu, p - 1.0);
  return d;
}

StableTilt stable_tilt(const TweedieParams& params) {
  const double p = params.p;
  if (!(p > 2.0)) throw DomainError("stable_tilt: defined for p > 2 only");
  StableTilt t;
  t.alpha = (p - 2.0) / (p - 1.0);
  t.theta = std::pow(params.mu, 1.0 - p) / ((p - 1.0) * params.psi);
  t.k = std::pow((p - 1.0) * params.psi, t.alpha) / (params.psi * (p - 2.0));
  return t;
}

std::vector<double> sample_tweedie(const TweedieParams& params, std::size_t n, Rng& rng) {
  std::vector<double> out(n);
  const double p = params.p;
  if (p == 1.0) {
    const double lambda = params.mu / params.psi;
    for (auto& z : out) z = params.psi * rng.poisson(lambda);
  } else if (p < 2.0) {
    const CpgDecomposition d = cpg_decomposition(params);
    for (auto& z : out) {
      const long count = rng.poisson(d.rate);
      // gamma shapes add across jumps, so one draw covers the whole sum
      z = (count == 0) ? 0.0 : rng.gamma(count * d.shape, d.scale);
    }
  } else if (p == 2.0) {
    for (auto& z : out) z = rng.gamma(1.0 / params.psi, params.psi * params.mu);
  } else if (p == 3.0) {
    for (auto& z : out) z = rng.inverse_gaussian(params.mu, 1.0 / params.psi);
  } else {
    const StableTilt t = stable_tilt(params);
    // z = k^(1/alpha) * w with w exponentially tilted stable; the tilt power
    // sigma^alpha = k * theta^alpha stays moderate even when sigma itself
    // would overflow, so everything is assembled in logs
    const double log_scale = std::log(t.k) / t.alpha;
    const double tilt = t.k * std::pow(t.theta, t.alpha);
    for (auto& z : out)
      z = std::exp(log_scale + std::log(rng.tilted_stable(t.alpha, tilt)));
  }
  return out;
}

double tweedie_density(const TweedieParams& params, double z) {
  const detail::LogDensity ld = detail::tweedie_log_density_checked(params, z);
  if (!ld.reliable)
    throw EvaluationError("tweedie density series lost all precision to cancellation",
                          std::exp(ld.log_value), std::exp(ld.log_bound));
  return std::exp(ld.log_value);
}

namespace detail {

LogDensity tweedie_log_density_checked(const TweedieParams& params, double z) {
  const double p = params.p;
  if (p == 1.0)
    throw DomainError("tweedie density: the p = 1 law is discrete and has no density");
  if (!(z >= 0.0) || !std::isfinite(z))
    throw DomainError("tweedie density: z must be finite and nonnegative");

  if (p < 2.0) {
    const CpgDecomposition d = cpg_decomposition(params);
    if (z == 0.0) return {-d.rate, true, -d.rate};  // atom mass
    const double lv = cpg_log_density(z, d.rate, d.shape, d.scale);
    return {lv, true, lv};
  }
  if (p == 2.0) {
    const double shape = 1.0 / params.psi;
    const double scale = params.psi * params.mu;
    if (z == 0.0) {
      if (shape > 1.0) return {kNegInf, true, kNegInf};
      if (shape == 1.0) return {-std::log(scale), true, -std::log(scale)};
      return {std::numeric_limits<double>::infinity(), true,
              std::numeric_limits<double>::infinity()};
    }
    const double lv = gamma_log_density(z, shape, scale);
    return {lv, true, lv};
  }
  if (z == 0.0) return {kNegInf, true, kNegInf};
  if (p == 3.0) {
    const double lv = ig_log_density(z, params.mu, 1.0 / params.psi);
    return {lv, true, lv};
  }
  const StableTilt t = stable_tilt(params);
  const double rho = t.k * std::pow(z, -t.alpha);
  const SignedSum s = stable_series(rho, t.alpha);
  const double tilt = -t.theta * z + t.k * std::pow(t.theta, t.alpha);
  const double log_bound = tilt + s.log_peak + std::log((double)s.terms) - std::log(kPi * z);
  if (s.value <= 0.0) {
    // true density is positive; a nonpositive signed sum means total cancellation
    return {kNegInf, false, log_bound};
  }
  const double lv = tilt + s.log_peak + std::log(s.value) - std::log(kPi * z);
  return {lv, s.reliable, log_bound};
}

} // namespace detail

} // namespace petreg
