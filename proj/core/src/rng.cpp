#include "petreg/rng.hpp"

#include <cmath>

#include "petreg/errors.hpp"

namespace petreg {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

} // namespace

std::uint64_t Rng::derive(std::uint64_t master, std::string_view label, std::uint64_t index) {
  std::uint64_t h = splitmix64(master);
  h = splitmix64(h ^ fnv1a(label));
  h = splitmix64(h ^ index);
  return h;
}

Rng Rng::stream(std::uint64_t master, std::string_view label, std::uint64_t index) {
  return Rng(derive(master, label, index));
}

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::uniform_pos() {
  return 1.0 - uniform();
}

double Rng::uniform(double lo, double hi) {
  return lo + (hi - lo) * uniform();
}

double Rng::exponential() {
  return -std::log(uniform_pos());
}

double Rng::normal() {
  if (have_spare_normal_) {
    have_spare_normal_ = false;
    return spare_normal_;
  }
  double u, v, s;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double f = std::sqrt(-2.0 * std::log(s) / s);
  spare_normal_ = v * f;
  have_spare_normal_ = true;
  return u * f;
}

double Rng::gamma(double shape, double scale) {
  if (!(shape > 0.0) || !(scale > 0.0))
    throw DomainError("gamma: shape and scale must be positive");
  if (shape < 1.0) {
    // boost trick: G(a) = G(a+1) * U^{1/a}
    const double u = uniform_pos();
    return gamma(shape + 1.0, scale) * std::pow(u, 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform_pos();
    if (u < 1.0 - 0.0331 * x * x * x * x) return scale * d * v;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return scale * d * v;
  }
}

long Rng::poisson(double lambda) {
  if (lambda < 0.0 || !std::isfinite(lambda))
    throw DomainError("poisson: lambda must be finite and nonnegative");
  if (lambda == 0.0) return 0;
  if (lambda < 10.0) {
    // inversion by sequential search
    const double el = std::exp(-lambda);
    double prod = uniform();
    long k = 0;
    while (prod > el) {
      prod *= uniform();
      ++k;
    }
    return k;
  }
  // PTRD (Hormann 1993) transformed-rejection
  const double smu = std::sqrt(lambda);
  const double b = 0.931 + 2.53 * smu;
  const double a = -0.059 + 0.02483 * b;
  const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
  const double vr = 0.9277 - 3.6224 / (b - 2.0);
  for (;;) {
    double u = uniform() - 0.5;
    double v = uniform();
    const double us = 0.5 - std::fabs(u);
    const double kf = std::floor((2.0 * a / us + b) * u + lambda + 0.43);
    if (us >= 0.07 && v <= vr) return static_cast<long>(kf);
    if (kf < 0.0) continue;
    if (us < 0.013 && v > us) continue;
    const double k = kf;
    if (std::log(v * inv_alpha / (a / (us * us) + b)) <=
        k * std::log(lambda) - lambda - std::lgamma(k + 1.0)) {
      return static_cast<long>(kf);
    }
  }
}

double Rng::inverse_gaussian(double mu, double lambda) {
  if (!(mu > 0.0) || !(lambda > 0.0))
    throw DomainError("inverse_gaussian: mu and lambda must be positive");
  const double n = normal();
  const double y = n * n;
  // smaller root of the quadratic, written addition-only: the textbook
  // mu(1 + t - sqrt(t(t+2))) form cancels catastrophically for large t
  const double t = mu * y / (2.0 * lambda);
  const double x = mu / (1.0 + t + std::sqrt(t * (t + 2.0)));
  if (uniform() <= mu / (mu + x)) return x;
  return mu * mu / x;
}

double Rng::positive_stable(double alpha) {
  if (!(alpha > 0.0) || !(alpha < 1.0))
    throw DomainError("positive_stable: alpha must lie in (0,1)");
  const double pi = 3.14159265358979323846;
  double u;
  do {
    u = uniform() * pi;
  } while (u == 0.0);
  const double e = exponential();
  const double log_a = (alpha * std::log(std::sin(alpha * u)) +
                        (1.0 - alpha) * std::log(std::sin((1.0 - alpha) * u)) -
                        std::log(std::sin(u))) /
                       (1.0 - alpha);
  return std::exp((1.0 - alpha) / alpha * (log_a - std::log(e)));
}

double Rng::tilted_stable(double alpha, double lambda) {
  if (!(alpha > 0.0) || !(alpha < 1.0))
    throw DomainError("tilted_stable: alpha must lie in (0,1)");
  if (!(lambda >= 0.0) || !std::isfinite(lambda))
    throw DomainError("tilted_stable: lambda must be finite and nonnegative");
  if (lambda == 0.0) return positive_stable(alpha);

  constexpr long kGuard = 1'000'000;
  long tries = 0;

  if (lambda <= 1.0) {
    // weak tilt: thin the untilted draws, expected tries at most e
    const double sigma = std::pow(lambda, 1.0 / alpha);
    for (;;) {
      if (++tries > kGuard)
        throw ConvergenceError("tilted stable sampler exceeded its proposal budget", tries);
      const double w = positive_stable(alpha);
      if (uniform() <= std::exp(-sigma * w)) return w;
    }
  }

  // Strong tilt.  On the Kanter rectangle, with a(u) the usual trigonometric
  // factor and t the auxiliary exponential variable, the tilted law is
  //   density(u, t) proportional to a(u) exp(-a(u) t - sigma t^(-c)),
  // c = (1-alpha)/alpha, and the returned draw is w = t^(-c).  For fixed u
  // the exponent ell(t) = a t + sigma t^(-c) is convex, so a flat cap at the
  // mode plus the two tangent lines at mode -/+ one curvature width dominate
  // exp(-ell); the envelope mass shrinks as u grows, and bounding it at
  // u -> 0+ gives a global constant env0 with acceptance of order
  // 1/sqrt(lambda) uniformly in the tilt strength.
  const double pi = 3.14159265358979323846;
  const double c = (1.0 - alpha) / alpha;
  const double log_a0 =
      (alpha * std::log(alpha) + (1.0 - alpha) * std::log1p(-alpha)) / (1.0 - alpha);
  // log(sigma*c) without forming sigma = lambda^(1/alpha), which can overflow
  const double log_sc = std::log(lambda) / alpha + std::log(c);
  const double r0 = std::exp(0.5 * (alpha * log_sc + (1.0 - alpha) * log_a0));
  const double rc = std::sqrt(c + 1.0);
  const double hc = 1.0 - std::pow(2.0, -(c + 1.0));
  const double env0 = 2.0 * r0 / rc + std::max(1.0, r0 / rc) + std::max(1.0, r0 * rc) / hc;
  // beyond this the u slice is down by exp(-745) from the peak: reject outright
  const double log_a_cap = log_a0 + std::log1p(745.0 / lambda) / (1.0 - alpha);

  for (;;) {
    if (++tries > kGuard)
      throw ConvergenceError("tilted stable sampler exceeded its proposal budget", tries);
    double u;
    do {
      u = uniform() * pi;
    } while (u == 0.0);
    const double log_a = (alpha * std::log(std::sin(alpha * u)) +
                          (1.0 - alpha) * std::log(std::sin((1.0 - alpha) * u)) -
                          std::log(std::sin(u))) /
                         (1.0 - alpha);
    if (log_a >= log_a_cap) continue;
    const double a = std::exp(log_a);
    const double tstar = std::exp(alpha * (log_sc - log_a));  // mode of ell
    const double at = a * tstar;
    const double lstar = at / (1.0 - alpha);  // ell at the mode
    const double delta = tstar / std::sqrt((c + 1.0) * at);   // curvature width
    const double h1 = std::max(-delta / tstar, -0.5);
    const double h2 = delta / tstar;
    // ell(tstar*(1+h)) - ell(tstar), kept in relative form for stability
    const auto rel = [&](double h) {
      return std::max(0.0, at * (h + std::expm1(-c * std::log1p(h)) / c));
    };
    const double d1 = rel(h1);
    const double d2 = rel(h2);
    const double t1 = tstar * (1.0 + h1);
    const double t2 = tstar * (1.0 + h2);
    const double s1 = a * std::expm1(-(c + 1.0) * std::log1p(h1));   // -ell'(t1)
    const double s2 = -a * std::expm1(-(c + 1.0) * std::log1p(h2));  //  ell'(t2)
    const double mass_mid = t2 - t1;
    const double mass_left = std::exp(-d1) * (-std::expm1(-s1 * t1)) / s1;
    const double mass_right = std::exp(-d2) / s2;
    const double total = mass_mid + mass_left + mass_right;
    // thinning against env0 keeps the u marginal exact
    if (uniform() > a * total * std::exp(-(lstar - lambda)) / env0) continue;
    double t;
    double gap;
    const double pick = uniform() * total;
    if (pick < mass_mid) {
      t = t1 + uniform() * (t2 - t1);
      gap = rel(t / tstar - 1.0);
    } else if (pick < mass_mid + mass_left) {
      const double g = -std::expm1(-s1 * t1);
      const double s = -std::log1p(-uniform() * g) / s1;
      t = t1 - s;
      gap = rel(t / tstar - 1.0) - d1 - s1 * s;
    } else {
      const double s = exponential() / s2;
      t = t2 + s;
      gap = rel(t / tstar - 1.0) - d2 - s2 * s;
    }
    if (uniform() <= std::exp(-std::max(0.0, gap)))
      return std::exp(-c * std::log(t));
  }
}

long Rng::geometric0(double q) {
  if (!(q > 0.0 && q <= 1.0))
    throw DomainError("geometric0: q must lie in (0,1]");
  if (q == 1.0) return 0;
  return static_cast<long>(std::floor(std::log(uniform_pos()) / std::log1p(-q)));
}

} // namespace petreg
