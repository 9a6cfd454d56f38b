#include "petreg/fit.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <utility>

#include <boost/math/distributions/chi_squared.hpp>

#include "petreg/errors.hpp"

namespace petreg {
namespace {

constexpr double kMeanClampLo = 1e-12;
constexpr double kMeanClampHi = 1e12;
constexpr double kConditionLimit = 1e12;
constexpr double kLogMeanSpreadFloor = 1e-8;  // below this, p has no leverage
constexpr int kMaxHalvings = 60;

// per-observation ingredients shared by every block
struct Workset {
  Eigen::VectorXd yd, m, V, mp, logm;
  Workset(const Eigen::VectorXd& beta, double phi, double p, const RegressionData& data) {
    m = mean_vector(beta, data.X);
    V = variance_vector(m, phi, p);
    const Eigen::Index n = m.size();
    yd.resize(n);
    mp.resize(n);
    logm.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      yd[i] = static_cast<double>(data.y[i]);
      mp[i] = std::pow(m[i], p);
      logm[i] = std::log(m[i]);
    }
  }
};

Eigen::VectorXd quasi_score_w(const Workset& w, const RegressionData& data) {
  const Eigen::VectorXd r =
      (w.m.array() * (w.yd.array() - w.m.array()) / w.V.array()).matrix();
  return data.X.transpose() * r;
}

Eigen::Vector2d pearson_ef_w(const Workset& w, double phi) {
  Eigen::Vector2d psi = Eigen::Vector2d::Zero();
  for (Eigen::Index i = 0; i < w.m.size(); ++i) {
    const double W = (w.yd[i] - w.m[i]) * (w.yd[i] - w.m[i]) - w.V[i];
    const double a = w.mp[i] / (w.V[i] * w.V[i]);
    psi[0] += a * W;
    psi[1] += a * phi * w.logm[i] * W;
  }
  return psi;
}

SensitivityMatrices sensitivity_w(const Workset& w, double phi, double p,
                                  const RegressionData& data) {
  const Eigen::Index n = w.m.size();
  const Eigen::Index q = data.X.cols();
  SensitivityMatrices s;
  const Eigen::VectorXd d = (w.m.array().square() / w.V.array()).matrix();
  s.s_beta = -(data.X.transpose() * d.asDiagonal() * data.X);
  s.s_gamma.setZero();
  s.s_gamma_beta = Eigen::MatrixXd::Zero(2, q);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double b = w.mp[i] / w.V[i];
    const double bl = b * phi * w.logm[i];
    s.s_gamma(0, 0) -= b * b;
    s.s_gamma(0, 1) -= b * bl;
    s.s_gamma(1, 1) -= bl * bl;
    // dV/dbeta_k = (1 + 2m + p phi m^{p-1}) m x_k
    const double dv_deta = (1.0 + 2.0 * w.m[i] + p * phi * w.mp[i] / w.m[i]) * w.m[i];
    const double v2 = w.V[i] * w.V[i];
    for (Eigen::Index k = 0; k < q; ++k) {
      const double dvb = dv_deta * data.X(i, k);
      s.s_gamma_beta(0, k) -= w.mp[i] * dvb / v2;
      s.s_gamma_beta(1, k) -= phi * w.mp[i] * w.logm[i] * dvb / v2;
    }
  }
  s.s_gamma(1, 0) = s.s_gamma(0, 1);
  return s;
}

VariabilityMatrices variability_w(const Workset& w, double phi, const RegressionData& data) {
  const Eigen::Index n = w.m.size();
  const Eigen::Index q = data.X.cols();
  VariabilityMatrices v;
  const Eigen::VectorXd d = (w.m.array().square() / w.V.array()).matrix();
  v.v_beta = data.X.transpose() * d.asDiagonal() * data.X;
  v.v_gamma.setZero();
  v.v_gamma_beta = Eigen::MatrixXd::Zero(2, q);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double W = (w.yd[i] - w.m[i]) * (w.yd[i] - w.m[i]) - w.V[i];
    const double a = w.mp[i] / (w.V[i] * w.V[i]);
    const Eigen::Vector2d pg(a * W, a * phi * w.logm[i] * W);
    v.v_gamma += pg * pg.transpose();
    const double pb = w.m[i] * (w.yd[i] - w.m[i]) / w.V[i];
    for (Eigen::Index k = 0; k < q; ++k)
      v.v_gamma_beta.col(k) += pg * (pb * data.X(i, k));
  }
  return v;
}

// sandwich restricted to the free parameter indexes; frozen rows/columns of
// the returned full-size matrix stay zero
Eigen::MatrixXd sandwich(const Eigen::MatrixXd& s_full, const Eigen::MatrixXd& v_full,
                         const std::vector<Eigen::Index>& free) {
  const Eigen::Index k = static_cast<Eigen::Index>(free.size());
  Eigen::MatrixXd s(k, k), v(k, k);
  for (Eigen::Index a = 0; a < k; ++a)
    for (Eigen::Index b = 0; b < k; ++b) {
      s(a, b) = s_full(free[a], free[b]);
      v(a, b) = v_full(free[a], free[b]);
    }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(s);
  const double smax = svd.singularValues()(0);
  const double smin = svd.singularValues()(k - 1);
  if (!(smin > 0.0) || smax / smin >= kConditionLimit) {
    // the usual culprit: no spread in the means leaves the p row of the
    // dispersion sensitivity block at zero
    double row_max = 0.0;
    for (Eigen::Index a = 0; a < k; ++a)
      row_max = std::max(row_max, s.row(a).lpNorm<Eigen::Infinity>());
    const double p_row = s.row(k - 1).lpNorm<Eigen::Infinity>();
    if (free.back() == s_full.rows() - 1 && p_row < 1e-12 * row_max)
      throw RankError(
          "sensitivity matrix is singular: the p row vanishes (means carry no spread); "
          "fix p or profile over it");
    throw RankError("sensitivity matrix condition number exceeds 1e12");
  }

  Eigen::FullPivLU<Eigen::MatrixXd> lu(s);
  const Eigen::MatrixXd sinv_v = lu.solve(v);
  Eigen::MatrixXd cov_free = lu.solve(sinv_v.transpose()).transpose();
  cov_free = 0.5 * (cov_free + cov_free.transpose()).eval();

  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(s_full.rows(), s_full.cols());
  for (Eigen::Index a = 0; a < k; ++a)
    for (Eigen::Index b = 0; b < k; ++b) cov(free[a], free[b]) = cov_free(a, b);
  return cov;
}

void assemble_full(const SensitivityMatrices& s, const VariabilityMatrices& v,
                   Eigen::MatrixXd& s_full, Eigen::MatrixXd& v_full) {
  const Eigen::Index q = s.s_beta.rows();
  s_full = Eigen::MatrixXd::Zero(q + 2, q + 2);
  s_full.topLeftCorner(q, q) = s.s_beta;
  s_full.bottomLeftCorner(2, q) = s.s_gamma_beta;
  s_full.bottomRightCorner(2, 2) = s.s_gamma;  // beta-on-gamma block is zero
  v_full = Eigen::MatrixXd::Zero(q + 2, q + 2);
  v_full.topLeftCorner(q, q) = v.v_beta;
  v_full.bottomLeftCorner(2, q) = v.v_gamma_beta;
  v_full.topRightCorner(q, 2) = v.v_gamma_beta.transpose();
  v_full.bottomRightCorner(2, 2) = v.v_gamma;
}

Eigen::VectorXd poisson_irls(const RegressionData& data) {
  const Eigen::Index n = data.X.rows();
  const Eigen::Index q = data.X.cols();
  Eigen::VectorXd yd(n);
  for (Eigen::Index i = 0; i < n; ++i) yd[i] = static_cast<double>(data.y[i]);
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(q);
  for (int it = 0; it < 50; ++it) {
    const Eigen::VectorXd m = mean_vector(beta, data.X);
    const Eigen::VectorXd eta =
        (data.X * beta).cwiseMax(std::log(kMeanClampLo)).cwiseMin(std::log(kMeanClampHi));
    const Eigen::VectorXd z =
        (eta.array() + (yd.array() - m.array()) / m.array()).matrix();
    const Eigen::MatrixXd xtw = data.X.transpose() * m.asDiagonal();
    const Eigen::VectorXd next = (xtw * data.X).ldlt().solve(xtw * z);
    const double delta = (next - beta).lpNorm<Eigen::Infinity>();
    beta = next;
    if (delta < 1e-10) break;
  }
  return beta;
}

}  // namespace

RegressionData::RegressionData(std::vector<long> y_, Eigen::MatrixXd X_,
                               std::vector<std::string> names_)
    : y(std::move(y_)), X(std::move(X_)), names(std::move(names_)) {
  const Eigen::Index n = X.rows();
  const Eigen::Index q = X.cols();
  if (static_cast<Eigen::Index>(y.size()) != n)
    throw DomainError("regression data: response and design row counts differ");
  if (n <= q) throw DomainError("regression data: need more observations than columns");
  if (names.size() != static_cast<std::size_t>(q))
    throw DomainError("regression data: one name per design column required");
  for (long v : y)
    if (v < 0) throw DomainError("regression data: responses must be nonnegative counts");
  if (!X.allFinite()) throw DomainError("regression data: design matrix must be finite");
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  if (qr.rank() < q) throw RankError("regression data: design matrix is rank deficient");
}

Eigen::VectorXd mean_vector(const Eigen::VectorXd& beta, const Eigen::MatrixXd& X,
                            bool* clamped) {
  if (!beta.allFinite()) throw DomainError("mean vector: coefficients must be finite");
  const Eigen::VectorXd eta = X * beta;
  if (!eta.allFinite()) throw DomainError("mean vector: linear predictor is not finite");
  bool hit = false;
  Eigen::VectorXd m(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    const double v = std::exp(eta[i]);
    if (v < kMeanClampLo) {
      m[i] = kMeanClampLo;
      hit = true;
    } else if (v > kMeanClampHi) {
      m[i] = kMeanClampHi;
      hit = true;
    } else {
      m[i] = v;
    }
  }
  if (clamped) *clamped = hit;
  return m;
}

Eigen::VectorXd variance_vector(const Eigen::VectorXd& m, double phi, double p) {
  Eigen::VectorXd V(m.size());
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    V[i] = m[i] + m[i] * m[i] + phi * std::pow(m[i], p);
    if (!(V[i] > 0.0) || !std::isfinite(V[i])) {
      const double bound = -(std::pow(m[i], 2.0 - p) + std::pow(m[i], 1.0 - p));
      std::ostringstream msg;
      msg << "variance nonpositive at observation " << i << ": requires phi > " << bound;
      throw DomainError(msg.str());
    }
  }
  return V;
}

Eigen::VectorXd quasi_score(const Eigen::VectorXd& beta, double phi, double p,
                            const RegressionData& data) {
  return quasi_score_w(Workset(beta, phi, p, data), data);
}

Eigen::Vector2d pearson_ef(const Eigen::VectorXd& beta, double phi, double p,
                           const RegressionData& data) {
  return pearson_ef_w(Workset(beta, phi, p, data), phi);
}

SensitivityMatrices sensitivity_matrices(const Eigen::VectorXd& beta, double phi, double p,
                                         const RegressionData& data) {
  return sensitivity_w(Workset(beta, phi, p, data), phi, p, data);
}

VariabilityMatrices variability_matrices(const Eigen::VectorXd& beta, double phi, double p,
                                         const RegressionData& data) {
  return variability_w(Workset(beta, phi, p, data), phi, data);
}

Eigen::MatrixXd godambe_covariance(const SensitivityMatrices& s, const VariabilityMatrices& v) {
  Eigen::MatrixXd s_full, v_full;
  assemble_full(s, v, s_full, v_full);
  std::vector<Eigen::Index> all(static_cast<std::size_t>(s_full.rows()));
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<Eigen::Index>(i);
  return sandwich(s_full, v_full, all);
}

FitResult chaser_fit(const RegressionData& data, const FitOptions& opts) {
  const Eigen::Index q = data.X.cols();
  if (opts.fix_p) {
    if (opts.p_init < 1.0) throw DomainError("fit: fixed power must be 1 or greater");
  } else if (opts.p_lower < 1.0 || opts.p_upper < opts.p_lower) {
    throw DomainError("fit: power bounds must satisfy 1 <= lower <= upper");
  }
  if (!(opts.alpha > 0.0 && opts.alpha <= 1.0))
    throw DomainError("fit: damping factor must lie in (0,1]");

  Eigen::VectorXd beta = poisson_irls(data);
  double p = opts.fix_p ? opts.p_init
                        : std::clamp(opts.p_init, opts.p_lower, opts.p_upper);

  {
    const Eigen::VectorXd m0 = mean_vector(beta, data.X);
    const Eigen::VectorXd logm = m0.array().log();
    const double mean_lm = logm.mean();
    const double sd_lm =
        std::sqrt((logm.array() - mean_lm).square().sum() / logm.size());
    if (sd_lm < kLogMeanSpreadFloor && !opts.fix_p)
      throw RankError(
          "fit: p is not identified when the means carry no spread; fix p or profile over it");
  }

  double phi;
  if (opts.phi_init) {
    phi = *opts.phi_init;
  } else {
    // moment estimator consistent with the Pearson equations, floored away
    // from zero
    const Eigen::VectorXd m0 = mean_vector(beta, data.X);
    double acc = 0.0;
    for (Eigen::Index i = 0; i < m0.size(); ++i) {
      const double r = data.y[i] - m0[i];
      acc += (r * r - m0[i] - m0[i] * m0[i]) / std::pow(m0[i], p);
    }
    phi = std::max(1e-4, acc / static_cast<double>(m0.size()));
  }
  variance_vector(mean_vector(beta, data.X), phi, p);  // the start point must be valid

  const auto valid = [&](const Eigen::VectorXd& b, double ph, double pw) {
    if (!b.allFinite() || !std::isfinite(ph) || !std::isfinite(pw)) return false;
    try {
      variance_vector(mean_vector(b, data.X), ph, pw);
    } catch (const DomainError&) {
      return false;
    }
    return true;
  };

  FitResult res;
  res.converged = false;
  res.iterations = 0;

  for (std::size_t it = 0; it < opts.max_iter; ++it) {
    res.iterations = it + 1;
    const Workset w(beta, phi, p, data);
    const Eigen::VectorXd psi_b = quasi_score_w(w, data);
    const Eigen::Vector2d psi_g = pearson_ef_w(w, phi);

    double gamma_norm = 0.0;
    if (!opts.fix_phi) gamma_norm = std::max(gamma_norm, std::fabs(psi_g[0]));
    if (!opts.fix_p) gamma_norm = std::max(gamma_norm, std::fabs(psi_g[1]));
    const double beta_norm = psi_b.lpNorm<Eigen::Infinity>();
    res.trace.push_back({beta, phi, p, beta_norm, gamma_norm});

    if (beta_norm < opts.tol && gamma_norm < opts.tol) {
      res.converged = true;
      break;
    }

    // beta: full Newton against the quasi-score; X'DX is positive definite
    {
      const Eigen::VectorXd d = (w.m.array().square() / w.V.array()).matrix();
      const Eigen::MatrixXd info = data.X.transpose() * d.asDiagonal() * data.X;
      const Eigen::VectorXd step = info.ldlt().solve(psi_b);
      double scale = 1.0;
      for (int h = 0; h <= kMaxHalvings; ++h, scale *= 0.5) {
        if (valid(beta + scale * step, phi, p)) {
          beta += scale * step;
          break;
        }
      }
    }

    // gamma: damped Newton with p projected into its bounds and the step
    // halved until the variance constraint holds
    if (!(opts.fix_phi && opts.fix_p)) {
      const Workset wb(beta, phi, p, data);
      const Eigen::Vector2d psi = pearson_ef_w(wb, phi);
      const SensitivityMatrices sm = sensitivity_w(wb, phi, p, data);
      Eigen::Vector2d step = Eigen::Vector2d::Zero();
      if (opts.fix_phi) {
        if (sm.s_gamma(1, 1) == 0.0)
          throw RankError(
              "fit: p is not identified (its sensitivity vanishes); fix p or profile over it");
        step[1] = -psi[1] / sm.s_gamma(1, 1);
      } else if (opts.fix_p) {
        step[0] = -psi[0] / sm.s_gamma(0, 0);
      } else {
        Eigen::FullPivLU<Eigen::Matrix2d> lu(sm.s_gamma);
        if (!lu.isInvertible())
          throw RankError(
              "fit: dispersion sensitivity block is singular (p row vanishes); fix p or "
              "profile over it");
        step = -lu.solve(psi);
      }
      double scale = opts.alpha;
      for (int h = 0; h <= kMaxHalvings; ++h, scale *= 0.5) {
        const double cand_phi = opts.fix_phi ? phi : phi + scale * step[0];
        const double cand_p =
            opts.fix_p ? p : std::clamp(p + scale * step[1], opts.p_lower, opts.p_upper);
        if (valid(beta, cand_phi, cand_p)) {
          phi = cand_phi;
          p = cand_p;
          break;
        }
      }
    }
  }

  res.beta = beta;
  res.phi = phi;
  res.p = p;

  const Workset w(beta, phi, p, data);
  Eigen::MatrixXd s_full, v_full;
  assemble_full(sensitivity_w(w, phi, p, data), variability_w(w, phi, data), s_full, v_full);
  std::vector<Eigen::Index> free;
  for (Eigen::Index j = 0; j < q; ++j) free.push_back(j);
  if (!opts.fix_phi) free.push_back(q);
  if (!opts.fix_p) free.push_back(q + 1);
  res.godambe_cov = sandwich(s_full, v_full, free);
  res.std_errors.resize(static_cast<std::size_t>(q) + 2);
  for (Eigen::Index j = 0; j < q + 2; ++j)
    res.std_errors[j] = std::sqrt(std::max(0.0, res.godambe_cov(j, j)));

  if (opts.compute_paic && res.converged && phi > 0.0) {
    const std::vector<double> means(w.m.data(), w.m.data() + w.m.size());
    const LoglikResult ll = pet_log_likelihood(data.y, means, phi, p, opts.loglik);
    res.loglik = ll.value;
    res.loglik_se = ll.std_error;
    res.paic = -2.0 * ll.value + 2.0 * (q + 2.0);
    res.paic_se = 2.0 * ll.std_error;
  }
  return res;
}

PaicResult paic(const FitResult& fit, const RegressionData& data, const LoglikOptions& opts) {
  if (!fit.converged) throw DomainError("pAIC: fit did not converge");
  if (!(fit.phi > 0.0))
    throw DomainError("pAIC: unavailable in the moment-only regime (phi <= 0)");
  const Eigen::VectorXd m = mean_vector(fit.beta, data.X);
  const std::vector<double> means(m.data(), m.data() + m.size());
  const LoglikResult ll = pet_log_likelihood(data.y, means, fit.phi, fit.p, opts);
  const double k = static_cast<double>(data.X.cols()) + 2.0;
  return {-2.0 * ll.value + 2.0 * k, 2.0 * ll.std_error, ll.value, ll.std_error};
}

GofResult chi_square_gof(std::span<const long long> observed, const PetParams& params,
                         std::size_t n_estimated, double min_expected,
                         const QuadratureOptions& opts) {
  if (observed.size() < 2) throw DomainError("gof: need at least two cells");
  long long total = 0;
  for (long long c : observed) {
    if (c < 0) throw DomainError("gof: negative frequency");
    total += c;
  }
  if (total <= 0) throw DomainError("gof: empty table");

  const long y_top = static_cast<long>(observed.size()) - 2;  // last cell is the open tail
  std::vector<double> probs;
  if (params.p == 1.0) {
    Rng rng = Rng::stream(0x9e3779b97f4a7c15ULL, "gof-zero-mass", 0);
    const std::vector<PmfEstimate> est = pmf_mc_table(params, y_top, 1000000, rng);
    probs.reserve(est.size());
    for (const PmfEstimate& e : est) probs.push_back(e.value);
  } else {
    probs = pmf_quadrature_table(params, y_top, opts);
  }

  std::vector<double> expected(observed.size());
  double head = 0.0;
  for (long y = 0; y <= y_top; ++y) {
    expected[y] = total * probs[y];
    head += probs[y];
  }
  expected.back() = total * std::max(0.0, 1.0 - head);

  std::vector<long long> obs(observed.begin(), observed.end());
  while (expected.size() > 1 && expected.back() < min_expected) {
    expected[expected.size() - 2] += expected.back();
    obs[obs.size() - 2] += obs.back();
    expected.pop_back();
    obs.pop_back();
  }

  const long df = static_cast<long>(expected.size()) - 1 - static_cast<long>(n_estimated);
  if (df <= 0) throw DomainError("gof: nonpositive degrees of freedom after pooling");

  double chi2 = 0.0;
  for (std::size_t i = 0; i < expected.size(); ++i) {
    if (expected[i] <= 0.0) {
      if (obs[i] > 0)
        throw DomainError("gof: zero expected count with observations present; raise pooling");
      continue;
    }
    const double d = obs[i] - expected[i];
    chi2 += d * d / expected[i];
  }

  const boost::math::chi_squared dist(static_cast<double>(df));
  const double pv = boost::math::cdf(boost::math::complement(dist, chi2));
  return {chi2, df, pv, std::move(expected), std::move(obs)};
}

}  // namespace petreg
