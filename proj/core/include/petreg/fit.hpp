#ifndef PETREG_FIT_HPP
#define PETREG_FIT_HPP

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "petreg/pet.hpp"

namespace petreg {

// Count regression with log link: m_i = exp(x_i' beta) and working variance
// V_i = m_i + m_i^2 + phi m_i^p. beta solves the quasi-score equations; the
// dispersion pair gamma = (phi, p) solves Pearson-type moment equations.
// Throughout, gamma vectors and matrix blocks are ordered (phi, p), and the
// joint parameter is theta = (beta..., phi, p).

struct RegressionData {
  std::vector<long> y;
  Eigen::MatrixXd X;  // n x q, first column ones when an intercept is wanted
  std::vector<std::string> names;

  // checks n > q, full column rank, nonnegative responses
  RegressionData(std::vector<long> y, Eigen::MatrixXd X, std::vector<std::string> names);
};

// m_i = exp(x_i' beta), clamped to [1e-12, 1e12]; *clamped reports whether
// any entry hit the clamp
Eigen::VectorXd mean_vector(const Eigen::VectorXd& beta, const Eigen::MatrixXd& X,
                            bool* clamped = nullptr);
// V_i = m_i + m_i^2 + phi m_i^p; throws naming the first offending index and
// the phi lower bound when any entry is nonpositive
Eigen::VectorXd variance_vector(const Eigen::VectorXd& m, double phi, double p);

Eigen::VectorXd quasi_score(const Eigen::VectorXd& beta, double phi, double p,
                            const RegressionData& data);
// components ordered (phi, p)
Eigen::Vector2d pearson_ef(const Eigen::VectorXd& beta, double phi, double p,
                           const RegressionData& data);

struct SensitivityMatrices {
  Eigen::MatrixXd s_beta;        // q x q
  Eigen::Matrix2d s_gamma;       // (phi, p) x (phi, p)
  Eigen::MatrixXd s_gamma_beta;  // 2 x q; the beta-on-gamma cross block is zero
};
SensitivityMatrices sensitivity_matrices(const Eigen::VectorXd& beta, double phi, double p,
                                         const RegressionData& data);

struct VariabilityMatrices {
  Eigen::MatrixXd v_beta;        // q x q, equals -s_beta
  Eigen::Matrix2d v_gamma;       // empirical, per-observation product sums
  Eigen::MatrixXd v_gamma_beta;  // 2 x q, empirical
};
VariabilityMatrices variability_matrices(const Eigen::VectorXd& beta, double phi, double p,
                                         const RegressionData& data);

// sandwich S^{-1} V S^{-T} over theta = (beta, phi, p), assembled from the
// blocks above; throws on rank deficiency naming the offending block
Eigen::MatrixXd godambe_covariance(const SensitivityMatrices& s, const VariabilityMatrices& v);

struct FitOptions {
  double p_init = 1.5;
  std::optional<double> phi_init;  // default: moment estimator at p_init
  double alpha = 0.5;              // gamma step damping
  double tol = 1e-8;               // sup-norm on both scores
  std::size_t max_iter = 200;
  double p_lower = 1.01;
  double p_upper = 5.0;
  bool fix_p = false;    // freeze p at p_init
  bool fix_phi = false;  // freeze phi at its initial value
  bool compute_paic = false;
  LoglikOptions loglik = {};  // used only for the pseudo-AIC
};

struct TracePoint {
  Eigen::VectorXd beta;
  double phi;
  double p;
  double beta_score_norm;
  double gamma_score_norm;
};

struct FitResult {
  Eigen::VectorXd beta;
  double phi;
  double p;
  Eigen::MatrixXd godambe_cov;      // (q+2) x (q+2)
  std::vector<double> std_errors;   // sqrt of the diagonal
  std::size_t iterations;
  bool converged;
  std::vector<TracePoint> trace;
  std::optional<double> loglik;     // present when the pseudo-AIC was computed
  std::optional<double> loglik_se;
  std::optional<double> paic;
  std::optional<double> paic_se;
};

// Alternating updates: full Newton on beta, damped Newton on gamma, until both
// score sup-norms fall under tol. beta starts at the Poisson regression fit;
// phi at a moment estimator. Non-convergence is reported in the result, not
// thrown; an unidentified p (no covariate spread) throws with guidance.
FitResult chaser_fit(const RegressionData& data, const FitOptions& opts = {});

// pseudo-AIC -2 loglik + 2 (q+2) with the Monte Carlo error of the loglik;
// requires a converged fit with phi > 0
struct PaicResult {
  double value;
  double std_error;
  double loglik;
  double loglik_se;
};
PaicResult paic(const FitResult& fit, const RegressionData& data, const LoglikOptions& opts = {});

// chi-square comparison of an observed frequency table (last cell open-ended)
// against the law at params; tail cells pooled until every expected count
// reaches min_expected. df = cells - 1 - n_estimated.
struct GofResult {
  double statistic;
  long df;
  double p_value;
  std::vector<double> expected;      // pooled
  std::vector<long long> observed;   // pooled
};
GofResult chi_square_gof(std::span<const long long> observed, const PetParams& params,
                         std::size_t n_estimated, double min_expected = 5.0,
                         const QuadratureOptions& opts = {});

} // namespace petreg

#endif
