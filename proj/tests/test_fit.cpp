#include <doctest.h>

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "petreg/errors.hpp"
#include "petreg/fit.hpp"
#include "petreg/pet.hpp"
#include "petreg/rng.hpp"

using Eigen::MatrixXd;
using Eigen::Vector2d;
using Eigen::VectorXd;
using petreg::chaser_fit;
using petreg::FitOptions;
using petreg::PetParams;
using petreg::RegressionData;

namespace {

RegressionData duplicated_point() {
  // two copies of a single intercept-only observation y=3 with m=1
  MatrixXd X(2, 1);
  X << 1, 1;
  return RegressionData{{3, 3}, X, {"beta0"}};
}

RegressionData line_data(std::size_t n) {
  std::vector<long> y(n);
  MatrixXd X(n, 2);
  for (std::size_t i = 0; i < n; ++i) {
    X(i, 0) = 1.0;
    X(i, 1) = -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(n - 1);
    y[i] = static_cast<long>(i % 4);  // placeholder counts; scores only need y >= 0
  }
  return RegressionData{y, X, {"beta0", "beta1"}};
}

}  // namespace

TEST_CASE("regression data validation") {
  const std::vector<long> y = {1, 2};
  MatrixXd X(3, 1);
  X.setOnes();
  CHECK_THROWS_AS((RegressionData{y, X, {"beta0"}}), petreg::DomainError);

  MatrixXd X2(2, 2);
  X2.setOnes();
  CHECK_THROWS_AS((RegressionData{y, X2, {"a", "b"}}), petreg::DomainError);  // n <= q

  const std::vector<long> y4 = {1, 2, 0, 3};
  MatrixXd coll(4, 2);
  for (int i = 0; i < 4; ++i) {
    coll(i, 0) = i + 1.0;
    coll(i, 1) = 2.0 * (i + 1.0);
  }
  CHECK_THROWS_AS((RegressionData{y4, coll, {"a", "b"}}), petreg::RankError);

  const std::vector<long> yneg = {1, -2, 0, 3};
  MatrixXd ok(4, 1);
  ok.setOnes();
  CHECK_THROWS_AS((RegressionData{yneg, ok, {"a"}}), petreg::DomainError);
}

TEST_CASE("mean vector evaluates and clamps the link") {
  VectorXd beta(4);
  beta << 0.267, 0.105, 0.112, -0.102;
  MatrixXd X(1, 4);
  X << 1, 10, 5, 40;
  bool clamped = true;
  const VectorXd m = petreg::mean_vector(beta, X, &clamped);
  CHECK_FALSE(clamped);
  CHECK(m(0) == doctest::Approx(std::exp(-2.203)).epsilon(1e-12));
  CHECK(m(0) == doctest::Approx(0.1105).epsilon(1e-3));

  VectorXd wild(4);
  wild << 1e4, 0, 0, 0;
  const VectorXd mw = petreg::mean_vector(wild, X, &clamped);
  CHECK(clamped);
  CHECK(mw(0) == doctest::Approx(1e12));
}

TEST_CASE("score and information blocks on a hand-worked point") {
  // m=1, V = 1 + 1 + 1 = 3, y=3 duplicated
  const RegressionData data = duplicated_point();
  VectorXd beta(1);
  beta << 0.0;

  const VectorXd sb = petreg::quasi_score(beta, 1.0, 2.0, data);
  CHECK(sb(0) == doctest::Approx(4.0 / 3.0).epsilon(1e-12));

  const Vector2d sg = petreg::pearson_ef(beta, 1.0, 2.0, data);
  CHECK(sg(0) == doctest::Approx(2.0 / 9.0).epsilon(1e-12));
  CHECK(sg(1) == doctest::Approx(0.0).epsilon(1e-12));

  const auto s = petreg::sensitivity_matrices(beta, 1.0, 2.0, data);
  CHECK(s.s_beta(0, 0) == doctest::Approx(-2.0 / 3.0).epsilon(1e-12));
  CHECK(s.s_gamma(0, 0) == doctest::Approx(-2.0 / 9.0).epsilon(1e-12));
  CHECK(s.s_gamma(0, 1) == doctest::Approx(0.0));
  CHECK(s.s_gamma(1, 0) == doctest::Approx(0.0));
  CHECK(s.s_gamma(1, 1) == doctest::Approx(0.0));
  // dV/dbeta = (1 + 2m + p phi m^{p-1}) m x = 5, dV/dphi = m^p = 1
  CHECK(s.s_gamma_beta(0, 0) == doctest::Approx(-10.0 / 9.0).epsilon(1e-12));
  CHECK(s.s_gamma_beta(1, 0) == doctest::Approx(0.0));

  const auto v = petreg::variability_matrices(beta, 1.0, 2.0, data);
  CHECK(v.v_beta(0, 0) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(v.v_gamma(0, 0) == doctest::Approx(2.0 / 81.0).epsilon(1e-12));
  CHECK(v.v_gamma_beta(0, 0) == doctest::Approx(4.0 / 27.0).epsilon(1e-12));
}

TEST_CASE("sensitivity blocks equal finite differences of the mean scores") {
  const RegressionData data = line_data(20);
  VectorXd beta(2);
  beta << 0.3, -0.2;
  const double phi = 0.7, p = 1.8;
  const std::size_t q = 2;

  const VectorXd m_true = petreg::mean_vector(beta, data.X);
  const VectorXd v_true = petreg::variance_vector(m_true, phi, p);

  // score expectations under the true law as a function of trial parameters
  const auto expected_scores = [&](const VectorXd& bp, double php, double pp) {
    const VectorXd mp = petreg::mean_vector(bp, data.X);
    VectorXd out(q + 2);
    out.setZero();
    for (std::size_t i = 0; i < 20; ++i) {
      const double mi = mp(i);
      const double vi = mi + mi * mi + php * std::pow(mi, pp);
      const double resid = m_true(i) - mi;
      for (std::size_t j = 0; j < q; ++j)
        out(j) += data.X(i, j) * mi * resid / vi;
      const double w = v_true(i) + resid * resid - vi;
      out(q) += std::pow(mi, pp) / (vi * vi) * w;
      out(q + 1) += php * std::pow(mi, pp) * std::log(mi) / (vi * vi) * w;
    }
    return out;
  };

  MatrixXd jac(q + 2, q + 2);
  const double h = 1e-6;
  for (std::size_t k = 0; k < q + 2; ++k) {
    VectorXd bp = beta, bm = beta;
    double php = phi, phm = phi, pp = p, pm = p;
    if (k < q) {
      bp(k) += h;
      bm(k) -= h;
    } else if (k == q) {
      php += h;
      phm -= h;
    } else {
      pp += h;
      pm -= h;
    }
    jac.col(k) = (expected_scores(bp, php, pp) - expected_scores(bm, phm, pm)) / (2.0 * h);
  }

  const auto s = petreg::sensitivity_matrices(beta, phi, p, data);
  for (std::size_t j = 0; j < q; ++j)
    for (std::size_t k = 0; k < q; ++k)
      CHECK(s.s_beta(j, k) == doctest::Approx(jac(j, k)).epsilon(5e-6));
  // the beta scores have zero mean for every gamma, so that cross block vanishes
  for (std::size_t j = 0; j < q; ++j)
    for (std::size_t k = 0; k < 2; ++k)
      CHECK(std::fabs(jac(j, q + k)) < 1e-9);
  for (std::size_t j = 0; j < 2; ++j) {
    for (std::size_t k = 0; k < 2; ++k)
      CHECK(s.s_gamma(j, k) == doctest::Approx(jac(q + j, q + k)).epsilon(5e-6));
    for (std::size_t k = 0; k < q; ++k)
      CHECK(s.s_gamma_beta(j, k) == doctest::Approx(jac(q + j, k)).epsilon(5e-6));
  }
}

TEST_CASE("godambe covariance is the sandwich of the assembled blocks") {
  const RegressionData data = line_data(20);
  VectorXd beta(2);
  beta << 0.3, -0.2;
  const auto s = petreg::sensitivity_matrices(beta, 0.7, 1.8, data);
  const auto v = petreg::variability_matrices(beta, 0.7, 1.8, data);

  MatrixXd S(4, 4), V(4, 4);
  S.setZero();
  V.setZero();
  S.topLeftCorner(2, 2) = s.s_beta;
  S.bottomLeftCorner(2, 2) = s.s_gamma_beta;
  S.bottomRightCorner(2, 2) = s.s_gamma;
  V.topLeftCorner(2, 2) = v.v_beta;
  V.bottomLeftCorner(2, 2) = v.v_gamma_beta;
  V.topRightCorner(2, 2) = v.v_gamma_beta.transpose();
  V.bottomRightCorner(2, 2) = v.v_gamma;

  const MatrixXd direct = S.inverse() * V * S.inverse().transpose();
  const MatrixXd got = petreg::godambe_covariance(s, v);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      CHECK(got(i, j) == doctest::Approx(direct(i, j)).epsilon(1e-8));
  CHECK((got - got.transpose()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("intercept-only fit with frozen dispersion recovers log ybar") {
  const std::vector<long> y = {0, 1, 2, 3, 5, 1, 0, 2, 4, 2};  // mean 2
  MatrixXd X(10, 1);
  X.setOnes();
  const RegressionData data{y, X, {"beta0"}};

  FitOptions opts;
  opts.fix_p = true;
  opts.p_init = 2.0;
  opts.fix_phi = true;
  opts.phi_init = 1.0;
  const auto fit = chaser_fit(data, opts);
  CHECK(fit.converged);
  CHECK(fit.beta(0) == doctest::Approx(std::log(2.0)).epsilon(1e-8));
  CHECK(fit.phi == doctest::Approx(1.0));
  CHECK(fit.p == doctest::Approx(2.0));
  CHECK(fit.std_errors[0] > 0.0);
  // frozen coordinates carry no uncertainty
  CHECK(fit.std_errors[1] == 0.0);
  CHECK(fit.std_errors[2] == 0.0);
  CHECK(fit.godambe_cov.row(1).cwiseAbs().maxCoeff() == 0.0);
  CHECK_FALSE(fit.trace.empty());
}

TEST_CASE("intercept-only with free p is rejected with guidance") {
  const std::vector<long> y = {0, 1, 2, 3, 1, 2};
  MatrixXd X(6, 1);
  X.setOnes();
  const RegressionData data{y, X, {"beta0"}};
  bool threw = false;
  try {
    chaser_fit(data);
  } catch (const petreg::RankError& e) {
    threw = true;
    CHECK(std::string(e.what()).find("fix") != std::string::npos);
  }
  CHECK(threw);

  FitOptions opts;
  opts.fix_p = true;
  opts.p_init = 2.0;
  const auto fit = chaser_fit(data, opts);  // phi still free
  CHECK(fit.converged);
  CHECK(std::isfinite(fit.phi));
}

TEST_CASE("full fit recovers simulated truth and is deterministic") {
  const std::size_t n = 400;
  VectorXd beta(2);
  beta << 0.8, -0.6;
  MatrixXd X(n, 2);
  for (std::size_t i = 0; i < n; ++i) {
    X(i, 0) = 1.0;
    X(i, 1) = -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(n - 1);
  }
  const VectorXd means = petreg::mean_vector(beta, X);
  std::vector<double> mv(means.data(), means.data() + n);
  petreg::Rng rng(4441);
  const std::vector<long> draws = petreg::sample_pet_means(mv, 1.0, 1.5, rng);
  const RegressionData data{draws, X, {"beta0", "beta1"}};

  const auto fit = chaser_fit(data);
  CHECK(fit.converged);
  CHECK(std::fabs(fit.beta(0) - 0.8) < 0.2);
  CHECK(std::fabs(fit.beta(1) + 0.6) < 0.3);
  CHECK(fit.phi > 0.0);
  CHECK(fit.p >= 1.01);
  CHECK(fit.p <= 5.0);
  for (double se : fit.std_errors) {
    CHECK(std::isfinite(se));
    CHECK(se > 0.0);
  }

  const auto again = chaser_fit(data);
  CHECK(again.beta(0) == fit.beta(0));
  CHECK(again.phi == fit.phi);
  CHECK(again.p == fit.p);
  CHECK(again.iterations == fit.iterations);
}

TEST_CASE("iteration cap reports rather than throws") {
  const std::size_t n = 50;
  std::vector<long> y(n);
  MatrixXd X(n, 2);
  petreg::Rng rng(777);
  for (std::size_t i = 0; i < n; ++i) {
    X(i, 0) = 1.0;
    X(i, 1) = -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(n - 1);
    y[i] = rng.poisson(1.5);
  }
  const RegressionData data{y, X, {"beta0", "beta1"}};
  FitOptions opts;
  opts.max_iter = 1;
  opts.tol = 1e-16;
  const auto fit = chaser_fit(data, opts);
  CHECK_FALSE(fit.converged);
  CHECK(fit.iterations == 1);
  CHECK_FALSE(fit.paic.has_value());
  CHECK_THROWS_AS(petreg::paic(fit, data), petreg::DomainError);
}

TEST_CASE("pseudo-AIC literal and in-fit agreement") {
  const std::vector<long> y = {0, 1, 2, 3, 5, 1, 0, 2, 4, 2};
  MatrixXd X(10, 1);
  X.setOnes();
  const RegressionData data{y, X, {"beta0"}};
  FitOptions opts;
  opts.fix_p = true;
  opts.p_init = 2.0;
  opts.fix_phi = true;
  opts.phi_init = 1.0;
  opts.compute_paic = true;
  const auto fit = chaser_fit(data, opts);
  REQUIRE(fit.paic.has_value());
  REQUIRE(fit.loglik.has_value());

  const auto standalone = petreg::paic(fit, data);
  CHECK(standalone.value == doctest::Approx(*fit.paic).epsilon(1e-12));
  // -2 loglik + 2 (q + 2) with q = 1
  CHECK(*fit.paic == doctest::Approx(-2.0 * *fit.loglik + 6.0).epsilon(1e-12));

  const double direct =
      petreg::pet_log_likelihood(std::vector<long>{0, 1, 2, 3, 5, 1, 0, 2, 4, 2},
                                 PetParams(std::exp(fit.beta(0)), fit.phi, fit.p))
          .value;
  CHECK(*fit.loglik == doctest::Approx(direct).epsilon(1e-10));
}

TEST_CASE("chi-square gof reproduces the accident-table structure") {
  const std::vector<long long> counts = {103704, 14075, 1766, 255, 45, 6, 2, 0};
  const PetParams params(0.1551400466, 0.05, 1.95);
  const auto res = petreg::chi_square_gof(counts, params, 3);

  CHECK(res.df == 2);
  REQUIRE(res.observed.size() == 6);  // cells 0..4 plus pooled tail
  CHECK(res.observed[0] == 103704);
  CHECK(res.observed[5] == 8);
  const std::vector<double> expected = {103815.28, 13832.95, 1901.60, 261.48, 35.96, 5.73};
  for (std::size_t i = 0; i < 6; ++i)
    CHECK(res.expected[i] == doctest::Approx(expected[i]).epsilon(2e-3));
  CHECK(res.statistic > 17.0);
  CHECK(res.statistic < 17.8);
  CHECK(res.p_value < 1e-3);
  CHECK(res.p_value > 0.0);
}

TEST_CASE("gof degrees of freedom guard") {
  const std::vector<long long> tiny = {10, 5, 3};
  CHECK_THROWS_AS(petreg::chi_square_gof(tiny, PetParams(1.0, 1.0, 2.0), 3),
                  petreg::DomainError);
}

TEST_CASE("gof falls back to monte carlo cells at p=1 deterministically") {
  const std::vector<long long> counts = {50, 30, 20};
  const PetParams params(1.0, 0.5, 1.0);
  const auto a = petreg::chi_square_gof(counts, params, 0);
  const auto b = petreg::chi_square_gof(counts, params, 0);
  CHECK(std::isfinite(a.statistic));
  CHECK(a.statistic == b.statistic);
  CHECK(a.df == b.df);
}
