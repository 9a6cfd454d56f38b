#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <random>
#include <vector>

#include "petreg/errors.hpp"
#include "petreg/pet.hpp"
#include "petreg/rng.hpp"

using petreg::LoglikOptions;
using petreg::PetParams;
using petreg::pmf_quadrature;
using petreg::pmf_quadrature_table;
using petreg::QuadratureOptions;
using petreg::Rng;

TEST_CASE("parameter domain") {
  CHECK_THROWS_AS(PetParams(0.0, 1.0, 2.0), petreg::DomainError);
  CHECK_THROWS_AS(PetParams(1.0, 1.0, 0.9), petreg::DomainError);
  // variance m + m^2 + phi m^p must stay positive: at m=1, p=1.5 the floor is -2
  CHECK_THROWS_AS(PetParams(1.0, -2.0, 1.5), petreg::DomainError);
  CHECK_NOTHROW(PetParams(1.0, -1.9, 1.5));

  CHECK(petreg::pet_mean(PetParams(0.7, 0.3, 2.2)) == doctest::Approx(0.7));
  CHECK(petreg::pet_variance(PetParams(1.0, -1.9, 1.5)) == doctest::Approx(0.1).epsilon(1e-12));
  // Swiss working values: 0.155 + 0.155^2 + 0.05 * 0.155^1.95
  CHECK(petreg::pet_variance(PetParams(0.155, 0.05, 1.95)) ==
        doctest::Approx(0.18034361).epsilon(1e-7));
}

TEST_CASE("closed-form law at p=1.5, m=1, phi=1 is geometric after zero") {
  // p(0)=3/5, p(y)=0.16*0.6^(y-1) for y>=1
  const PetParams params(1.0, 1.0, 1.5);
  const auto tab = pmf_quadrature_table(params, 12);
  CHECK(tab[0] == doctest::Approx(0.6).epsilon(1e-10));
  for (int y = 1; y <= 12; ++y)
    CHECK(tab[y] == doctest::Approx(0.16 * std::pow(0.6, y - 1)).epsilon(1e-9));
  for (int y = 1; y <= 11; ++y)
    CHECK(petreg::ht_index(params, y) == doctest::Approx(0.6).epsilon(1e-9));
}

TEST_CASE("quadrature pmf against high-precision references") {
  struct Case {
    double m, phi, p;
    std::vector<double> pmf;
  };
  // 50-digit arithmetic references for the mixed law
  const std::vector<Case> cases = {
      {1.0, 1.0, 2.0,
       {5.906161091496412e-01, 1.744136941935305e-01, 9.510919227188179e-02,
        5.549742723899431e-02, 3.315304024452582e-02, 2.001783813100990e-02,
        1.215468544978533e-02, 7.403905081418753e-03, 4.518783230264438e-03,
        2.761318266294313e-03, 1.688733432181670e-03}},
      {1.0, 1.0, 2.5,
       {5.832884533618778e-01, 1.847027746374339e-01, 9.542810900495682e-02,
        5.422907374739762e-02, 3.204023978019739e-02, 1.932158262874491e-02,
        1.179570774841595e-02, 7.259211964273681e-03, 4.492279034769561e-03,
        2.791168938357609e-03, 1.739425178746666e-03}},
      {1.0, 1.0, 3.0,
       {5.773502691896257e-01, 1.924500897298753e-01, 9.622504486493763e-02,
        5.345835825829868e-02, 3.118404231734090e-02, 1.871042539040454e-02,
        1.143414884969166e-02, 7.078282621237696e-03, 4.423926638273560e-03,
        2.785435290764834e-03, 1.764109017484395e-03}},
      {5.0, 0.05, 2.5,
       {1.989671650095381e-01, 1.318923858079384e-01, 1.074809261287161e-01,
        8.961995020722573e-02, 7.515209358243669e-02, 6.313413492963080e-02,
        5.307306075630745e-02, 4.462696117217662e-02, 3.752906440190236e-02,
        3.156157307562615e-02, 2.654353039074585e-02, 2.232353163958498e-02,
        1.877452934652798e-02}},
      {0.1551400, 0.05, 2.5,
       {8.658731336180945e-01, 1.159600628270279e-01, 1.570602300327140e-02,
        2.127455633043650e-03, 2.881744055959429e-04, 3.903465210873853e-05,
        5.287437179493439e-06}},
      {0.1551400, 0.05, 1.95,
       {8.661884641656254e-01, 1.154159062592560e-01, 1.586608570111285e-02,
        2.181709213330578e-03, 3.000043051955350e-04, 4.125325667786422e-05,
        5.672689285347512e-06, 7.800451730890253e-07}},
  };
  for (const auto& c : cases) {
    const PetParams params(c.m, c.phi, c.p);
    const auto tab = pmf_quadrature_table(params, static_cast<long>(c.pmf.size()) - 1);
    for (std::size_t y = 0; y < c.pmf.size(); ++y) {
      INFO("p=", c.p, " m=", c.m, " y=", y);
      CHECK(tab[y] == doctest::Approx(c.pmf[y]).epsilon(1e-6));
    }
  }
}

TEST_CASE("self-check report") {
  const auto r = petreg::pmf_quadrature_checked(PetParams(1.0, 1.0, 2.0), 3);
  CHECK(r.converged);
  CHECK(r.check_delta <= 1e-8);
  CHECK(r.value == doctest::Approx(5.549742723899431e-02).epsilon(1e-8));
  const auto plain = petreg::pmf_quadrature_checked(
      PetParams(1.0, 1.0, 2.0), 3, QuadratureOptions{64, 128, false});
  CHECK(plain.check_delta == 0.0);
  CHECK(plain.converged);
}

TEST_CASE("deep tail ratios approach the dominant-eigenvalue limits") {
  // limits: p=2 -> 1/(2 - exp(-1)); p=3 computed from the tilted-stable law
  CHECK(petreg::ht_index(PetParams(1.0, 1.0, 2.0), 50) ==
        doctest::Approx(0.612699811).epsilon(1e-7));
  QuadratureOptions wide;
  wide.outer_nodes = 128;
  CHECK(petreg::ht_index(PetParams(1.0, 1.0, 3.0), 100, wide) ==
        doctest::Approx(0.663366337).epsilon(1e-6));
  CHECK(pmf_quadrature(PetParams(1.0, 1.0, 3.0), 100, wide) ==
        doctest::Approx(8.001947e-20).epsilon(1e-5));
}

TEST_CASE("support upper bound captures the requested mass") {
  const PetParams params(1.0, 1.0, 2.0);
  const long u = petreg::support_upper(params, 1e-6);
  const auto tab = pmf_quadrature_table(params, u);
  const double head = std::accumulate(tab.begin(), tab.end(), 0.0);
  CHECK(head >= 1.0 - 1e-6);
  if (u > 0) {
    const auto tab2 = pmf_quadrature_table(params, u - 1);
    CHECK(std::accumulate(tab2.begin(), tab2.end(), 0.0) < 1.0 - 1e-6);
  }
}

TEST_CASE("monte carlo pmf agrees with quadrature") {
  const PetParams params(1.0, 1.0, 2.0);
  Rng rng(211);
  const auto mc = petreg::pmf_mc_table(params, 6, 200000, rng);
  const std::vector<double> exact = {5.906161091496412e-01, 1.744136941935305e-01,
                                     9.510919227188179e-02, 5.549742723899431e-02,
                                     3.315304024452582e-02, 2.001783813100990e-02,
                                     1.215468544978533e-02};
  for (int y = 0; y <= 6; ++y) {
    CHECK(mc[y].std_error > 0.0);
    CHECK(std::fabs(mc[y].value - exact[y]) < 4.0 * mc[y].std_error);
  }

  // p > 2 runs the tilted-stable mixture path; cross-check it against the
  // quadrature evaluation, which never touches the sampler
  const PetParams steep(0.5, 0.8, 2.5);
  Rng rng2(212);
  const auto mc2 = petreg::pmf_mc_table(steep, 6, 200000, rng2);
  const auto quad = pmf_quadrature_table(steep, 6);
  for (int y = 0; y <= 6; ++y) {
    INFO("y=", y);
    CHECK(std::fabs(mc2[y].value - quad[y]) < 4.0 * mc2[y].std_error);
  }
}

TEST_CASE("p=1 is served by the Monte Carlo path only") {
  const PetParams params(1.0, 0.5, 1.0);
  CHECK_THROWS_AS(pmf_quadrature(params, 0), petreg::DomainError);
  Rng rng(223);
  const auto mc = petreg::pmf_mc_table(params, 40, 200000, rng);
  double total = 0.0, mean = 0.0;
  for (std::size_t y = 0; y < mc.size(); ++y) {
    total += mc[y].value;
    mean += static_cast<double>(y) * mc[y].value;
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(mean == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("monte carlo pmf precondition") {
  Rng rng(1);
  CHECK_THROWS_AS(petreg::pmf_mc(PetParams(1.0, 1.0, 2.0), 0, 9999, rng),
                  petreg::DomainError);
  CHECK_THROWS_AS(pmf_quadrature(PetParams(1.0, 1.0, 2.0), -1), petreg::DomainError);
}

TEST_CASE("sampler moments match the stated mean and variance") {
  Rng rng(227);
  for (const double p : {1.0, 1.5, 2.0, 2.5, 3.0}) {
    for (const double m : {0.5, 2.0}) {
      const double phi = 0.8;
      const PetParams params(m, phi, p);
      const auto y = petreg::sample_pet(params, 200000, rng);
      double mean = 0.0;
      for (long v : y) mean += static_cast<double>(v);
      mean /= static_cast<double>(y.size());
      double var = 0.0;
      for (long v : y) var += (v - mean) * (v - mean);
      var /= static_cast<double>(y.size() - 1);
      const double tv = petreg::pet_variance(params);
      INFO("p=", p, " m=", m);
      CHECK(std::fabs(mean - m) < 5.0 * std::sqrt(tv / 200000.0));
      CHECK(std::fabs(var - tv) < 0.08 * tv);
    }
  }
}

TEST_CASE("regression sampler shares the dispersion across means") {
  Rng rng(229);
  const std::vector<double> means = {0.5, 0.5, 2.0, 2.0};
  const auto y = petreg::sample_pet_means(means, 0.8, 2.0, rng);
  CHECK(y.size() == 4);
  for (long v : y) CHECK(v >= 0);
}

TEST_CASE("log likelihood: quadrature equals the summed logs") {
  const PetParams params(1.0, 1.0, 2.0);
  const std::vector<long> y = {0, 0, 1, 3, 5, 2, 0, 1};
  const auto ll = petreg::pet_log_likelihood(y, params);
  double direct = 0.0;
  for (long v : y) direct += std::log(pmf_quadrature(params, v));
  CHECK(ll.value == doctest::Approx(direct).epsilon(1e-10));
  CHECK(ll.std_error == 0.0);
}

TEST_CASE("log likelihood: table and raw forms agree") {
  const PetParams params(0.5, 0.5, 1.8);
  const std::vector<long long> counts = {3, 2, 0, 1};
  const std::vector<long> raw = {0, 0, 0, 1, 1, 3};
  const auto a = petreg::pet_log_likelihood_table(counts, params);
  const auto b = petreg::pet_log_likelihood(raw, params);
  CHECK(a.value == doctest::Approx(b.value).epsilon(1e-12));

  const std::vector<long long> none = {};
  const auto z = petreg::pet_log_likelihood_table(none, params);
  CHECK(z.value == 0.0);
  CHECK(z.std_error == 0.0);
}

TEST_CASE("log likelihood: monte carlo estimate brackets the quadrature value") {
  const PetParams params(1.0, 1.0, 2.0);
  const std::vector<long> y = {0, 0, 1, 3, 5, 2, 0, 1};
  const double exact = petreg::pet_log_likelihood(y, params).value;
  LoglikOptions opts;
  opts.method = LoglikOptions::Method::mc;
  opts.draws = 200000;
  opts.seed = 991;
  const auto ll = petreg::pet_log_likelihood(y, params, opts);
  CHECK(ll.std_error > 0.0);
  CHECK(std::fabs(ll.value - exact) < 4.0 * ll.std_error);
}

TEST_CASE("regression likelihood is invariant to observation order") {
  LoglikOptions opts;
  opts.method = LoglikOptions::Method::mc;
  opts.draws = 20000;
  opts.seed = 424242;
  std::vector<long> y = {0, 2, 1, 0, 4, 1, 0, 3};
  std::vector<double> means = {0.5, 2.0, 0.5, 2.0, 2.0, 0.5, 0.5, 2.0};
  const auto base = petreg::pet_log_likelihood(y, means, 1.0, 2.0, opts);

  std::vector<std::size_t> idx(y.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937 shuf(5);
  std::shuffle(idx.begin(), idx.end(), shuf);
  std::vector<long> y2(y.size());
  std::vector<double> means2(y.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    y2[i] = y[idx[i]];
    means2[i] = means[idx[i]];
  }
  const auto perm = petreg::pet_log_likelihood(y2, means2, 1.0, 2.0, opts);
  CHECK(base.value == doctest::Approx(perm.value).epsilon(1e-13));
  CHECK(base.std_error == doctest::Approx(perm.std_error).epsilon(1e-13));

  const std::vector<long> e = {};
  const std::vector<double> em = {};
  const auto z = petreg::pet_log_likelihood(e, em, 1.0, 2.0, opts);
  CHECK(z.value == 0.0);
}
