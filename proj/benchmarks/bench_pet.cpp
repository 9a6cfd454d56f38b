#include <benchmark/benchmark.h>

#include <vector>

#include "petreg/fit.hpp"
#include "petreg/pet.hpp"
#include "petreg/rng.hpp"
#include "petreg/study.hpp"
#include "petreg/tweedie.hpp"

using petreg::PetParams;
using petreg::Rng;

// p is passed scaled by 100 so fractional powers fit benchmark's integer args

static void BM_sample_tweedie(benchmark::State& state) {
  const petreg::TweedieParams params(1.0, 0.5, state.range(0) / 100.0);
  Rng rng(42);
  for (auto _ : state) {
    auto z = petreg::sample_tweedie(params, 1000, rng);
    benchmark::DoNotOptimize(z.data());
  }
  state.SetItemsProcessed(state.iterations() * 1000);
}
BENCHMARK(BM_sample_tweedie)->Arg(100)->Arg(150)->Arg(200)->Arg(250)->Arg(300);

static void BM_sample_pet(benchmark::State& state) {
  const PetParams params(1.0, 0.5, state.range(0) / 100.0);
  Rng rng(42);
  for (auto _ : state) {
    auto y = petreg::sample_pet(params, 1000, rng);
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(state.iterations() * 1000);
}
BENCHMARK(BM_sample_pet)->Arg(100)->Arg(150)->Arg(200)->Arg(250)->Arg(300);

static void BM_pmf_quadrature_table(benchmark::State& state) {
  const PetParams params(0.155, 0.05, 1.95);
  const long y_max = state.range(0);
  for (auto _ : state) {
    auto t = petreg::pmf_quadrature_table(params, y_max);
    benchmark::DoNotOptimize(t.data());
  }
}
BENCHMARK(BM_pmf_quadrature_table)->Arg(7)->Arg(40);

static void BM_pmf_mc_table(benchmark::State& state) {
  const PetParams params(0.155, 0.05, 1.95);
  Rng rng(42);
  for (auto _ : state) {
    auto t = petreg::pmf_mc_table(params, 7, state.range(0), rng);
    benchmark::DoNotOptimize(t.data());
  }
}
BENCHMARK(BM_pmf_mc_table)->Arg(10000)->Arg(100000);

static void BM_loglik_mc(benchmark::State& state) {
  const Eigen::MatrixXd X = petreg::generate_design(200);
  Eigen::VectorXd beta(3);
  beta << 0.8, -0.6, 0.3;
  const Eigen::VectorXd m = petreg::mean_vector(beta, X);
  Rng rng(7);
  const auto y =
      petreg::sample_pet_means({m.data(), static_cast<std::size_t>(m.size())}, 1.0, 1.5, rng);
  const petreg::RegressionData data(y, X, {"b0", "b1", "b2"});
  petreg::LoglikOptions opts;
  opts.method = petreg::LoglikOptions::Method::mc;
  opts.draws = state.range(0);
  opts.seed = 99;
  const Eigen::VectorXd mm = petreg::mean_vector(beta, X);
  for (auto _ : state) {
    auto ll = petreg::pet_log_likelihood(
        data.y, {mm.data(), static_cast<std::size_t>(mm.size())}, 1.0, 1.5, opts);
    benchmark::DoNotOptimize(ll.value);
  }
}
BENCHMARK(BM_loglik_mc)->Arg(10000)->Arg(50000);

static void BM_chaser_fit(benchmark::State& state) {
  const std::size_t n = state.range(0);
  const Eigen::MatrixXd X = petreg::generate_design(n);
  Eigen::VectorXd beta(3);
  beta << 1.0, -1.0, -0.9;
  const Eigen::VectorXd m = petreg::mean_vector(beta, X);
  Rng rng(11);
  const auto y =
      petreg::sample_pet_means({m.data(), static_cast<std::size_t>(m.size())}, 1.0, 1.5, rng);
  const petreg::RegressionData data(y, X, {"b0", "b1", "b2"});
  for (auto _ : state) {
    auto fit = petreg::chaser_fit(data);
    benchmark::DoNotOptimize(fit.beta.data());
  }
}
BENCHMARK(BM_chaser_fit)->Arg(500)->Arg(5000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
