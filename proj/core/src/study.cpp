#include "petreg/study.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include <boost/math/distributions/normal.hpp>

#include "petreg/errors.hpp"

namespace petreg {
namespace {

void print_num(std::ostream& os, double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  os << buf;
}

}  // namespace

Eigen::MatrixXd generate_design(std::size_t n) {
  if (n < 2) throw DomainError("design: need at least 2 rows");
  Eigen::MatrixXd X(n, 3);
  std::size_t k = std::max<std::size_t>(1, static_cast<std::size_t>(0.618 * n));
  while (std::gcd(k, n) != 1) --k;  // terminates at k = 1
  for (std::size_t i = 0; i < n; ++i) {
    X(i, 0) = 1.0;
    X(i, 1) = -1.0 + 2.0 * i / (n - 1);
    const std::size_t j = (i * k) % n;
    X(i, 2) = -1.0 + 2.0 * j / (n - 1);
  }
  return X;
}

std::vector<ScenarioSummary> run_simulation_study(const SimStudyDesign& design) {
  if (design.beta.size() != 3)
    throw DomainError("study: the built-in design has an intercept and two covariates");
  if (design.replicates < 1) throw DomainError("study: need at least one replicate");
  if (!(design.nominal_coverage > 0.0 && design.nominal_coverage < 1.0))
    throw DomainError("study: nominal coverage must lie in (0,1)");

  const boost::math::normal norm;
  const double z = boost::math::quantile(norm, 0.5 + design.nominal_coverage / 2.0);
  const std::vector<std::string> names = {"beta0", "beta1", "beta2", "phi", "p"};

  std::vector<ScenarioSummary> out;
  std::size_t scenario_index = 0;
  for (double p : design.p_values)
    for (double phi : design.phi_values)
      for (std::size_t n : design.sample_sizes) {
        const Eigen::MatrixXd X = generate_design(n);
        Eigen::VectorXd beta(3);
        beta << design.beta[0], design.beta[1], design.beta[2];
        const Eigen::VectorXd m = mean_vector(beta, X);
        const std::vector<double> means(m.data(), m.data() + m.size());
        for (std::size_t i = 0; i < n; ++i)
          PetParams(means[i], phi, p);  // whole scenario must be samplable

        const double truth[5] = {design.beta[0], design.beta[1], design.beta[2], phi, p};
        double bias_sum[5] = {}, bias_ss[5] = {};
        std::size_t covered[5] = {};
        std::size_t excluded = 0;
        std::size_t done = 0;

        const std::uint64_t scen_key =
            Rng::derive(design.seed, "study-scenario", scenario_index);
        for (std::size_t rep = 0; rep < design.replicates; ++rep) {
          Rng rng(Rng::derive(scen_key, "study-replicate", rep));
          try {
            std::vector<long> y = sample_pet_means(means, phi, p, rng);
            const RegressionData data(std::move(y), X, {"x0", "x1", "x2"});
            const FitResult fit = chaser_fit(data, design.fit);
            if (!fit.converged) {
              ++excluded;
              continue;
            }
            const double est[5] = {fit.beta[0], fit.beta[1], fit.beta[2], fit.phi, fit.p};
            ++done;
            for (int j = 0; j < 5; ++j) {
              const double err = est[j] - truth[j];
              bias_sum[j] += err;
              bias_ss[j] += err * err;
              covered[j] += std::fabs(err) <= z * fit.std_errors[j];
            }
          } catch (const std::runtime_error&) {
            ++excluded;
          }
        }

        ScenarioSummary s;
        s.scenario = ++scenario_index;
        s.p = p;
        s.phi = phi;
        s.n = n;
        s.excluded = excluded;
        s.replicates = design.replicates;
        for (int j = 0; j < 5; ++j) {
          ParameterSummary ps;
          ps.name = names[j];
          if (done > 0) {
            ps.bias = bias_sum[j] / done;
            const double var =
                done > 1 ? (bias_ss[j] - bias_sum[j] * bias_sum[j] / done) / (done - 1) : 0.0;
            ps.bias_se = std::sqrt(std::max(0.0, var) / done);
            ps.coverage = static_cast<double>(covered[j]) / done;
          } else {
            ps.bias = ps.bias_se = ps.coverage = std::numeric_limits<double>::quiet_NaN();
          }
          s.parameters.push_back(std::move(ps));
        }
        out.push_back(std::move(s));
      }
  return out;
}

void write_study_csv(std::ostream& os, std::span<const ScenarioSummary> results) {
  os << "scenario,p,phi,n,parameter,bias,coverage,excluded\n";
  for (const ScenarioSummary& s : results)
    for (const ParameterSummary& ps : s.parameters) {
      os << s.scenario << ',';
      print_num(os, s.p);
      os << ',';
      print_num(os, s.phi);
      os << ',' << s.n << ',' << ps.name << ',';
      print_num(os, ps.bias);
      os << ',';
      print_num(os, ps.coverage);
      os << ',' << s.excluded << '\n';
    }
}

void write_study_json(std::ostream& os, std::span<const ScenarioSummary> results) {
  os << "[";
  for (std::size_t i = 0; i < results.size(); ++i) {
    const ScenarioSummary& s = results[i];
    os << (i ? ",{" : "{") << "\"scenario\":" << s.scenario << ",\"p\":";
    print_num(os, s.p);
    os << ",\"phi\":";
    print_num(os, s.phi);
    os << ",\"n\":" << s.n << ",\"replicates\":" << s.replicates
       << ",\"excluded\":" << s.excluded << ",\"parameters\":[";
    for (std::size_t j = 0; j < s.parameters.size(); ++j) {
      const ParameterSummary& ps = s.parameters[j];
      os << (j ? ",{" : "{") << "\"name\":\"" << ps.name << "\",\"bias\":";
      print_num(os, ps.bias);
      os << ",\"bias_se\":";
      print_num(os, ps.bias_se);
      os << ",\"coverage\":";
      print_num(os, ps.coverage);
      os << "}";
    }
    os << "]}";
  }
  os << "]\n";
}

FrequencyTable::FrequencyTable(std::vector<long long> counts_)
    : counts(std::move(counts_)), total(0) {
  if (counts.empty()) throw DomainError("frequency table: empty");
  for (long long c : counts) {
    if (c < 0) throw DomainError("frequency table: negative frequency");
    total += c;
  }
}

double FrequencyTable::mean() const {
  if (total == 0) throw DomainError("frequency table: mean undefined for an empty table");
  double acc = 0.0;
  for (std::size_t y = 0; y < counts.size(); ++y) acc += static_cast<double>(y) * counts[y];
  return acc / static_cast<double>(total);
}

ProfileResult fit_frequency_table_profile(const FrequencyTable& table,
                                          std::span<const double> p_grid,
                                          std::span<const double> phi_grid,
                                          std::size_t draws, std::uint64_t seed) {
  if (p_grid.empty() || phi_grid.empty())
    throw DomainError("profile: parameter grids must be non-empty");
  ProfileResult res;
  res.m_hat = table.mean();
  res.surface.reserve(p_grid.size() * phi_grid.size());
  std::size_t best = 0;
  std::uint64_t point = 0;
  for (double p : p_grid)
    for (double phi : phi_grid) {
      LoglikOptions lo;
      lo.method = LoglikOptions::Method::mc;
      lo.draws = draws;
      lo.seed = Rng::derive(seed, "profile-point", point++);
      const LoglikResult ll =
          pet_log_likelihood_table(table.counts, PetParams(res.m_hat, phi, p), lo);
      res.surface.push_back({p, phi, ll.value, ll.std_error});
      if (ll.value > res.surface[best].loglik) best = res.surface.size() - 1;
    }
  res.p_hat = res.surface[best].p;
  res.phi_hat = res.surface[best].phi;
  res.loglik_max = res.surface[best].loglik;
  res.std_error_max = res.surface[best].std_error;
  return res;
}

std::vector<double> expected_frequencies(long long total, const PetParams& params, long y_max,
                                         double min_expected, const QuadratureOptions& opts) {
  if (total < 0) throw DomainError("expected frequencies: negative total");
  if (y_max < 0) throw DomainError("expected frequencies: y_max must be nonnegative");
  if (total == 0) return std::vector<double>(static_cast<std::size_t>(y_max) + 2, 0.0);

  const std::vector<double> probs = pmf_quadrature_table(params, y_max, opts);
  std::vector<double> expected(static_cast<std::size_t>(y_max) + 2);
  double head = 0.0;
  for (long y = 0; y <= y_max; ++y) {
    expected[y] = total * probs[y];
    head += probs[y];
  }
  expected.back() = total * std::max(0.0, 1.0 - head);
  while (expected.size() > 1 && expected.back() < min_expected) {
    expected[expected.size() - 2] += expected.back();
    expected.pop_back();
  }
  return expected;
}

}  // namespace petreg
