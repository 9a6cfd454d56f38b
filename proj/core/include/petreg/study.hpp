#ifndef PETREG_STUDY_HPP
#define PETREG_STUDY_HPP

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "petreg/fit.hpp"
#include "petreg/pet.hpp"

namespace petreg {

// Simulation study: for each (p, phi, n) scenario, repeatedly simulate counts
// with means exp(X beta), refit, and summarize bias and Wald coverage per
// parameter. Per-replicate streams derive from (seed, scenario index,
// replicate index), so results do not depend on evaluation order.
struct SimStudyDesign {
  std::vector<double> beta = {1.0, -1.0, -0.9};
  std::vector<double> p_values = {1.01, 1.5, 2.0, 3.0};
  std::vector<double> phi_values = {0.5, 1.0, 1.5};
  std::vector<std::size_t> sample_sizes = {500, 1000, 5000};
  std::size_t replicates = 200;  // 1000 for the full-scale run
  double nominal_coverage = 0.95;
  std::uint64_t seed = 1729;
  FitOptions fit = {};
};

// intercept plus two covariates, each running over the inclusive equally
// spaced grid from -1 to 1; the second walks the grid in a coprime stride
// near 0.618 n, which keeps the columns linearly independent while both stay
// sequences over the same range
Eigen::MatrixXd generate_design(std::size_t n);

struct ParameterSummary {
  std::string name;  // beta0..., phi, p
  double bias;
  double bias_se;
  double coverage;
};

struct ScenarioSummary {
  std::size_t scenario;  // 1-based position in the run
  double p;
  double phi;
  std::size_t n;
  std::vector<ParameterSummary> parameters;
  std::size_t excluded;    // non-converged or failed replicates
  std::size_t replicates;  // attempted
};

std::vector<ScenarioSummary> run_simulation_study(const SimStudyDesign& design);

// header scenario,p,phi,n,parameter,bias,coverage,excluded
void write_study_csv(std::ostream& os, std::span<const ScenarioSummary> results);
void write_study_json(std::ostream& os, std::span<const ScenarioSummary> results);

// grouped counts: counts[y] observations equal to y
struct FrequencyTable {
  std::vector<long long> counts;
  long long total;

  explicit FrequencyTable(std::vector<long long> counts);
  double mean() const;
};

// Grid-profile device for a frequency table: the mean is fixed at the table
// mean (the quasi-score root), and the Monte Carlo log-likelihood is scanned
// over a (p, phi) grid with an independent substream per grid point.
struct ProfilePoint {
  double p;
  double phi;
  double loglik;
  double std_error;
};

struct ProfileResult {
  double m_hat;
  double p_hat;
  double phi_hat;
  double loglik_max;
  double std_error_max;
  std::vector<ProfilePoint> surface;
};

ProfileResult fit_frequency_table_profile(const FrequencyTable& table,
                                          std::span<const double> p_grid,
                                          std::span<const double> phi_grid,
                                          std::size_t draws = 1000000,
                                          std::uint64_t seed = 1729);

// fitted cell counts total*pmf(y) for y = 0..y_max plus an open tail row,
// tail-merged until every cell reaches min_expected
std::vector<double> expected_frequencies(long long total, const PetParams& params, long y_max,
                                         double min_expected = 5.0,
                                         const QuadratureOptions& opts = {});

} // namespace petreg

#endif
