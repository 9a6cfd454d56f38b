// petreg: count regression with a mixed Poisson law whose variance is
// m + m^2 + phi m^p. Subcommands cover fitting, simulation, pmf tables,
// dispersion/zero-inflation indexes, frequency-table goodness of fit,
// coverage studies, and index curves.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "petreg/errors.hpp"
#include "petreg/fit.hpp"
#include "petreg/indexes.hpp"
#include "petreg/io.hpp"
#include "petreg/pet.hpp"
#include "petreg/rng.hpp"
#include "petreg/study.hpp"

#ifndef PETREG_VERSION
#define PETREG_VERSION "0.0.0"
#endif

namespace {

using petreg::json_number;

// run fn against the chosen sink; "" means stdout
template <typename Fn>
void with_output(const std::string& path, Fn&& fn) {
  if (path.empty()) {
    fn(std::cout);
    std::cout.flush();
    return;
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open output file '" + path + "'");
  fn(out);
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

petreg::CsvTable read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  return petreg::read_csv(in);
}

void json_opt(std::ostream& os, const std::optional<double>& v) {
  if (v)
    json_number(os, *v);
  else
    os << "null";
}

void write_indexes_json(std::ostream& os, const petreg::IndexReport& rep,
                        const std::optional<petreg::G0TestResult>& test) {
  os << "{\"p_di\":";
  json_number(os, rep.p_di);
  os << ",\"g0_di\":";
  json_number(os, rep.g0_di);
  os << ",\"p_zi\":";
  json_opt(os, rep.p_zi);
  os << ",\"g0_zi\":";
  json_opt(os, rep.g0_zi);
  os << ",\"source\":\""
     << (rep.source == petreg::IndexReport::Source::empirical ? "empirical" : "theoretical")
     << "\",\"n\":" << rep.n << ",\"zero_fraction\":";
  json_opt(os, rep.zero_fraction);
  if (test) {
    os << ",\"test\":{\"statistic\":";
    json_number(os, test->statistic);
    os << ",\"p_value\":";
    json_number(os, test->p_value);
    os << ",\"replicates\":" << test->replicates << "}";
  }
  os << "}\n";
}

struct FitArgs {
  std::string data;
  std::string response = "y";
  std::vector<std::string> covariates;
  bool no_intercept = false;
  double p_init = 1.5;
  double phi_init = 0.0;
  double fix_p = 0.0;
  double fix_phi = 0.0;
  double alpha = 0.5;
  double tol = 1e-8;
  std::size_t max_iter = 200;
  double p_lower = 1.01;
  double p_upper = 5.0;
  bool no_paic = false;
  std::string method = "quad";
  std::size_t draws = 1000000;
  std::size_t outer_nodes = 64;
  std::uint64_t seed = 1729;
  std::string format = "json";
  std::string output;
  bool no_timestamp = false;
};

int run_fit(const FitArgs& a, bool have_phi_init, bool have_fix_p, bool have_fix_phi) {
  const petreg::CsvTable table = read_csv_file(a.data);
  const petreg::RegressionData data =
      petreg::regression_from_csv(table, a.response, a.covariates, !a.no_intercept);

  petreg::FitOptions opts;
  opts.p_init = have_fix_p ? a.fix_p : a.p_init;
  opts.fix_p = have_fix_p;
  if (have_fix_phi) {
    opts.phi_init = a.fix_phi;
    opts.fix_phi = true;
  } else if (have_phi_init) {
    opts.phi_init = a.phi_init;
  }
  opts.alpha = a.alpha;
  opts.tol = a.tol;
  opts.max_iter = a.max_iter;
  opts.p_lower = a.p_lower;
  opts.p_upper = a.p_upper;
  opts.compute_paic = !a.no_paic;
  opts.loglik.quad.outer_nodes = a.outer_nodes;
  if (a.method == "mc") {
    opts.loglik.method = petreg::LoglikOptions::Method::mc;
    opts.loglik.draws = a.draws;
    opts.loglik.seed = petreg::Rng::derive(a.seed, "fit-loglik", 0);
  }

  const petreg::FitResult fit = petreg::chaser_fit(data, opts);

  with_output(a.output, [&](std::ostream& os) {
    if (a.format == "csv") {
      petreg::write_fit_report_csv(os, fit, data.names);
    } else {
      petreg::ReportOptions ropts;
      ropts.seed = a.seed;
      ropts.version = PETREG_VERSION;
      ropts.timestamp = !a.no_timestamp;
      petreg::write_fit_report_json(os, fit, data.names, ropts);
    }
  });
  if (!fit.converged) {
    std::cerr << "warning: stopped after " << fit.iterations
              << " iterations without meeting the score tolerance\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"count regression with variance m + m^2 + phi m^p"};
  app.set_version_flag("--version", PETREG_VERSION);
  app.require_subcommand(1);

  // --- fit ---
  FitArgs fa;
  CLI::App* fit_cmd = app.add_subcommand("fit", "fit the regression to CSV data");
  fit_cmd->add_option("--data", fa.data, "CSV file with a header row")
      ->required()
      ->check(CLI::ExistingFile);
  fit_cmd->add_option("--response", fa.response, "count column (default y)");
  fit_cmd->add_option("--covariates", fa.covariates, "comma-separated covariate columns")
      ->delimiter(',');
  fit_cmd->add_flag("--no-intercept", fa.no_intercept, "drop the intercept column");
  fit_cmd->add_option("--p-init", fa.p_init, "starting power (default 1.5)");
  CLI::Option* phi_init_opt =
      fit_cmd->add_option("--phi-init", fa.phi_init, "starting dispersion (default: moments)");
  CLI::Option* fix_p_opt = fit_cmd->add_option("--fix-p", fa.fix_p, "freeze the power at a value");
  CLI::Option* fix_phi_opt =
      fit_cmd->add_option("--fix-phi", fa.fix_phi, "freeze the dispersion at a value");
  fit_cmd->add_option("--alpha", fa.alpha, "dispersion step damping (default 0.5)");
  fit_cmd->add_option("--tol", fa.tol, "score sup-norm tolerance (default 1e-8)");
  fit_cmd->add_option("--max-iter", fa.max_iter, "iteration cap (default 200)");
  fit_cmd->add_option("--p-lower", fa.p_lower, "lower clamp for the power (default 1.01)");
  fit_cmd->add_option("--p-upper", fa.p_upper, "upper clamp for the power (default 5)");
  fit_cmd->add_flag("--no-paic", fa.no_paic, "skip the pseudo-AIC");
  fit_cmd->add_option("--method", fa.method, "likelihood method for the pseudo-AIC")
      ->check(CLI::IsMember({"quad", "mc"}));
  fit_cmd->add_option("--draws", fa.draws, "Monte Carlo draws (default 1e6)");
  fit_cmd->add_option("--outer-nodes", fa.outer_nodes, "quadrature nodes (default 64)");
  fit_cmd->add_option("--seed", fa.seed, "master seed (default 1729)");
  fit_cmd->add_option("--format", fa.format, "json or csv")
      ->check(CLI::IsMember({"json", "csv"}));
  fit_cmd->add_option("-o,--output", fa.output, "output file (default stdout)");
  fit_cmd->add_flag("--no-timestamp", fa.no_timestamp, "omit the timestamp field");

  // --- simulate ---
  double sm_m = 0.0, sm_phi = 0.0, sm_p = 0.0;
  std::size_t sm_n = 1000;
  std::uint64_t sm_seed = 1729;
  std::string sm_output;
  CLI::App* sim_cmd = app.add_subcommand("simulate", "draw counts from the law");
  sim_cmd->add_option("--m", sm_m, "mean")->required();
  sim_cmd->add_option("--phi", sm_phi, "dispersion")->required();
  sim_cmd->add_option("--p", sm_p, "power")->required();
  sim_cmd->add_option("--n", sm_n, "number of draws (default 1000)");
  sim_cmd->add_option("--seed", sm_seed, "seed (default 1729)");
  sim_cmd->add_option("-o,--output", sm_output, "output file (default stdout)");

  // --- pmf ---
  double pm_m = 0.0, pm_phi = 0.0, pm_p = 0.0;
  long pm_ymax = 20;
  std::string pm_method = "quad";
  std::size_t pm_draws = 1000000;
  std::size_t pm_outer = 64;
  std::uint64_t pm_seed = 1729;
  std::string pm_output;
  CLI::App* pmf_cmd = app.add_subcommand("pmf", "tabulate the probability mass function");
  pmf_cmd->add_option("--m", pm_m, "mean")->required();
  pmf_cmd->add_option("--phi", pm_phi, "dispersion")->required();
  pmf_cmd->add_option("--p", pm_p, "power")->required();
  pmf_cmd->add_option("--y-max", pm_ymax, "largest count (default 20)");
  pmf_cmd->add_option("--method", pm_method, "quad or mc")
      ->check(CLI::IsMember({"quad", "mc"}));
  pmf_cmd->add_option("--draws", pm_draws, "Monte Carlo draws (default 1e6)");
  pmf_cmd->add_option("--outer-nodes", pm_outer, "quadrature nodes (default 64)");
  pmf_cmd->add_option("--seed", pm_seed, "seed (default 1729)");
  pmf_cmd->add_option("-o,--output", pm_output, "output file (default stdout)");

  // --- indexes ---
  std::string ix_data;
  std::string ix_response = "y";
  bool ix_test = false;
  std::size_t ix_reps = 999;
  std::uint64_t ix_seed = 1729;
  bool ix_summary = false;
  double ix_mean = 0.0, ix_variance = 0.0, ix_zero_fraction = 0.0;
  bool ix_theoretical = false;
  double ix_m = 0.0, ix_phi = 0.0, ix_p = 0.0;
  std::size_t ix_outer = 64;
  std::string ix_output;
  CLI::App* ix_cmd = app.add_subcommand("indexes", "dispersion and zero-inflation indexes");
  CLI::Option* ix_data_opt =
      ix_cmd->add_option("--data", ix_data, "CSV file of raw counts")->check(CLI::ExistingFile);
  ix_cmd->add_option("--response", ix_response, "count column (default y)");
  ix_cmd->add_flag("--test", ix_test, "bootstrap test of geometric dispersion");
  ix_cmd->add_option("--reps", ix_reps, "bootstrap replicates (default 999)");
  ix_cmd->add_option("--seed", ix_seed, "seed (default 1729)");
  CLI::Option* ix_summary_opt =
      ix_cmd->add_flag("--summary", ix_summary, "compute from summary statistics");
  ix_cmd->add_option("--mean", ix_mean, "sample mean (summary mode)");
  ix_cmd->add_option("--variance", ix_variance, "sample variance (summary mode)");
  CLI::Option* ix_zf_opt =
      ix_cmd->add_option("--zero-fraction", ix_zero_fraction, "observed share of zeros");
  CLI::Option* ix_theo_opt =
      ix_cmd->add_flag("--theoretical", ix_theoretical, "compute from model parameters");
  ix_cmd->add_option("--m", ix_m, "mean (theoretical mode)");
  ix_cmd->add_option("--phi", ix_phi, "dispersion (theoretical mode)");
  ix_cmd->add_option("--p", ix_p, "power (theoretical mode)");
  ix_cmd->add_option("--outer-nodes", ix_outer, "quadrature nodes (default 64)");
  ix_cmd->add_option("-o,--output", ix_output, "output file (default stdout)");
  ix_summary_opt->excludes(ix_theo_opt)->excludes(ix_data_opt);
  ix_theo_opt->excludes(ix_data_opt);

  // --- gof ---
  std::string gf_freq;
  double gf_m = 0.0, gf_phi = 0.0, gf_p = 0.0;
  std::size_t gf_nest = 3;
  double gf_pool = 5.0;
  std::size_t gf_outer = 64;
  std::string gf_output;
  CLI::App* gof_cmd = app.add_subcommand("gof", "chi-square fit of a frequency table");
  gof_cmd->add_option("--freq", gf_freq, "CSV with columns y,count")
      ->required()
      ->check(CLI::ExistingFile);
  gof_cmd->add_option("--m", gf_m, "mean")->required();
  gof_cmd->add_option("--phi", gf_phi, "dispersion")->required();
  gof_cmd->add_option("--p", gf_p, "power")->required();
  gof_cmd->add_option("--n-estimated", gf_nest, "parameters estimated from the data (default 3)");
  gof_cmd->add_option("--pooling", gf_pool, "minimum expected count per cell (default 5)");
  gof_cmd->add_option("--outer-nodes", gf_outer, "quadrature nodes (default 64)");
  gof_cmd->add_option("-o,--output", gf_output, "output file (default stdout)");

  // --- simstudy ---
  std::string st_config;
  std::size_t st_replicates = 0;
  std::uint64_t st_seed = 0;
  std::string st_output;
  std::string st_json;
  CLI::App* study_cmd = app.add_subcommand("simstudy", "bias and coverage study");
  study_cmd->add_option("--config", st_config, "JSON design file")->check(CLI::ExistingFile);
  CLI::Option* st_reps_opt =
      study_cmd->add_option("--replicates", st_replicates, "override replicate count");
  CLI::Option* st_seed_opt = study_cmd->add_option("--seed", st_seed, "override the seed");
  study_cmd->add_option("-o,--output", st_output, "CSV output file (default stdout)");
  study_cmd->add_option("--json", st_json, "also write a JSON summary here");

  // --- curves ---
  double cv_p = 0.0, cv_phi = 0.0;
  double cv_from = 0.1, cv_to = 10.0;
  std::size_t cv_points = 50;
  std::string cv_output;
  CLI::App* curves_cmd = app.add_subcommand("curves", "index curves over a mean grid");
  curves_cmd->add_option("--p", cv_p, "power")->required();
  curves_cmd->add_option("--phi", cv_phi, "dispersion")->required();
  curves_cmd->add_option("--m-from", cv_from, "grid start (default 0.1)");
  curves_cmd->add_option("--m-to", cv_to, "grid end (default 10)");
  curves_cmd->add_option("--points", cv_points, "grid size (default 50)");
  curves_cmd->add_option("-o,--output", cv_output, "output file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*fit_cmd) {
      return run_fit(fa, phi_init_opt->count() > 0, fix_p_opt->count() > 0,
                     fix_phi_opt->count() > 0);
    }

    if (*sim_cmd) {
      const petreg::PetParams params(sm_m, sm_phi, sm_p);
      petreg::Rng rng(sm_seed);
      const std::vector<long> y = petreg::sample_pet(params, sm_n, rng);
      with_output(sm_output, [&](std::ostream& os) {
        os << "y\n";
        for (long v : y) os << v << '\n';
      });
      return 0;
    }

    if (*pmf_cmd) {
      const petreg::PetParams params(pm_m, pm_phi, pm_p);
      with_output(pm_output, [&](std::ostream& os) {
        if (pm_method == "mc") {
          petreg::Rng rng(pm_seed);
          const std::vector<petreg::PmfEstimate> table =
              petreg::pmf_mc_table(params, pm_ymax, pm_draws, rng);
          os << "y,pmf,std_error\n";
          for (std::size_t y = 0; y < table.size(); ++y) {
            os << y << ',';
            json_number(os, table[y].value);
            os << ',';
            json_number(os, table[y].std_error);
            os << '\n';
          }
        } else {
          petreg::QuadratureOptions qopts;
          qopts.outer_nodes = pm_outer;
          const std::vector<double> table = petreg::pmf_quadrature_table(params, pm_ymax, qopts);
          os << "y,pmf\n";
          for (std::size_t y = 0; y < table.size(); ++y) {
            os << y << ',';
            json_number(os, table[y]);
            os << '\n';
          }
        }
      });
      return 0;
    }

    if (*ix_cmd) {
      petreg::IndexReport rep;
      std::optional<petreg::G0TestResult> test;
      if (ix_summary) {
        if (ix_cmd->count("--mean") == 0 || ix_cmd->count("--variance") == 0)
          throw petreg::DomainError("--summary needs --mean and --variance");
        std::optional<double> zf;
        if (ix_zf_opt->count() > 0) zf = ix_zero_fraction;
        rep = petreg::indexes_from_summary(ix_mean, ix_variance, zf);
      } else if (ix_theoretical) {
        if (ix_cmd->count("--m") == 0 || ix_cmd->count("--phi") == 0 ||
            ix_cmd->count("--p") == 0)
          throw petreg::DomainError("--theoretical needs --m, --phi and --p");
        petreg::QuadratureOptions qopts;
        qopts.outer_nodes = ix_outer;
        rep = petreg::theoretical_indexes(petreg::PetParams(ix_m, ix_phi, ix_p), qopts);
      } else {
        if (ix_data.empty())
          throw petreg::DomainError("give --data, or --summary / --theoretical");
        const petreg::CsvTable table = read_csv_file(ix_data);
        const std::size_t col = table.column_index(ix_response);
        std::vector<long> y;
        y.reserve(table.rows.size());
        for (const auto& row : table.rows) {
          const double v = row[col];
          if (!(v >= 0.0) || v != std::floor(v) || v > 9e15)
            throw petreg::DomainError("counts must be nonnegative integers");
          y.push_back(static_cast<long>(v));
        }
        rep = petreg::empirical_indexes(y);
        if (ix_test) test = petreg::g0_dispersion_test(y, ix_reps, ix_seed);
      }
      with_output(ix_output, [&](std::ostream& os) { write_indexes_json(os, rep, test); });
      return 0;
    }

    if (*gof_cmd) {
      const petreg::FrequencyTable table = petreg::frequency_from_csv(read_csv_file(gf_freq));
      const petreg::PetParams params(gf_m, gf_phi, gf_p);
      petreg::QuadratureOptions qopts;
      qopts.outer_nodes = gf_outer;
      const petreg::GofResult res =
          petreg::chi_square_gof(table.counts, params, gf_nest, gf_pool, qopts);
      with_output(gf_output, [&](std::ostream& os) {
        os << "{\"statistic\":";
        json_number(os, res.statistic);
        os << ",\"df\":" << res.df << ",\"p_value\":";
        json_number(os, res.p_value);
        os << ",\"observed\":[";
        for (std::size_t i = 0; i < res.observed.size(); ++i) {
          if (i) os << ',';
          os << res.observed[i];
        }
        os << "],\"expected\":[";
        for (std::size_t i = 0; i < res.expected.size(); ++i) {
          if (i) os << ',';
          json_number(os, res.expected[i]);
        }
        os << "]}\n";
      });
      return 0;
    }

    if (*study_cmd) {
      petreg::SimStudyDesign design;
      if (!st_config.empty()) {
        std::ifstream in(st_config);
        if (!in) throw std::runtime_error("cannot open '" + st_config + "'");
        const nlohmann::json j = nlohmann::json::parse(in);
        design.beta = j.value("beta", design.beta);
        design.p_values = j.value("p_values", design.p_values);
        design.phi_values = j.value("phi_values", design.phi_values);
        design.sample_sizes = j.value("sample_sizes", design.sample_sizes);
        design.replicates = j.value("replicates", design.replicates);
        design.nominal_coverage = j.value("nominal_coverage", design.nominal_coverage);
        design.seed = j.value("seed", design.seed);
      }
      if (st_reps_opt->count() > 0) design.replicates = st_replicates;
      if (st_seed_opt->count() > 0) design.seed = st_seed;
      const std::vector<petreg::ScenarioSummary> results = petreg::run_simulation_study(design);
      with_output(st_output, [&](std::ostream& os) { petreg::write_study_csv(os, results); });
      if (!st_json.empty()) {
        with_output(st_json, [&](std::ostream& os) { petreg::write_study_json(os, results); });
      }
      return 0;
    }

    if (*curves_cmd) {
      if (!(cv_from > 0.0) || !(cv_to > cv_from) || cv_points < 2)
        throw petreg::DomainError("need 0 < --m-from < --m-to and --points >= 2");
      std::vector<double> grid(cv_points);
      for (std::size_t i = 0; i < cv_points; ++i)
        grid[i] = cv_from + (cv_to - cv_from) * static_cast<double>(i) /
                                static_cast<double>(cv_points - 1);
      const std::vector<petreg::IndexCurvePoint> pts = petreg::index_curves(cv_p, cv_phi, grid);
      with_output(cv_output, [&](std::ostream& os) { petreg::write_index_curves_csv(os, pts); });
      return 0;
    }
  } catch (const petreg::ParseError& e) {
    std::cerr << "parse error at row " << e.row << ", column " << e.column << ": " << e.what()
              << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
