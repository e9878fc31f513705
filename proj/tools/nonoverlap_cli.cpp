// nonoverlap: bounds on the ATE without overlap.
//
//   nonoverlap estimate --data file.csv --outcome Y --treatment A [...]
//   nonoverlap simulate --n 100,500 --conditional --overlap-alpha 5 [...]
//
// Exit codes: 0 success, 1 usage or parameter error, 2 data error,
// 3 convergence failure, 4 infeasible conditional sampling, 5 internal error.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nonoverlap/analysis.hpp"
#include "nonoverlap/csv.hpp"
#include "nonoverlap/errors.hpp"
#include "nonoverlap/simulation.hpp"
#include "nonoverlap/stats.hpp"

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kConvergence = 3, kInfeasible = 4, kInternal = 5 };

struct GridFlags {
  std::vector<double> thresholds;
  std::vector<double> log_grid;  // {min exponent, max exponent, step}

  std::vector<double> resolve(const std::vector<double>& fallback) const {
    if (!thresholds.empty() && !log_grid.empty())
      throw nonoverlap::ParameterError("give either --thresholds or --log-grid, not both");
    if (!thresholds.empty()) return thresholds;
    if (!log_grid.empty()) return nonoverlap::stats::log10_grid(log_grid[0], log_grid[1], log_grid[2]);
    return fallback;
  }
};

void add_grid_flags(CLI::App* cmd, GridFlags& g) {
  cmd->add_option("--thresholds", g.thresholds, "explicit trimming thresholds c")->delimiter(',');
  cmd->add_option("--log-grid", g.log_grid,
                  "thresholds 10^seq(MIN, MAX, STEP), exponents as three numbers")
      ->expected(3)
      ->delimiter(',');
}

nonoverlap::Multiplier parse_multiplier(const std::string& s) {
  return s == "rademacher" ? nonoverlap::Multiplier::rademacher : nonoverlap::Multiplier::gaussian;
}

// Writes to the path, or stdout for "" and "-".
template <class Fn>
void emit(const std::string& path, Fn&& write) {
  if (path.empty() || path == "-") {
    write(std::cout);
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw nonoverlap::DataError("cannot write '" + path + "'");
  write(out);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bounds on the average treatment effect without the overlap assumption"};
  app.require_subcommand(1);
  int threads = 1;
  app.add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);

  // estimate
  auto* est = app.add_subcommand("estimate", "analyse a CSV dataset");
  est->fallthrough();
  nonoverlap::AnalysisConfig acfg;
  GridFlags est_grid;
  std::string est_format = "json", est_output, est_multiplier = "gaussian";
  est->add_option("--data", acfg.data_path, "CSV file with a header row")->required();
  est->add_option("--outcome", acfg.columns.outcome, "outcome column (values in [0, 1])");
  est->add_option("--treatment", acfg.columns.treatment, "binary treatment column");
  est->add_option("--covariates", acfg.columns.covariates, "covariate columns (default: all others)")
      ->delimiter(',');
  est->add_option("--categorical", acfg.columns.categorical, "covariates to one-hot encode")
      ->delimiter(',');
  add_grid_flags(est, est_grid);
  est->add_option("--gammas", acfg.gammas, "smoothing parameters")->delimiter(',');
  est->add_option("--alpha", acfg.alpha, "significance level");
  est->add_option("--B", acfg.B, "bootstrap draws");
  est->add_option("--folds", acfg.folds, "cross-fitting folds");
  est->add_option("--seed", acfg.seed, "master seed");
  est->add_option("--multiplier", est_multiplier, "bootstrap multipliers")
      ->check(CLI::IsMember({"gaussian", "rademacher"}));
  est->add_option("--format", est_format, "output format")->check(CLI::IsMember({"json", "csv"}));
  est->add_option("--output,-o", est_output, "output path (default stdout)");

  // simulate
  auto* sim = app.add_subcommand("simulate", "run the Monte Carlo study");
  sim->fallthrough();
  nonoverlap::StudyGrid grid;
  GridFlags sim_grid;
  bool full = false;
  std::string sim_format = "csv", sim_output, sim_multiplier = "gaussian";
  sim->add_option("--n", grid.n_values, "sample sizes")->delimiter(',');
  sim->add_option("--replicates", grid.replicates, "Monte Carlo replicates");
  sim->add_option("--overlap-alpha", grid.overlap_alpha, "severity of non-overlap in the DGP");
  sim->add_flag("--conditional", grid.conditional, "condition on max |r| > weight threshold");
  sim->add_option("--weight-threshold", grid.weight_threshold, "inverse propensity weight threshold");
  sim->add_option("--gammas", grid.gammas, "smoothing parameters")->delimiter(',');
  add_grid_flags(sim, sim_grid);
  sim->add_option("--B", grid.B, "bootstrap draws");
  sim->add_option("--folds", grid.folds, "cross-fitting folds");
  sim->add_option("--alpha", grid.alpha, "significance level");
  sim->add_option("--seed", grid.seed, "master seed");
  bool per_gamma = false;
  sim->add_flag("--per-gamma-bootstrap", per_gamma, "separate critical value for each gamma");
  sim->add_option("--outcome-intercept", grid.outcome.intercept, "outcome model intercept (default 0.5)");
  sim->add_option("--treatment-effect", grid.outcome.treatment, "outcome model coefficient on A");
  sim->add_option("--multiplier", sim_multiplier, "bootstrap multipliers")
      ->check(CLI::IsMember({"gaussian", "rademacher"}));
  sim->add_flag("--replicates-full", full, "published scale: 5000 replicates, B = 1000");
  sim->add_option("--format", sim_format, "output format")->check(CLI::IsMember({"json", "csv"}));
  sim->add_option("--output,-o", sim_output, "output path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*est) {
      acfg.thresholds = est_grid.resolve(acfg.thresholds);
      acfg.threads = threads;
      acfg.multiplier = parse_multiplier(est_multiplier);
      acfg.validate();
      const auto data = nonoverlap::ingest_csv(acfg.data_path, acfg.columns);
      const auto doc = nonoverlap::run_estimate(data, acfg);
      for (const auto& w : doc.at("warnings")) std::cerr << "warning: " << w.get<std::string>() << '\n';
      emit(est_output, [&](std::ostream& os) {
        if (est_format == "json")
          os << doc.dump(2) << '\n';
        else
          nonoverlap::write_estimate_csv(os, doc);
      });
    } else {
      grid.thresholds = sim_grid.resolve(grid.thresholds);
      grid.threads = threads;
      grid.multiplier = parse_multiplier(sim_multiplier);
      if (full) grid.full_scale();
      grid.joint_gamma = !per_gamma;
      const auto metrics = nonoverlap::run_study(grid);
      for (const auto& f : metrics.failure_messages) std::cerr << "excluded: " << f << '\n';
      emit(sim_output, [&](std::ostream& os) {
        if (sim_format == "json")
          os << nonoverlap::metrics_json(metrics, grid).dump(2) << '\n';
        else
          nonoverlap::write_metrics_csv(os, metrics);
      });
    }
  } catch (const nonoverlap::ParameterError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const nonoverlap::FoldDegeneracyError& e) {
    std::cerr << "error: " << e.what()
              << "\nhint: use fewer --folds or check that both arms are well represented\n";
    return kData;
  } catch (const nonoverlap::DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  } catch (const nonoverlap::ConvergenceError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConvergence;
  } catch (const nonoverlap::FeasibilityError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInfeasible;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kInternal;
  }
  return kOk;
}
