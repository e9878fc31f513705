#pragma once

// Monte Carlo study of the non-overlap bounds against the one-step estimator.
//
// DGP: X1 ~ U(-1, 1), X2 ~ {-1, 0, 1} w.p. {0.05, 0.9, 0.05},
//      A | X ~ Bern(expit(X1 + alpha X2)), Y | A, X ~ Bern(expit(b0 + b1 X1 + bA A)).
// The conditional regime keeps only datasets whose largest inverse
// propensity weight (with the true propensity) exceeds a threshold.

#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "nonoverlap/bounds.hpp"
#include "nonoverlap/dataset.hpp"
#include "nonoverlap/errors.hpp"
#include "nonoverlap/nuisance.hpp"
#include "nonoverlap/parallel.hpp"
#include "nonoverlap/random.hpp"
#include "nonoverlap/stats.hpp"
#include "nonoverlap/uniform.hpp"

namespace nonoverlap {

struct OutcomeSpec {
  double intercept = 0.5;
  double x1 = 1.0;
  double treatment = 1.0;
};

struct DgpConfig {
  int n = 100;
  double overlap_alpha = 5.0;
  bool conditional = false;
  double weight_threshold = 100.0;
  std::uint64_t seed = 1;
  OutcomeSpec outcome;
  std::size_t max_attempts = 1'000'000;

  void validate() const {
    if (n < 10) throw ParameterError("DGP sample size n must be at least 10");
    if (!(weight_threshold > 1.0)) throw ParameterError("weight threshold must exceed 1");
    if (!std::isfinite(overlap_alpha)) throw ParameterError("overlap alpha must be finite");
    if (max_attempts < 1) throw ParameterError("max_attempts must be positive");
  }
};

struct SimulatedData {
  Dataset data;
  Eigen::VectorXd true_pi;
  std::size_t attempts = 1;
};

struct WeightDiagnostics {
  Eigen::VectorXd r;
  double max_abs_r = 0.0;
};

namespace detail {

inline double uniform01(Engine& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace detail

/// One unconditional draw of n observations; cfg.conditional is ignored.
inline SimulatedData sample_dgp(const DgpConfig& cfg, Engine& rng) {
  cfg.validate();
  SimulatedData out;
  Dataset& d = out.data;
  d.X.resize(cfg.n, 2);
  d.A.resize(cfg.n);
  d.Y.resize(cfg.n);
  d.covariate_names = {"X1", "X2"};
  out.true_pi.resize(cfg.n);
  for (int i = 0; i < cfg.n; ++i) {
    const double x1 = 2.0 * detail::uniform01(rng) - 1.0;
    const double u = detail::uniform01(rng);
    const double x2 = u < 0.05 ? -1.0 : (u < 0.95 ? 0.0 : 1.0);
    const double pi = stats::expit(x1 + cfg.overlap_alpha * x2);
    const double a = detail::uniform01(rng) < pi ? 1.0 : 0.0;
    const double mu = stats::expit(cfg.outcome.intercept + cfg.outcome.x1 * x1 + cfg.outcome.treatment * a);
    d.X(i, 0) = x1;
    d.X(i, 1) = x2;
    d.A[i] = a;
    d.Y[i] = detail::uniform01(rng) < mu ? 1.0 : 0.0;
    out.true_pi[i] = pi;
  }
  return out;
}

/// r_i = A_i / pi_i - (1 - A_i) / (1 - pi_i).
inline WeightDiagnostics weight_diagnostics(const Eigen::VectorXd& A, const Eigen::VectorXd& pi) {
  WeightDiagnostics w;
  w.r.resize(A.size());
  for (Eigen::Index i = 0; i < A.size(); ++i) {
    w.r[i] = A[i] / pi[i] - (1.0 - A[i]) / (1.0 - pi[i]);
    w.max_abs_r = std::max(w.max_abs_r, std::abs(w.r[i]));
  }
  return w;
}

/// Largest |r| any observation can reach under the DGP: the propensity
/// logit ranges over (-1 - |alpha|, 1 + |alpha|), so sup |r| = 1 + e^(1 + |alpha|).
inline double max_attainable_weight(double overlap_alpha) {
  return 1.0 + std::exp(1.0 + std::abs(overlap_alpha));
}

/// Redraws datasets until max_i |r_i| > weight_threshold.
inline SimulatedData sample_conditional(const DgpConfig& cfg, Engine& rng) {
  cfg.validate();
  if (max_attainable_weight(cfg.overlap_alpha) <= cfg.weight_threshold) {
    std::ostringstream os;
    os << "conditional sampling is infeasible: with overlap alpha " << cfg.overlap_alpha
       << " no inverse propensity weight can exceed " << max_attainable_weight(cfg.overlap_alpha)
       << ", below the threshold " << cfg.weight_threshold;
    throw FeasibilityError(os.str());
  }
  for (std::size_t attempt = 1; attempt <= cfg.max_attempts; ++attempt) {
    auto draw = sample_dgp(cfg, rng);
    if (weight_diagnostics(draw.data.A, draw.true_pi).max_abs_r > cfg.weight_threshold) {
      draw.attempts = attempt;
      return draw;
    }
  }
  std::ostringstream os;
  os << "no dataset with max |r| > " << cfg.weight_threshold << " after " << cfg.max_attempts
     << " attempts (n = " << cfg.n << ", overlap alpha = " << cfg.overlap_alpha << ")";
  throw FeasibilityError(os.str());
}

/// E{expit(b0 + b1 X1 + bA)} - E{expit(b0 + b1 X1)} with X1 ~ U(-1, 1), using
/// the antiderivative of expit(a + b x), which is log(1 + e^(a + b x)) / b.
inline double true_ate(const OutcomeSpec& spec) {
  auto arm_mean = [&](double a) {
    if (spec.x1 == 0.0) return stats::expit(a);
    return (stats::softplus(a + spec.x1) - stats::softplus(a - spec.x1)) / (2.0 * spec.x1);
  };
  return arm_mean(spec.intercept + spec.treatment) - arm_mean(spec.intercept);
}

// ---------------------------------------------------------------------------
// Study runner

/// Thresholds 10^seq(-4, log10(0.05), 0.2).
inline std::vector<double> study_thresholds() { return stats::log10_grid(-4.0, std::log10(0.05), 0.2); }

struct StudyGrid {
  std::vector<int> n_values{100, 500, 1000};
  std::vector<double> gammas{1e-3, 1e-2, 1e-1};
  std::vector<double> thresholds = study_thresholds();
  double overlap_alpha = 5.0;
  bool conditional = false;
  double weight_threshold = 100.0;
  int replicates = 300;
  int B = 500;
  int folds = 5;
  double alpha = 0.05;
  std::uint64_t seed = 1;
  int threads = 1;
  bool joint_gamma = true;  ///< one critical value for every (c, gamma); false bootstraps each gamma alone
  bool pooled_outcome = true;  ///< outcome model Y ~ X1 + A rather than Y ~ X1 within each arm
  Multiplier multiplier = Multiplier::gaussian;
  OutcomeSpec outcome;
  TmleOptions tmle;
  std::size_t max_attempts = 1'000'000;

  /// Replicate count and bootstrap size of the published study.
  StudyGrid& full_scale() {
    replicates = 5000;
    B = 1000;
    return *this;
  }

  void validate() const {
    if (n_values.empty() || gammas.empty() || thresholds.empty())
      throw ParameterError("study grid needs at least one n, gamma and threshold");
    for (int n : n_values)
      if (n < 10) throw ParameterError("study sample sizes must be at least 10");
    for (double g : gammas)
      if (!(g > 0.0)) throw ParameterError("gammas must be positive");
    for (double c : thresholds)
      if (!(c >= kMinTargetThreshold && c <= 0.5)) throw ParameterError("thresholds must lie in [1e-8, 1/2]");
    if (replicates < 1) throw ParameterError("replicates must be positive");
    if (folds < 2) throw ParameterError("folds must be at least 2");
  }
};

struct WidthSummary {
  double mean = 0.0;
  double median = 0.0;
  double q90 = 0.0;
  double sd = 0.0;
};

struct CellMetrics {
  int n = 0;
  double gamma = 0.0;
  WidthSummary bounds_width;
  WidthSummary dr_width;
  double coverage_bounds = 0.0;
  double coverage_dr = 0.0;
  double power_bounds = 0.0;
  double power_dr = 0.0;
  int replicates = 0;  ///< successful replicates entering the cell
  int failures = 0;
  int nonconverged = 0;  ///< replicates with at least one unconverged targeting run
  double mean_attempts = 1.0;
};

struct StudyMetrics {
  std::vector<CellMetrics> cells;
  double true_ate = 0.0;
  int replicates = 0;
  std::vector<std::string> failure_messages;
};

namespace detail {

struct GammaOutcome {
  double width = 0.0;
  bool covered = false;
  bool reject = false;
  bool converged = true;
};

struct ReplicateOutcome {
  bool ok = false;
  std::string error;
  std::vector<GammaOutcome> per_gamma;
  double dr_width = 0.0;
  bool dr_covered = false;
  bool dr_reject = false;
  std::size_t attempts = 1;
};

inline WidthSummary summarize_widths(const std::vector<double>& w) {
  WidthSummary s;
  if (w.empty()) return s;
  s.mean = stats::mean(w);
  s.median = stats::quantile_type7(w, 0.5);
  s.q90 = stats::quantile_type7(w, 0.9);
  s.sd = w.size() > 1 ? stats::sample_sd(w) : 0.0;
  return s;
}

inline ReplicateOutcome run_replicate(const StudyGrid& grid, int n, int rep, double psi) {
  ReplicateOutcome out;
  const auto un = static_cast<std::uint64_t>(n);
  const auto ur = static_cast<std::uint64_t>(rep);
  DgpConfig dgp;
  dgp.n = n;
  dgp.overlap_alpha = grid.overlap_alpha;
  dgp.weight_threshold = grid.weight_threshold;
  dgp.outcome = grid.outcome;
  dgp.max_attempts = grid.max_attempts;
  auto rng = make_engine(grid.seed, {un, ur, 1});
  const auto sim = grid.conditional ? sample_conditional(dgp, rng) : sample_dgp(dgp, rng);
  out.attempts = sim.attempts;

  CrossFitOptions cf;
  cf.folds = grid.folds;
  cf.seed = derive_seed(grid.seed, {un, ur, 2});
  NuisanceFormula formula{{0, 1}, {0}, grid.pooled_outcome};
  const auto nuis = cross_fit(sim.data, cf, formula);

  std::vector<std::vector<BoundEstimate>> by_gamma(grid.gammas.size());
  for (std::size_t g = 0; g < grid.gammas.size(); ++g)
    for (double c : grid.thresholds)
      by_gamma[g].push_back(estimate_bounds(sim.data, nuis, {c, grid.gammas[g]}, grid.tmle));

  auto score = [&](const Interval& narrowest, GammaOutcome& o) {
    o.width = std::min(2.0, std::max(0.0, narrowest.hi - narrowest.lo));
    o.covered = narrowest.contains(psi);
    o.reject = !narrowest.contains(0.0);
  };
  BootstrapConfig bc;
  bc.B = grid.B;
  bc.alpha = grid.alpha;
  bc.multiplier = grid.multiplier;
  out.per_gamma.resize(grid.gammas.size());
  if (grid.joint_gamma) {
    std::vector<BoundEstimate> all;
    for (const auto& v : by_gamma) all.insert(all.end(), v.begin(), v.end());
    bc.seed = derive_seed(grid.seed, {un, ur, 3});
    const auto u = multiplier_bootstrap(all, bc);
    // One critical value for the whole family; each gamma still reports the
    // narrowest interval over its own thresholds.
    const std::size_t per = grid.thresholds.size();
    for (std::size_t g = 0; g < grid.gammas.size(); ++g) {
      Interval narrowest{-std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
      for (std::size_t k = g * per; k < (g + 1) * per; ++k) {
        narrowest.lo = std::max(narrowest.lo, u.per_config[k].lo);
        narrowest.hi = std::min(narrowest.hi, u.per_config[k].hi);
      }
      score(narrowest, out.per_gamma[g]);
    }
  } else {
    for (std::size_t g = 0; g < grid.gammas.size(); ++g) {
      bc.seed = derive_seed(grid.seed, {un, ur, 3, g});
      score(multiplier_bootstrap(by_gamma[g], bc).narrowest, out.per_gamma[g]);
    }
  }
  for (std::size_t g = 0; g < grid.gammas.size(); ++g)
    for (const auto& e : by_gamma[g])
      if (!e.converged) out.per_gamma[g].converged = false;

  const auto dr = onestep_ate(sim.data, nuis, grid.alpha);
  out.dr_width = dr.width;
  out.dr_covered = dr.ci.contains(psi);
  out.dr_reject = !dr.ci.contains(0.0);
  out.ok = true;
  return out;
}

}  // namespace detail

/// Runs every replicate for every n. Replicate r at sample size n draws from
/// streams derived from (seed, n, r), so results do not depend on thread
/// count or execution order. Replicates that fail with a library error are
/// excluded and counted; 1% or more failures in any n aborts the study.
inline StudyMetrics run_study(const StudyGrid& grid) {
  grid.validate();
  StudyMetrics metrics;
  metrics.true_ate = true_ate(grid.outcome);
  metrics.replicates = grid.replicates;
  for (int n : grid.n_values) {
    std::vector<detail::ReplicateOutcome> reps(static_cast<std::size_t>(grid.replicates));
    parallel_for(reps.size(), grid.threads, [&](std::size_t r) {
      try {
        reps[r] = detail::run_replicate(grid, n, static_cast<int>(r), metrics.true_ate);
      } catch (const FeasibilityError&) {
        throw;
      } catch (const Error& e) {
        reps[r].ok = false;
        reps[r].error = e.what();
      }
    });
    int failures = 0;
    for (std::size_t r = 0; r < reps.size(); ++r)
      if (!reps[r].ok) {
        ++failures;
        metrics.failure_messages.push_back("n = " + std::to_string(n) + ", replicate " +
                                           std::to_string(r) + ": " + reps[r].error);
      }
    if (100 * failures >= grid.replicates) {
      std::ostringstream os;
      os << failures << " of " << grid.replicates << " replicates failed at n = " << n;
      if (!metrics.failure_messages.empty()) os << " (first: " << metrics.failure_messages.front() << ")";
      throw ConvergenceError(os.str());
    }

    std::vector<double> dr_w;
    double dr_cov = 0.0, dr_pow = 0.0, attempts = 0.0;
    for (const auto& r : reps) {
      if (!r.ok) continue;
      dr_w.push_back(r.dr_width);
      dr_cov += r.dr_covered;
      dr_pow += r.dr_reject;
      attempts += static_cast<double>(r.attempts);
    }
    const double ok = static_cast<double>(dr_w.size());
    for (std::size_t g = 0; g < grid.gammas.size(); ++g) {
      CellMetrics cell;
      cell.n = n;
      cell.gamma = grid.gammas[g];
      std::vector<double> w;
      double cov = 0.0, pow = 0.0;
      for (const auto& r : reps) {
        if (!r.ok) continue;
        w.push_back(r.per_gamma[g].width);
        cov += r.per_gamma[g].covered;
        pow += r.per_gamma[g].reject;
        cell.nonconverged += r.per_gamma[g].converged ? 0 : 1;
      }
      cell.bounds_width = detail::summarize_widths(w);
      cell.dr_width = detail::summarize_widths(dr_w);
      cell.coverage_bounds = cov / ok;
      cell.power_bounds = pow / ok;
      cell.coverage_dr = dr_cov / ok;
      cell.power_dr = dr_pow / ok;
      cell.replicates = static_cast<int>(dr_w.size());
      cell.failures = failures;
      cell.mean_attempts = attempts / ok;
      metrics.cells.push_back(cell);
    }
  }
  return metrics;
}

// ---------------------------------------------------------------------------
// Table emission: one row per (n, gamma, statistic).

struct MetricRow {
  int n;
  double gamma;
  std::string statistic;
  double bounds_value;
  double dr_value;
};

inline std::vector<MetricRow> metric_rows(const StudyMetrics& m) {
  std::vector<MetricRow> rows;
  for (const auto& c : m.cells) {
    rows.push_back({c.n, c.gamma, "width_mean", c.bounds_width.mean, c.dr_width.mean});
    rows.push_back({c.n, c.gamma, "width_median", c.bounds_width.median, c.dr_width.median});
    rows.push_back({c.n, c.gamma, "width_q90", c.bounds_width.q90, c.dr_width.q90});
    rows.push_back({c.n, c.gamma, "width_sd", c.bounds_width.sd, c.dr_width.sd});
    rows.push_back({c.n, c.gamma, "coverage", c.coverage_bounds, c.coverage_dr});
    rows.push_back({c.n, c.gamma, "power", c.power_bounds, c.power_dr});
  }
  return rows;
}

inline void write_metrics_csv(std::ostream& os, const StudyMetrics& m) {
  os << "n,gamma,statistic,bounds_value,dr_value\n";
  os.precision(10);
  for (const auto& r : metric_rows(m))
    os << r.n << ',' << r.gamma << ',' << r.statistic << ',' << r.bounds_value << ',' << r.dr_value << '\n';
}

inline nlohmann::ordered_json metrics_json(const StudyMetrics& m, const StudyGrid& grid) {
  nlohmann::ordered_json doc;
  doc["true_ate"] = m.true_ate;
  doc["config"] = {{"n", grid.n_values},
                   {"gammas", grid.gammas},
                   {"thresholds", grid.thresholds},
                   {"overlap_alpha", grid.overlap_alpha},
                   {"conditional", grid.conditional},
                   {"weight_threshold", grid.weight_threshold},
                   {"replicates", grid.replicates},
                   {"B", grid.B},
                   {"folds", grid.folds},
                   {"alpha", grid.alpha},
                   {"seed", grid.seed},
                   {"joint_gamma", grid.joint_gamma}};
  auto rows = nlohmann::ordered_json::array();
  for (const auto& r : metric_rows(m))
    rows.push_back({{"n", r.n},
                    {"gamma", r.gamma},
                    {"statistic", r.statistic},
                    {"bounds_value", r.bounds_value},
                    {"dr_value", r.dr_value}});
  doc["rows"] = std::move(rows);
  auto cells = nlohmann::ordered_json::array();
  for (const auto& c : m.cells)
    cells.push_back({{"n", c.n},
                     {"gamma", c.gamma},
                     {"replicates", c.replicates},
                     {"failures", c.failures},
                     {"nonconverged", c.nonconverged},
                     {"mean_attempts", c.mean_attempts}});
  doc["cells"] = std::move(cells);
  doc["failures"] = m.failure_messages;
  return doc;
}

}  // namespace nonoverlap
