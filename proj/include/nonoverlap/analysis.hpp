#pragma once

// End-to-end analysis of one dataset: cross-fit nuisances, targeted bounds on
// a (c, gamma) grid, a joint uniform confidence set, and the one-step
// benchmark, collected into a JSON document.

#include <cmath>
#include <cstdint>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nonoverlap/bounds.hpp"
#include "nonoverlap/csv.hpp"
#include "nonoverlap/dataset.hpp"
#include "nonoverlap/nuisance.hpp"
#include "nonoverlap/parallel.hpp"
#include "nonoverlap/stats.hpp"
#include "nonoverlap/uniform.hpp"

namespace nonoverlap {

struct AnalysisConfig {
  std::string data_path;
  ColumnSpec columns;
  std::vector<double> thresholds = stats::log10_grid(-6.0, -1.0, 0.2);
  std::vector<double> gammas{1e-3, 1e-2};
  double alpha = 0.05;
  int B = 1000;
  int folds = 5;
  std::uint64_t seed = 1;
  int threads = 1;
  Multiplier multiplier = Multiplier::gaussian;
  TmleOptions tmle;

  void validate() const {
    if (thresholds.empty()) throw ParameterError("threshold grid is empty");
    for (double c : thresholds)
      if (!(c > 0.0 && c <= 0.5)) throw ParameterError("thresholds must lie in (0, 1/2]");
    if (gammas.empty()) throw ParameterError("gamma list is empty");
    for (double g : gammas)
      if (!(g > 0.0)) throw ParameterError("gammas must be positive");
    if (!(alpha > 0.0 && alpha < 1.0)) throw ParameterError("alpha must lie in (0, 1)");
    if (B < 1) throw ParameterError("B must be at least 1");
    if (folds < 2) throw ParameterError("folds must be at least 2");
  }
};

namespace detail {

inline nlohmann::ordered_json interval_json(double lo, double hi) { return {{"lo", lo}, {"hi", hi}}; }

}  // namespace detail

inline nlohmann::ordered_json run_estimate(const Dataset& data, const AnalysisConfig& cfg) {
  cfg.validate();
  auto warnings = data.validate();

  CrossFitOptions cf;
  cf.folds = cfg.folds;
  cf.seed = derive_seed(cfg.seed, {1});
  cf.threads = cfg.threads;
  const auto nuis = cross_fit(data, cf, NuisanceFormula::all_covariates(data));

  std::vector<SmoothingSpec> specs;
  for (double g : cfg.gammas)
    for (double c : cfg.thresholds) specs.push_back({c, g});
  std::vector<BoundEstimate> estimates(specs.size());
  parallel_for(specs.size(), cfg.threads, [&](std::size_t k) {
    estimates[k] = estimate_bounds(data, nuis, specs[k], cfg.tmle);
  });

  BootstrapConfig bc;
  bc.B = cfg.B;
  bc.alpha = cfg.alpha;
  bc.multiplier = cfg.multiplier;
  bc.seed = derive_seed(cfg.seed, {2});
  bc.threads = cfg.threads;
  const auto uniform = multiplier_bootstrap(estimates, bc);
  warnings.insert(warnings.end(), uniform.warnings.begin(), uniform.warnings.end());

  nlohmann::ordered_json doc;
  doc["n"] = data.n();
  doc["covariates"] = data.covariate_names;
  doc["config"] = {{"thresholds", cfg.thresholds},
                   {"gammas", cfg.gammas},
                   {"alpha", cfg.alpha},
                   {"B", cfg.B},
                   {"folds", cfg.folds},
                   {"seed", cfg.seed},
                   {"multiplier", cfg.multiplier == Multiplier::gaussian ? "gaussian" : "rademacher"}};

  auto configs = nlohmann::ordered_json::array();
  auto plot = nlohmann::ordered_json::array();
  for (std::size_t k = 0; k < estimates.size(); ++k) {
    const auto& e = estimates[k];
    const auto& u = uniform.per_config[k];
    const auto pw = pointwise_ci(e, cfg.alpha);
    if (!e.converged) {
      std::ostringstream os;
      os << "targeting did not converge at c = " << e.spec.c << ", gamma = " << e.spec.gamma;
      warnings.push_back(os.str());
    }
    configs.push_back({{"c", e.spec.c},
                       {"gamma", e.spec.gamma},
                       {"psi_s_hat", e.psi_s_hat},
                       {"L_hat", e.L_hat},
                       {"U_hat", e.U_hat},
                       {"sigma_L", e.sigma_L},
                       {"sigma_U", e.sigma_U},
                       {"pointwise_ci", detail::interval_json(pw.lo, pw.hi)},
                       {"uniform_ci", detail::interval_json(u.lo, u.hi)},
                       {"converged", e.converged},
                       {"tmle_iterations", {{"lower", e.epsilon_trace_lower.size()},
                                            {"upper", e.epsilon_trace_upper.size()}}},
                       {"score_residual", {{"lower", e.score_residual_lower},
                                           {"upper", e.score_residual_upper}}}});
    plot.push_back({{"gamma", e.spec.gamma},
                    {"c", e.spec.c},
                    {"L_hat", e.L_hat},
                    {"U_hat", e.U_hat},
                    {"uniform_lo", u.lo},
                    {"uniform_hi", u.hi}});
  }
  doc["configurations"] = std::move(configs);
  doc["plot"] = std::move(plot);
  doc["uniform"] = {{"q_hat", uniform.q_hat},
                    {"narrowest", detail::interval_json(uniform.narrowest.lo, uniform.narrowest.hi)},
                    {"reject_null", reject_null(uniform)}};
  const auto dr = onestep_ate(data, nuis, cfg.alpha);
  doc["onestep"] = {{"estimate", dr.estimate},
                    {"se", dr.se},
                    {"ci", detail::interval_json(dr.ci.lo, dr.ci.hi)},
                    {"width", dr.width}};
  doc["warnings"] = warnings;
  return doc;
}

/// Flat projection of an estimate document: one row per configuration, with
/// the global quantities repeated on every row.
inline void write_estimate_csv(std::ostream& os, const nlohmann::ordered_json& doc) {
  os << "c,gamma,psi_s_hat,L_hat,U_hat,sigma_L,sigma_U,pointwise_lo,pointwise_hi,uniform_lo,"
        "uniform_hi,converged,q_hat,narrowest_lo,narrowest_hi,reject_null,onestep_estimate,"
        "onestep_se,onestep_lo,onestep_hi,onestep_width\n";
  os.precision(17);
  const auto& u = doc.at("uniform");
  const auto& dr = doc.at("onestep");
  for (const auto& c : doc.at("configurations")) {
    os << c.at("c").get<double>() << ',' << c.at("gamma").get<double>() << ','
       << c.at("psi_s_hat").get<double>() << ',' << c.at("L_hat").get<double>() << ','
       << c.at("U_hat").get<double>() << ',' << c.at("sigma_L").get<double>() << ','
       << c.at("sigma_U").get<double>() << ',' << c.at("pointwise_ci").at("lo").get<double>() << ','
       << c.at("pointwise_ci").at("hi").get<double>() << ','
       << c.at("uniform_ci").at("lo").get<double>() << ','
       << c.at("uniform_ci").at("hi").get<double>() << ','
       << (c.at("converged").get<bool>() ? "true" : "false") << ','
       << u.at("q_hat").get<double>() << ',' << u.at("narrowest").at("lo").get<double>() << ','
       << u.at("narrowest").at("hi").get<double>() << ','
       << (u.at("reject_null").get<bool>() ? "true" : "false") << ','
       << dr.at("estimate").get<double>() << ',' << dr.at("se").get<double>() << ','
       << dr.at("ci").at("lo").get<double>() << ',' << dr.at("ci").at("hi").get<double>() << ','
       << dr.at("width").get<double>() << '\n';
  }
}

}  // namespace nonoverlap
