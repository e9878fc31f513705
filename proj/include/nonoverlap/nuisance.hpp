#pragma once

// Cross-fitted nuisance estimates eta = {pi, mu0, mu1} from main-effects
// logistic regressions. Observations are split into K folds; predictions for
// fold k come from models trained on the other K - 1 folds.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <vector>

#include <Eigen/Dense>

#include "nonoverlap/dataset.hpp"
#include "nonoverlap/errors.hpp"
#include "nonoverlap/glm.hpp"
#include "nonoverlap/parallel.hpp"
#include "nonoverlap/random.hpp"

namespace nonoverlap {

/// Covariate columns (indices into Dataset::X) entering each regression. An
/// empty list means intercept only. By default the outcome regressions are fit
/// separately within each treatment arm; with pooled_outcome a single model
/// Y ~ mu_columns + A is fit on all training rows and predicted at A = 0, 1.
struct NuisanceFormula {
  std::vector<int> pi_columns;
  std::vector<int> mu_columns;
  bool pooled_outcome = false;

  static NuisanceFormula all_covariates(const Dataset& data) {
    std::vector<int> cols(static_cast<std::size_t>(data.p()));
    std::iota(cols.begin(), cols.end(), 0);
    return {cols, cols};
  }
};

struct CrossFitOptions {
  int folds = 5;
  std::uint64_t seed = 1;
  GlmOptions glm{};
  int threads = 1;
};

/// Out-of-fold predictions, each clipped to [1e-6, 1 - 1e-6].
struct NuisanceEstimates {
  Eigen::VectorXd pi;
  Eigen::VectorXd mu0;
  Eigen::VectorXd mu1;
  std::vector<int> fold_id;

  Eigen::Index n() const { return pi.size(); }
};

/// Seeded shuffle followed by round-robin assignment; fold sizes differ by at
/// most one.
inline std::vector<int> assign_folds(std::size_t n, int folds, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Engine rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<int> fold_id(n);
  for (std::size_t r = 0; r < n; ++r) fold_id[order[r]] = static_cast<int>(r % static_cast<std::size_t>(folds));
  return fold_id;
}

namespace detail {

inline void check_columns(const std::vector<int>& cols, Eigen::Index p, const char* which) {
  for (int c : cols) {
    if (c < 0 || c >= p) {
      std::ostringstream os;
      os << which << " formula references covariate column " << c << " but the data has " << p;
      throw ParameterError(os.str());
    }
  }
}

inline Eigen::VectorXd gather(const Eigen::VectorXd& v, const std::vector<Eigen::Index>& rows) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) out[static_cast<Eigen::Index>(r)] = v[rows[r]];
  return out;
}

}  // namespace detail

inline NuisanceEstimates cross_fit(const Dataset& data, const CrossFitOptions& options,
                                   const NuisanceFormula& formula) {
  data.validate();
  const Eigen::Index n = data.n();
  if (options.folds < 2) throw ParameterError("cross-fitting needs at least 2 folds");
  if (options.folds > n) throw ParameterError("more folds than observations");
  detail::check_columns(formula.pi_columns, data.p(), "propensity");
  detail::check_columns(formula.mu_columns, data.p(), "outcome");

  NuisanceEstimates est;
  est.fold_id = assign_folds(static_cast<std::size_t>(n), options.folds, options.seed);
  est.pi.resize(n);
  est.mu0.resize(n);
  est.mu1.resize(n);

  // Each fold writes only its own held-out rows, so the merge is order-free.
  parallel_for(static_cast<std::size_t>(options.folds), options.threads, [&](std::size_t k) {
    const int fold = static_cast<int>(k);
    std::vector<Eigen::Index> train, train_treated, train_control, held_out;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (est.fold_id[static_cast<std::size_t>(i)] == fold) {
        held_out.push_back(i);
      } else {
        train.push_back(i);
        (data.A[i] == 1.0 ? train_treated : train_control).push_back(i);
      }
    }
    if (train_treated.empty() || train_control.empty()) {
      std::ostringstream os;
      os << "cross-fitting fold " << fold << ": its training set has "
         << train_treated.size() << " treated and " << train_control.size()
         << " control units; both arms are required (use fewer folds or more data)";
      throw FoldDegeneracyError(fold, os.str());
    }
    if (held_out.empty()) return;

    const auto pi_fit = fit_logistic(design_matrix(data.X, train, formula.pi_columns),
                                     detail::gather(data.A, train), options.glm);
    const Eigen::VectorXd pi = predict_proba(pi_fit, design_matrix(data.X, held_out, formula.pi_columns));
    Eigen::VectorXd mu1, mu0;
    if (formula.pooled_outcome) {
      Eigen::MatrixXd design = design_matrix(data.X, train, formula.mu_columns);
      design.conservativeResize(Eigen::NoChange, design.cols() + 1);
      design.col(design.cols() - 1) = detail::gather(data.A, train);
      const auto mu_fit = fit_logistic(design, detail::gather(data.Y, train), options.glm);
      Eigen::MatrixXd at = design_matrix(data.X, held_out, formula.mu_columns);
      at.conservativeResize(Eigen::NoChange, at.cols() + 1);
      at.col(at.cols() - 1).setOnes();
      mu1 = predict_proba(mu_fit, at);
      at.col(at.cols() - 1).setZero();
      mu0 = predict_proba(mu_fit, at);
    } else {
      const auto mu1_fit = fit_logistic(design_matrix(data.X, train_treated, formula.mu_columns),
                                        detail::gather(data.Y, train_treated), options.glm);
      const auto mu0_fit = fit_logistic(design_matrix(data.X, train_control, formula.mu_columns),
                                        detail::gather(data.Y, train_control), options.glm);
      const Eigen::MatrixXd mu_design = design_matrix(data.X, held_out, formula.mu_columns);
      mu1 = predict_proba(mu1_fit, mu_design);
      mu0 = predict_proba(mu0_fit, mu_design);
    }
    for (std::size_t r = 0; r < held_out.size(); ++r) {
      const auto i = held_out[r];
      const auto ri = static_cast<Eigen::Index>(r);
      est.pi[i] = pi[ri];
      est.mu1[i] = mu1[ri];
      est.mu0[i] = mu0[ri];
    }
  });
  return est;
}

}  // namespace nonoverlap
