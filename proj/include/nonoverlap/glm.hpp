#pragma once

// Logistic regression by Newton-Raphson / IRLS with step halving. Responses
// may be fractional in [0, 1] (quasi-binomial). Separation or a singular
// weighted Gram matrix triggers one refit with a small ridge penalty.

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include <Eigen/Dense>

#include "nonoverlap/errors.hpp"
#include "nonoverlap/stats.hpp"

namespace nonoverlap {

struct GlmOptions {
  int max_iter = 100;
  double tol = 1e-8;    ///< on the Euclidean norm of the log-likelihood gradient
  double ridge = 1e-4;  ///< penalty used by the separation fallback
};

struct GlmFit {
  Eigen::VectorXd coefficients;  ///< same order as the design columns
  bool converged = false;
  int iterations = 0;
  bool ridge_used = false;
  double gradient_norm = 0.0;
};

/// Clipping bound for predicted probabilities: predictions lie in [delta, 1 - delta].
inline constexpr double kProbabilityClip = 1e-6;

namespace detail {

// Linear predictors this large only arise when the MLE is at infinity.
inline constexpr double kSeparationPredictor = 25.0;

inline double penalized_loglik(const Eigen::MatrixXd& design, const Eigen::VectorXd& y,
                               const Eigen::VectorXd& beta, double ridge) {
  const Eigen::VectorXd eta = design * beta;
  double ll = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) ll += y[i] * eta[i] - stats::softplus(eta[i]);
  return ll - 0.5 * ridge * beta.squaredNorm();
}

struct NewtonOutcome {
  GlmFit fit;
  bool singular = false;
  bool separated = false;
};

inline NewtonOutcome newton_logistic(const Eigen::MatrixXd& design, const Eigen::VectorXd& y,
                                     const GlmOptions& options, double ridge) {
  const auto q = design.cols();
  NewtonOutcome out;
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(q);
  double ll = penalized_loglik(design, y, beta, ridge);
  Eigen::VectorXd prob(design.rows());
  Eigen::VectorXd grad(q);

  int iter = 0;
  for (;; ++iter) {
    const Eigen::VectorXd eta = design * beta;
    for (Eigen::Index i = 0; i < eta.size(); ++i) prob[i] = stats::expit(eta[i]);
    grad = design.transpose() * (y - prob) - ridge * beta;
    out.fit.gradient_norm = grad.norm();
    if (out.fit.gradient_norm <= options.tol) {
      out.fit.converged = true;
      break;
    }
    if (iter >= options.max_iter) break;

    const Eigen::VectorXd w = prob.array() * (1.0 - prob.array());
    Eigen::MatrixXd info = design.transpose() * w.asDiagonal() * design;
    info.diagonal().array() += ridge;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || ldlt.rcond() < 1e-13) {
      out.singular = true;
      break;
    }
    const Eigen::VectorXd step = ldlt.solve(grad);

    double t = 1.0;
    Eigen::VectorXd candidate = beta + step;
    double ll_new = penalized_loglik(design, y, candidate, ridge);
    for (int halving = 0; halving < 40 && !(ll_new >= ll - 1e-12 * std::abs(ll)); ++halving) {
      t *= 0.5;
      candidate = beta + t * step;
      ll_new = penalized_loglik(design, y, candidate, ridge);
    }
    beta = candidate;
    ll = ll_new;
  }
  out.fit.iterations = iter;
  out.fit.coefficients = beta;
  if (!beta.allFinite()) {
    out.singular = true;
  } else {
    const Eigen::VectorXd eta = design * beta;
    out.separated = eta.size() > 0 && eta.cwiseAbs().maxCoeff() > kSeparationPredictor;
  }
  return out;
}

}  // namespace detail

/// Maximises the (quasi-)binomial log-likelihood of `response` on `design`
/// (which carries its own intercept column).
inline GlmFit fit_logistic(const Eigen::MatrixXd& design, const Eigen::VectorXd& response,
                           const GlmOptions& options = {}) {
  if (design.rows() < 1 || design.cols() < 1)
    throw DataError("logistic regression needs at least one row and one column");
  if (design.rows() != response.size())
    throw DataError("design rows and response length differ");
  if (!design.allFinite() || !response.allFinite())
    throw DataError("logistic regression inputs contain non-finite values");
  if ((response.array() < 0.0).any() || (response.array() > 1.0).any())
    throw DataError("logistic regression response must lie in [0, 1]");

  auto plain = detail::newton_logistic(design, response, options, 0.0);
  if (plain.fit.converged && !plain.singular && !plain.separated) return plain.fit;

  auto ridged = detail::newton_logistic(design, response, options, options.ridge);
  if (!ridged.fit.converged || ridged.singular) {
    std::ostringstream os;
    os << "logistic regression did not converge after " << options.max_iter
       << " iterations, even with ridge penalty " << options.ridge;
    throw ConvergenceError(os.str());
  }
  ridged.fit.ridge_used = true;
  return ridged.fit;
}

/// Inverse-logit of the linear predictor, clipped to [1e-6, 1 - 1e-6].
inline Eigen::VectorXd predict_proba(const GlmFit& fit, const Eigen::MatrixXd& design) {
  if (design.cols() != fit.coefficients.size()) {
    std::ostringstream os;
    os << "design has " << design.cols() << " columns but the fit has "
       << fit.coefficients.size() << " coefficients";
    throw ParameterError(os.str());
  }
  const Eigen::VectorXd eta = design * fit.coefficients;
  Eigen::VectorXd p(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i)
    p[i] = std::clamp(stats::expit(eta[i]), kProbabilityClip, 1.0 - kProbabilityClip);
  return p;
}

/// [1, X(:, columns)] for the selected rows.
template <class Rows>
Eigen::MatrixXd design_matrix(const Eigen::MatrixXd& X, const Rows& rows,
                              const std::vector<int>& columns) {
  Eigen::MatrixXd d(static_cast<Eigen::Index>(rows.size()),
                    static_cast<Eigen::Index>(columns.size()) + 1);
  Eigen::Index r = 0;
  for (auto i : rows) {
    d(r, 0) = 1.0;
    for (std::size_t j = 0; j < columns.size(); ++j)
      d(r, static_cast<Eigen::Index>(j) + 1) = X(static_cast<Eigen::Index>(i), columns[j]);
    ++r;
  }
  return d;
}

}  // namespace nonoverlap
