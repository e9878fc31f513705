#pragma once

// Non-overlap bounds on the ATE and their smooth approximations.
//
// For a threshold c the trimmed effect is
//   psi(c) = E{ mu1 1(pi > c) - mu0 1(pi < 1 - c) }
// and the bounds are L(c) = psi(c) - P(pi >= 1 - c), U(c) = psi(c) + P(pi <= c).
// Replacing the indicators by s_g(pi, c, gamma) and s_l(pi, 1 - c, gamma)
// gives the smooth bounds L_s <= L <= U <= U_s, which are pathwise
// differentiable and are estimated here by targeted minimum loss.

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "nonoverlap/dataset.hpp"
#include "nonoverlap/errors.hpp"
#include "nonoverlap/nuisance.hpp"
#include "nonoverlap/smoothing.hpp"
#include "nonoverlap/stats.hpp"

namespace nonoverlap {

enum class BoundSide { lower, upper };

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  bool contains(double x) const { return lo <= x && x <= hi; }
  double width() const { return hi - lo; }
};

struct BoundPair {
  double lower = 0.0;
  double upper = 0.0;
};

/// Smallest trimming threshold accepted by the targeted estimator; keeps the
/// inverse weights s_g(pi)/pi below 1/c.
inline constexpr double kMinTargetThreshold = 1e-8;

namespace detail {

inline void check_threshold(double c) {
  if (!(c >= 0.0 && c <= 0.5)) {
    std::ostringstream os;
    os << "threshold c must lie in [0, 1/2], got " << c;
    throw ParameterError(os.str());
  }
}

// Plug-in sums over observations. Every bound is accumulated from
// per-observation terms that are monotone in the smoother values, so the
// nesting L_s <= L <= U <= U_s also holds exactly in floating point:
//   l_i  = psi_i - (1 - I_l)               u_i  = psi_i + (1 - I_g)
//   ls_i = l_i - mu1 (I_g - s_g) - (1 - mu0)(I_l - s_l)
//   us_i = u_i + (1 - mu1)(I_g - s_g) + mu0 (I_l - s_l)
struct PluginSums {
  double psi = 0.0;
  double psi_s = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double lower_s = 0.0;
  double upper_s = 0.0;
};

inline PluginSums plugin_sums(const NuisanceEstimates& nuis, double c, double gamma, bool smooth) {
  PluginSums s;
  const Eigen::Index n = nuis.n();
  for (Eigen::Index i = 0; i < n; ++i) {
    const double pi = nuis.pi[i];
    const double mu1 = nuis.mu1[i];
    const double mu0 = nuis.mu0[i];
    const double ig = pi > c ? 1.0 : 0.0;
    const double il = pi < 1.0 - c ? 1.0 : 0.0;
    const double psi_i = mu1 * ig - mu0 * il;
    const double l_i = psi_i - (1.0 - il);
    const double u_i = psi_i + (1.0 - ig);
    s.psi += psi_i;
    s.lower += l_i;
    s.upper += u_i;
    if (smooth) {
      const double sg = s_greater(pi, c, gamma);
      const double sl = s_lower(pi, 1.0 - c, gamma);
      s.psi_s += mu1 * sg - mu0 * sl;
      s.lower_s += l_i - (mu1 * (ig - sg) + (1.0 - mu0) * (il - sl));
      s.upper_s += u_i + ((1.0 - mu1) * (ig - sg) + mu0 * (il - sl));
    }
  }
  const double inv = n > 0 ? 1.0 / static_cast<double>(n) : 0.0;
  s.psi *= inv;
  s.psi_s *= inv;
  s.lower *= inv;
  s.upper *= inv;
  s.lower_s *= inv;
  s.upper_s *= inv;
  return s;
}

}  // namespace detail

/// Empirical trimmed effect mean{ mu1 1(pi > c) - mu0 1(pi < 1 - c) }.
inline double psi_trimmed(const NuisanceEstimates& nuis, double c) {
  detail::check_threshold(c);
  return detail::plugin_sums(nuis, c, 1.0, false).psi;
}

/// Plug-in non-overlap bounds [L(c), U(c)].
inline BoundPair bounds_nonsmooth(const NuisanceEstimates& nuis, double c) {
  detail::check_threshold(c);
  const auto s = detail::plugin_sums(nuis, c, 1.0, false);
  return {s.lower, s.upper};
}

inline double psi_smooth(const NuisanceEstimates& nuis, const SmoothingSpec& spec) {
  spec.validate();
  return detail::plugin_sums(nuis, spec.c, spec.gamma, true).psi_s;
}

/// Plug-in smooth bounds
///   L_s = psi_s - (1 - mean s_l(pi, 1 - c)),  U_s = psi_s + (1 - mean s_g(pi, c)).
inline BoundPair bounds_smooth_plugin(const NuisanceEstimates& nuis, const SmoothingSpec& spec) {
  spec.validate();
  const auto s = detail::plugin_sums(nuis, spec.c, spec.gamma, true);
  return {s.lower_s, s.upper_s};
}

/// Uncentered efficient influence functions of psi_s, L_s and U_s, one entry
/// per observation.
struct EifVectors {
  Eigen::VectorXd phi_psi;
  Eigen::VectorXd phi_L;
  Eigen::VectorXd phi_U;
};

namespace detail {

// s/pi and s/(1 - pi) with the convention that a zero smoother gives a zero
// weight (the smoother vanishes before pi reaches 0 or 1).
inline double safe_ratio(double s, double denom) { return s == 0.0 ? 0.0 : s / denom; }

inline EifVectors evaluate_eif(const Eigen::VectorXd& A, const Eigen::VectorXd& Y,
                               const Eigen::VectorXd& pi, const Eigen::VectorXd& mu0,
                               const Eigen::VectorXd& mu1, const SmoothingSpec& spec) {
  const Eigen::Index n = A.size();
  EifVectors out{Eigen::VectorXd(n), Eigen::VectorXd(n), Eigen::VectorXd(n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto sv = smoother_values(pi[i], spec);
    const double a = A[i];
    const double resid_pi = a - pi[i];
    const double phi_psi = mu1[i] * sv.s_g - mu0[i] * sv.s_l +
                           a * safe_ratio(sv.s_g, pi[i]) * (Y[i] - mu1[i]) -
                           (1.0 - a) * safe_ratio(sv.s_l, 1.0 - pi[i]) * (Y[i] - mu0[i]) +
                           (mu1[i] * sv.ds_g - mu0[i] * sv.ds_l) * resid_pi;
    const double phi_l = phi_psi - 1.0 + sv.s_l + sv.ds_l * resid_pi;
    const double phi_u = phi_psi + 1.0 - sv.s_g - sv.ds_g * resid_pi;
    if (!std::isfinite(phi_psi) || !std::isfinite(phi_l) || !std::isfinite(phi_u)) {
      std::ostringstream os;
      os << "non-finite influence function value at observation " << i << " (pi = " << pi[i]
         << ", mu0 = " << mu0[i] << ", mu1 = " << mu1[i] << ")";
      throw InternalError(os.str());
    }
    out.phi_psi[i] = phi_psi;
    out.phi_L[i] = phi_l;
    out.phi_U[i] = phi_u;
  }
  return out;
}

}  // namespace detail

inline EifVectors eif_evaluate(const Dataset& data, const NuisanceEstimates& nuis,
                               const SmoothingSpec& spec) {
  spec.validate();
  if (nuis.n() != data.n()) throw DataError("nuisance estimates and data differ in length");
  return detail::evaluate_eif(data.A, data.Y, nuis.pi, nuis.mu0, nuis.mu1, spec);
}

// ---------------------------------------------------------------------------
// Targeted minimum loss estimation

struct TmleOptions {
  int max_iter = 100;
  double eps_tol = 1e-5;     ///< stop once |eps*| falls below this ...
  double score_tol = 1e-7;   ///< ... and |mean(phi) - estimate| <= score_tol * sigma
  double eps_bound = 10.0;   ///< search domain [-eps_bound, eps_bound]
};

/// Result of targeting one side of the bounds.
struct TargetedSide {
  BoundSide side = BoundSide::lower;
  double estimate = 0.0;   ///< debiased substitution estimate of L_s or U_s
  double psi_s = 0.0;      ///< substitution psi_s at the targeted nuisances
  double sigma = 0.0;      ///< sample SD of the side's influence function
  Eigen::VectorXd eif;     ///< phi_L or phi_U at the targeted nuisances
  std::vector<double> epsilon_trace;
  bool converged = false;
  double score_residual = 0.0;  ///< mean(eif) - estimate
  Eigen::VectorXd pi, mu0, mu1;
};

namespace detail {

// The joint loss over the three logit-linear fluctuations
//   logit pi(eps)  = logit pi  + eps * h_pi
//   logit mu1(eps) = logit mu1 + eps * h1   (contributes where A = 1)
//   logit mu0(eps) = logit mu0 + eps * h0   (contributes where A = 0)
// with the binomial (cross-entropy) loss softplus(z) - y z for each term.
class FluctuationLoss {
 public:
  FluctuationLoss(const Eigen::VectorXd& A, const Eigen::VectorXd& Y, const Eigen::VectorXd& lp_pi,
                  const Eigen::VectorXd& lp_mu0, const Eigen::VectorXd& lp_mu1,
                  const Eigen::VectorXd& h_pi, const Eigen::VectorXd& h0,
                  const Eigen::VectorXd& h1)
      : A_(A), Y_(Y), lp_pi_(lp_pi), lp0_(lp_mu0), lp1_(lp_mu1), h_pi_(h_pi), h0_(h0), h1_(h1) {}

  double value(double eps) const {
    double total = 0.0;
    for (Eigen::Index i = 0; i < A_.size(); ++i) {
      const double zp = lp_pi_[i] + eps * h_pi_[i];
      total += stats::softplus(zp) - A_[i] * zp;
      if (A_[i] == 1.0) {
        const double z = lp1_[i] + eps * h1_[i];
        total += stats::softplus(z) - Y_[i] * z;
      } else {
        const double z = lp0_[i] + eps * h0_[i];
        total += stats::softplus(z) - Y_[i] * z;
      }
    }
    return total;
  }

  // First and second derivatives in eps.
  std::pair<double, double> derivatives(double eps) const {
    double g = 0.0;
    double h = 0.0;
    for (Eigen::Index i = 0; i < A_.size(); ++i) {
      const double pp = stats::expit(lp_pi_[i] + eps * h_pi_[i]);
      g += (pp - A_[i]) * h_pi_[i];
      h += pp * (1.0 - pp) * h_pi_[i] * h_pi_[i];
      const double cov = A_[i] == 1.0 ? h1_[i] : h0_[i];
      const double base = A_[i] == 1.0 ? lp1_[i] : lp0_[i];
      const double pm = stats::expit(base + eps * cov);
      g += (pm - Y_[i]) * cov;
      h += pm * (1.0 - pm) * cov * cov;
    }
    return {g, h};
  }

 private:
  const Eigen::VectorXd& A_;
  const Eigen::VectorXd& Y_;
  const Eigen::VectorXd& lp_pi_;
  const Eigen::VectorXd& lp0_;
  const Eigen::VectorXd& lp1_;
  const Eigen::VectorXd& h_pi_;
  const Eigen::VectorXd& h0_;
  const Eigen::VectorXd& h1_;
};

// The loss is convex in eps, so its derivative is monotone and bisection on
// the derivative sign is a safe fallback.
inline double bisect_derivative(const FluctuationLoss& loss, double lo, double hi) {
  if (loss.derivatives(lo).first >= 0.0) return lo;
  if (loss.derivatives(hi).first <= 0.0) return hi;
  for (int it = 0; it < 200 && hi - lo > 1e-16 * std::max(1.0, std::abs(lo)); ++it) {
    const double mid = 0.5 * (lo + hi);
    (loss.derivatives(mid).first > 0.0 ? hi : lo) = mid;
  }
  return 0.5 * (lo + hi);
}

inline double minimize_fluctuation(const FluctuationLoss& loss, double bound) {
  double eps = 0.0;
  double f = loss.value(eps);
  for (int it = 0; it < 100; ++it) {
    const auto [g, h] = loss.derivatives(eps);
    if (g == 0.0) return eps;
    if (!(h > 0.0) || !std::isfinite(h) || !std::isfinite(g))
      return bisect_derivative(loss, -bound, bound);
    double candidate = std::clamp(eps - g / h, -bound, bound);
    double fc = loss.value(candidate);
    for (int halving = 0; halving < 60 && fc > f; ++halving) {
      candidate = eps + 0.5 * (candidate - eps);
      fc = loss.value(candidate);
    }
    if (fc > f) return bisect_derivative(loss, -bound, bound);
    const double moved = std::abs(candidate - eps);
    eps = candidate;
    f = fc;
    if (moved <= 1e-15 * std::max(1.0, std::abs(eps))) break;
  }
  return eps;
}

inline Eigen::VectorXd logit_vector(const Eigen::VectorXd& p) {
  Eigen::VectorXd out(p.size());
  for (Eigen::Index i = 0; i < p.size(); ++i) out[i] = stats::logit(p[i]);
  return out;
}

inline Eigen::VectorXd expit_vector(const Eigen::VectorXd& z) {
  Eigen::VectorXd out(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) out[i] = stats::expit(z[i]);
  return out;
}

// Substitution estimates in the forms that keep them inside [-1, 1]:
//   L_s = mean{ mu1 s_g + (1 - mu0) s_l } - 1,  U_s = 1 - mean{ (1 - mu1) s_g + mu0 s_l }.
struct Substitution {
  double lower;
  double upper;
  double psi_s;
};

inline Substitution substitution(const Eigen::VectorXd& pi, const Eigen::VectorXd& mu0,
                                 const Eigen::VectorXd& mu1, const SmoothingSpec& spec) {
  double lo = 0.0, up = 0.0, psi = 0.0;
  for (Eigen::Index i = 0; i < pi.size(); ++i) {
    const double sg = s_greater(pi[i], spec.c, spec.gamma);
    const double sl = s_lower(pi[i], 1.0 - spec.c, spec.gamma);
    lo += mu1[i] * sg + (1.0 - mu0[i]) * sl;
    up += (1.0 - mu1[i]) * sg + mu0[i] * sl;
    psi += mu1[i] * sg - mu0[i] * sl;
  }
  const double n = static_cast<double>(pi.size());
  return {lo / n - 1.0, 1.0 - up / n, psi / n};
}

}  // namespace detail

/// Targets L_s (side = lower) or U_s (side = upper) by iterated loss
/// minimisation over the fluctuation submodels with clever covariates
///   mu1: s_g(pi, c)/pi,   mu0: -s_l(pi, 1 - c)/(1 - pi),
///   pi : mu1 ds_g - mu0 ds_l + M,  M = ds_l (lower) or -ds_g (upper).
/// With these covariates the loss score at eps = 0 is exactly
/// n * (mean(phi_side) - plug-in), so convergence solves the influence
/// function estimating equation.
inline TargetedSide tmle_target(const Dataset& data, const NuisanceEstimates& nuis,
                                const SmoothingSpec& spec, BoundSide side,
                                const TmleOptions& options = {}) {
  spec.validate();
  if (spec.c < kMinTargetThreshold) {
    std::ostringstream os;
    os << "targeted estimation needs c >= " << kMinTargetThreshold << " (got " << spec.c
       << "); with c = 0 the inverse weights are unbounded. Use a small positive threshold.";
    throw ParameterError(os.str());
  }
  if (nuis.n() != data.n()) throw DataError("nuisance estimates and data differ in length");
  if (data.n() < 2) throw DataError("targeted estimation needs at least two observations");
  if (options.max_iter < 1) throw ParameterError("max_iter must be at least 1");

  const Eigen::Index n = data.n();
  Eigen::VectorXd lp_pi = detail::logit_vector(nuis.pi);
  Eigen::VectorXd lp0 = detail::logit_vector(nuis.mu0);
  Eigen::VectorXd lp1 = detail::logit_vector(nuis.mu1);
  Eigen::VectorXd h_pi(n), h0(n), h1(n);

  TargetedSide out;
  out.side = side;
  double last_eps = std::numeric_limits<double>::infinity();
  for (int iter = 0;; ++iter) {
    out.pi = detail::expit_vector(lp_pi);
    out.mu0 = detail::expit_vector(lp0);
    out.mu1 = detail::expit_vector(lp1);
    const auto eif = detail::evaluate_eif(data.A, data.Y, out.pi, out.mu0, out.mu1, spec);
    const auto sub = detail::substitution(out.pi, out.mu0, out.mu1, spec);
    out.eif = side == BoundSide::lower ? eif.phi_L : eif.phi_U;
    out.estimate = side == BoundSide::lower ? sub.lower : sub.upper;
    out.psi_s = sub.psi_s;
    out.sigma = stats::sample_sd(std::span<const double>(out.eif.data(), static_cast<std::size_t>(n)));
    out.score_residual = out.eif.mean() - out.estimate;

    if (std::abs(last_eps) < options.eps_tol &&
        std::abs(out.score_residual) <= options.score_tol * out.sigma) {
      out.converged = true;
      break;
    }
    if (iter >= options.max_iter) break;

    for (Eigen::Index i = 0; i < n; ++i) {
      const auto sv = smoother_values(out.pi[i], spec);
      const double offset = side == BoundSide::lower ? sv.ds_l : -sv.ds_g;
      h_pi[i] = out.mu1[i] * sv.ds_g - out.mu0[i] * sv.ds_l + offset;
      h1[i] = detail::safe_ratio(sv.s_g, out.pi[i]);
      h0[i] = -detail::safe_ratio(sv.s_l, 1.0 - out.pi[i]);
    }
    const detail::FluctuationLoss loss(data.A, data.Y, lp_pi, lp0, lp1, h_pi, h0, h1);
    const double eps = detail::minimize_fluctuation(loss, options.eps_bound);
    out.epsilon_trace.push_back(eps);
    last_eps = eps;
    lp_pi += eps * h_pi;
    lp0 += eps * h0;
    lp1 += eps * h1;
  }
  return out;
}

/// Targeted smooth bounds for one (c, gamma) configuration.
struct BoundEstimate {
  SmoothingSpec spec;
  double psi_s_hat = 0.0;  ///< one-step estimate mean(phi_psi) at the initial nuisances
  double L_hat = 0.0;
  double U_hat = 0.0;
  double sigma_L = 0.0;
  double sigma_U = 0.0;
  EifVectors eif;  ///< phi_psi at the initial nuisances; phi_L, phi_U at the targeted ones
  std::vector<double> epsilon_trace_lower;
  std::vector<double> epsilon_trace_upper;
  bool converged = false;  ///< both sides converged
  double score_residual_lower = 0.0;
  double score_residual_upper = 0.0;

  Eigen::Index n() const { return eif.phi_L.size(); }
};

inline BoundEstimate estimate_bounds(const Dataset& data, const NuisanceEstimates& nuis,
                                     const SmoothingSpec& spec, const TmleOptions& options = {}) {
  auto lower = tmle_target(data, nuis, spec, BoundSide::lower, options);
  auto upper = tmle_target(data, nuis, spec, BoundSide::upper, options);
  BoundEstimate est;
  est.spec = spec;
  est.eif.phi_psi = eif_evaluate(data, nuis, spec).phi_psi;
  est.psi_s_hat = est.eif.phi_psi.mean();
  est.L_hat = lower.estimate;
  est.U_hat = upper.estimate;
  est.sigma_L = lower.sigma;
  est.sigma_U = upper.sigma;
  est.eif.phi_L = std::move(lower.eif);
  est.eif.phi_U = std::move(upper.eif);
  est.epsilon_trace_lower = std::move(lower.epsilon_trace);
  est.epsilon_trace_upper = std::move(upper.epsilon_trace);
  est.converged = lower.converged && upper.converged;
  est.score_residual_lower = lower.score_residual;
  est.score_residual_upper = upper.score_residual;
  return est;
}

/// Intersection of one-sided 1 - alpha/2 intervals for the two bounds:
/// [L - z sigma_L / sqrt(n), U + z sigma_U / sqrt(n)].
inline Interval pointwise_ci(double L_hat, double U_hat, double sigma_L, double sigma_U,
                             Eigen::Index n, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ParameterError("alpha must lie in (0, 1)");
  if (n < 1) throw ParameterError("sample size must be positive");
  const double z = stats::normal_quantile(1.0 - alpha / 2.0);
  const double root_n = std::sqrt(static_cast<double>(n));
  return {L_hat - z * sigma_L / root_n, U_hat + z * sigma_U / root_n};
}

inline Interval pointwise_ci(const BoundEstimate& est, double alpha) {
  return pointwise_ci(est.L_hat, est.U_hat, est.sigma_L, est.sigma_U, est.n(), alpha);
}

// ---------------------------------------------------------------------------
// Doubly robust one-step ATE benchmark

struct OneStepResult {
  double estimate = 0.0;
  double se = 0.0;
  Interval ci;
  double width = 0.0;  ///< min(2, 2 z se)
};

/// Mean of the classical uncentered ATE influence function
///   mu1 - mu0 + (A/pi - (1 - A)/(1 - pi)) (Y - mu_A).
inline OneStepResult onestep_ate(const Dataset& data, const NuisanceEstimates& nuis,
                                 double alpha = 0.05) {
  if (nuis.n() != data.n()) throw DataError("nuisance estimates and data differ in length");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ParameterError("alpha must lie in (0, 1)");
  const Eigen::Index n = data.n();
  std::vector<double> phi(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const double a = data.A[i];
    const double mu_a = a == 1.0 ? nuis.mu1[i] : nuis.mu0[i];
    const double weight = a / nuis.pi[i] - (1.0 - a) / (1.0 - nuis.pi[i]);
    phi[static_cast<std::size_t>(i)] = nuis.mu1[i] - nuis.mu0[i] + weight * (data.Y[i] - mu_a);
  }
  OneStepResult r;
  r.estimate = stats::mean(phi);
  r.se = stats::sample_sd(phi) / std::sqrt(static_cast<double>(n));
  const double z = stats::normal_quantile(1.0 - alpha / 2.0);
  r.ci = {r.estimate - z * r.se, r.estimate + z * r.se};
  r.width = std::min(2.0, 2.0 * z * r.se);
  return r;
}

}  // namespace nonoverlap
