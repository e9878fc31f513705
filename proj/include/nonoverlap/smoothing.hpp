#pragma once

// Smooth below-approximations of the propensity-score indicators 1(x < t)
// and 1(x > t). Both use the C-infinity bump
//
//   s(u) = 1 - exp(1 + 1 / (u^2 - 1)),   u = (x - t) / gamma,  |u| < 1,
//
// which equals 0 at u = 0 and tends to 1 as |u| -> 1. Outside the window the
// smoothers are constant, and every value is <= the indicator it replaces.

#include <cmath>
#include <sstream>

#include "nonoverlap/errors.hpp"

namespace nonoverlap {

/// One (c, gamma) configuration: trimming threshold c in [0, 1/2] and
/// smoothness gamma > 0.
struct SmoothingSpec {
  double c = 0.0;
  double gamma = 0.0;

  void validate() const {
    if (!(c >= 0.0 && c <= 0.5)) {
      std::ostringstream os;
      os << "threshold c must lie in [0, 1/2], got " << c;
      throw ParameterError(os.str());
    }
    if (!(gamma > 0.0) || !std::isfinite(gamma)) {
      std::ostringstream os;
      os << "smoothness gamma must be a positive finite number, got " << gamma;
      throw ParameterError(os.str());
    }
  }

  friend bool operator==(const SmoothingSpec&, const SmoothingSpec&) = default;
};

namespace detail {

inline void check_smoother_args(double threshold, double gamma) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    std::ostringstream os;
    os << "smoother threshold must lie in [0, 1], got " << threshold;
    throw ParameterError(os.str());
  }
  if (!(gamma > 0.0) || !std::isfinite(gamma)) {
    std::ostringstream os;
    os << "smoothness gamma must be a positive finite number, got " << gamma;
    throw ParameterError(os.str());
  }
}

// exp(1 + 1/(u^2 - 1)) for |u| < 1. The exponent tends to -inf at the window
// edge; anything below -700 is returned as exactly zero.
inline double bump_exp(double u) {
  const double e = 1.0 + 1.0 / (u * u - 1.0);
  return e < -700.0 ? 0.0 : std::exp(e);
}

// d/dx of 1 - bump_exp((x - t)/gamma).
inline double bump_slope(double u, double gamma) {
  const double d = u * u - 1.0;
  const double b = bump_exp(u);
  if (b == 0.0) return 0.0;
  return b * 2.0 * u / (gamma * d * d);
}

}  // namespace detail

/// Approximates 1(x < threshold) from below: 1 for x <= threshold - gamma,
/// 0 for x >= threshold.
inline double s_lower(double x, double threshold, double gamma) {
  detail::check_smoother_args(threshold, gamma);
  if (x >= threshold) return 0.0;
  if (x <= threshold - gamma) return 1.0;
  return 1.0 - detail::bump_exp((x - threshold) / gamma);
}

/// Approximates 1(x > threshold) from below: 1 for x >= threshold + gamma,
/// 0 for x <= threshold.
inline double s_greater(double x, double threshold, double gamma) {
  detail::check_smoother_args(threshold, gamma);
  if (x <= threshold) return 0.0;
  if (x >= threshold + gamma) return 1.0;
  return 1.0 - detail::bump_exp((x - threshold) / gamma);
}

/// Exact derivative of s_lower in x; zero on the constant branches and at the
/// junctions.
inline double ds_lower(double x, double threshold, double gamma) {
  detail::check_smoother_args(threshold, gamma);
  if (x >= threshold || x <= threshold - gamma) return 0.0;
  return detail::bump_slope((x - threshold) / gamma, gamma);
}

inline double ds_greater(double x, double threshold, double gamma) {
  detail::check_smoother_args(threshold, gamma);
  if (x <= threshold || x >= threshold + gamma) return 0.0;
  return detail::bump_slope((x - threshold) / gamma, gamma);
}

inline double s_lower(double x, const SmoothingSpec& spec) {
  spec.validate();
  return s_lower(x, spec.c, spec.gamma);
}
inline double s_greater(double x, const SmoothingSpec& spec) {
  spec.validate();
  return s_greater(x, spec.c, spec.gamma);
}
inline double ds_lower(double x, const SmoothingSpec& spec) {
  spec.validate();
  return ds_lower(x, spec.c, spec.gamma);
}
inline double ds_greater(double x, const SmoothingSpec& spec) {
  spec.validate();
  return ds_greater(x, spec.c, spec.gamma);
}

/// Smoother values and slopes at one propensity score for a configuration:
/// s_g(pi, c, gamma) and s_l(pi, 1 - c, gamma), the two weights that enter
/// the smooth bounds and their influence functions.
struct SmootherValues {
  double s_g;
  double s_l;
  double ds_g;
  double ds_l;
};

inline SmootherValues smoother_values(double pi, const SmoothingSpec& spec) {
  const double upper = 1.0 - spec.c;
  return {s_greater(pi, spec.c, spec.gamma), s_lower(pi, upper, spec.gamma),
          ds_greater(pi, spec.c, spec.gamma), ds_lower(pi, upper, spec.gamma)};
}

}  // namespace nonoverlap
