#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include <boost/math/distributions/normal.hpp>

#include "nonoverlap/errors.hpp"

namespace nonoverlap::stats {

inline double mean(std::span<const double> v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

/// Unbiased (n - 1) sample variance; zero for fewer than two values.
inline double sample_variance(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return ss / static_cast<double>(v.size() - 1);
}

inline double sample_sd(std::span<const double> v) { return std::sqrt(sample_variance(v)); }

/// Standard normal quantile.
inline double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw ParameterError("normal quantile level must lie in (0, 1)");
  return boost::math::quantile(boost::math::normal_distribution<double>{}, p);
}

/// Linear-interpolation sample quantile (Hyndman-Fan type 7, R's default).
inline double quantile_type7(std::vector<double> v, double p) {
  if (v.empty()) return std::nan("");
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

/// Order statistic X_(ceil(p * B)) (1-based), the conservative empirical quantile.
inline double quantile_upper_order(std::vector<double> v, double p) {
  if (v.empty()) return std::nan("");
  auto k = static_cast<std::size_t>(std::ceil(p * static_cast<double>(v.size()) - 1e-12));
  k = std::clamp<std::size_t>(k, 1, v.size());
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k - 1), v.end());
  return v[k - 1];
}

inline double expit(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

inline double logit(double p) { return std::log(p / (1.0 - p)); }

/// log(1 + exp(z)) without overflow.
inline double softplus(double z) {
  return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

/// 10^e for e = from, from + step, ... while e <= to (R's seq semantics).
inline std::vector<double> log10_grid(double from, double to, double step) {
  if (!(step > 0.0) || !std::isfinite(from) || !std::isfinite(to))
    throw ParameterError("log grid needs finite endpoints and a positive step");
  std::vector<double> out;
  const double span = (to - from) / step;
  if (span < -1e-10) throw ParameterError("log grid end precedes its start");
  const auto count = static_cast<long>(std::floor(span + 1e-10)) + 1;
  for (long k = 0; k < count; ++k) out.push_back(std::pow(10.0, from + static_cast<double>(k) * step));
  return out;
}

}  // namespace nonoverlap::stats
