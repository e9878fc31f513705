#pragma once

// Multiplier bootstrap for uniform confidence sets over a finite family of
// (c, gamma) configurations, and the narrowest ATE interval they imply.

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nonoverlap/bounds.hpp"
#include "nonoverlap/errors.hpp"
#include "nonoverlap/parallel.hpp"
#include "nonoverlap/random.hpp"
#include "nonoverlap/stats.hpp"

namespace nonoverlap {

enum class Multiplier { gaussian, rademacher };

struct BootstrapConfig {
  int B = 1000;
  double alpha = 0.05;
  Multiplier multiplier = Multiplier::gaussian;
  std::uint64_t seed = 1;
  int threads = 1;

  void validate() const {
    if (B < 1) throw ParameterError("bootstrap draws B must be at least 1");
    if (!(alpha > 0.0 && alpha < 1.0)) throw ParameterError("alpha must lie in (0, 1)");
  }
};

struct UniformInterval {
  SmoothingSpec spec;
  double L_hat = 0.0;
  double U_hat = 0.0;
  double lo = 0.0;
  double hi = 0.0;
};

struct UniformResult {
  double q_hat = 0.0;
  std::vector<UniformInterval> per_config;
  Interval narrowest;
  std::vector<double> boot_stats;  ///< M^(b), b = 1..B
  std::vector<std::string> warnings;
};

namespace detail {

// Draws per block; each block is one (block x n) by (n x 2K) product.
inline constexpr int kBootstrapBlock = 256;

inline void fill_multipliers(Eigen::Ref<Eigen::RowVectorXd> row, Multiplier kind,
                             std::uint64_t seed, std::uint64_t draw) {
  auto rng = make_engine(seed, {0x6d756c74ULL, draw});
  if (kind == Multiplier::gaussian) {
    std::normal_distribution<double> normal;
    for (Eigen::Index i = 0; i < row.size(); ++i) row[i] = normal(rng);
  } else {
    std::bernoulli_distribution coin;
    for (Eigen::Index i = 0; i < row.size(); ++i) row[i] = coin(rng) ? 1.0 : -1.0;
  }
}

}  // namespace detail

/// Max-max bootstrap. Column 2k of the residual matrix holds
/// (phi_L,k - L_k) / (sigma_L,k sqrt(n)) and column 2k+1 holds
/// -(phi_U,k - U_k) / (sigma_U,k sqrt(n)), so M^(b) is the largest entry of
/// xi^(b)' R for one multiplier vector xi^(b) shared by every statistic.
inline UniformResult multiplier_bootstrap(const std::vector<BoundEstimate>& estimates,
                                          const BootstrapConfig& cfg) {
  cfg.validate();
  if (estimates.empty()) throw ParameterError("multiplier bootstrap needs at least one configuration");
  const Eigen::Index n = estimates.front().n();
  if (n < 1) throw DataError("bound estimates carry no observations");
  for (const auto& e : estimates)
    if (e.n() != n || e.eif.phi_U.size() != n)
      throw DataError("all configurations must be estimated on the same observations");

  UniformResult out;
  if (cfg.B < 1000)
    out.warnings.push_back("B = " + std::to_string(cfg.B) +
                           " bootstrap draws; at least 1000 are recommended");

  const auto K = static_cast<Eigen::Index>(estimates.size());
  const double root_n = std::sqrt(static_cast<double>(n));
  Eigen::MatrixXd R = Eigen::MatrixXd::Zero(n, 2 * K);
  for (Eigen::Index k = 0; k < K; ++k) {
    const auto& e = estimates[static_cast<std::size_t>(k)];
    if (e.sigma_L > 0.0)
      R.col(2 * k) = (e.eif.phi_L.array() - e.L_hat) / (e.sigma_L * root_n);
    if (e.sigma_U > 0.0)
      R.col(2 * k + 1) = -(e.eif.phi_U.array() - e.U_hat) / (e.sigma_U * root_n);
  }

  out.boot_stats.assign(static_cast<std::size_t>(cfg.B), 0.0);
  const int blocks = (cfg.B + detail::kBootstrapBlock - 1) / detail::kBootstrapBlock;
  parallel_for(static_cast<std::size_t>(blocks), cfg.threads, [&](std::size_t blk) {
    const int first = static_cast<int>(blk) * detail::kBootstrapBlock;
    const int rows = std::min(detail::kBootstrapBlock, cfg.B - first);
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> xi(rows, n);
    for (int r = 0; r < rows; ++r)
      detail::fill_multipliers(xi.row(r), cfg.multiplier, cfg.seed,
                               static_cast<std::uint64_t>(first + r));
    const Eigen::MatrixXd T = xi * R;
    for (int r = 0; r < rows; ++r)
      out.boot_stats[static_cast<std::size_t>(first + r)] = T.row(r).maxCoeff();
  });

  // M^(b) can be negative for small K; a negative critical value would
  // shrink the bounds, so it is floored at zero.
  out.q_hat = std::max(0.0, stats::quantile_upper_order(out.boot_stats, 1.0 - cfg.alpha));

  out.narrowest = {-std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
  for (const auto& e : estimates) {
    UniformInterval ui{e.spec, e.L_hat, e.U_hat, e.L_hat - out.q_hat * e.sigma_L / root_n,
                       e.U_hat + out.q_hat * e.sigma_U / root_n};
    out.narrowest.lo = std::max(out.narrowest.lo, ui.lo);
    out.narrowest.hi = std::min(out.narrowest.hi, ui.hi);
    out.per_config.push_back(ui);
  }
  if (out.narrowest.lo > out.narrowest.hi)
    out.warnings.push_back("uniform intervals do not intersect; the narrowest interval is empty");
  return out;
}

/// True when zero lies outside the narrowest interval.
inline bool reject_null(const UniformResult& result) { return !result.narrowest.contains(0.0); }

}  // namespace nonoverlap
