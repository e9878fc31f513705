#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "nonoverlap/bounds.hpp"
#include "nonoverlap/simulation.hpp"
#include "support/quadrature_oracle.hpp"
#include "support/von_mises.hpp"

using namespace nonoverlap;

namespace {

NuisanceEstimates hand_nuisance() {
  NuisanceEstimates nu;
  nu.pi.resize(3);
  nu.mu0.resize(3);
  nu.mu1.resize(3);
  nu.pi << 0.05, 0.5, 0.95;
  nu.mu1 << 0.8, 0.6, 0.4;
  nu.mu0 << 0.2, 0.2, 0.2;
  return nu;
}

NuisanceEstimates random_nuisance(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  NuisanceEstimates nu;
  nu.pi.resize(n);
  nu.mu0.resize(n);
  nu.mu1.resize(n);
  for (int i = 0; i < n; ++i) {
    // a third of the mass near each edge so the smoothing windows are populated
    const double r = u(rng);
    nu.pi[i] = r < 1.0 / 3 ? 0.1 * u(rng) : (r < 2.0 / 3 ? 1.0 - 0.1 * u(rng) : u(rng));
    nu.mu0[i] = u(rng);
    nu.mu1[i] = u(rng);
  }
  return nu;
}

Dataset single(double a, double y) {
  Dataset d;
  d.X.resize(1, 0);
  d.A = Eigen::VectorXd::Constant(1, a);
  d.Y = Eigen::VectorXd::Constant(1, y);
  return d;
}

NuisanceEstimates single_nuis(double pi, double mu0, double mu1) {
  NuisanceEstimates nu;
  nu.pi = Eigen::VectorXd::Constant(1, pi);
  nu.mu0 = Eigen::VectorXd::Constant(1, mu0);
  nu.mu1 = Eigen::VectorXd::Constant(1, mu1);
  return nu;
}

}  // namespace

TEST(Bounds, HandInstance) {
  const auto nu = hand_nuisance();
  EXPECT_NEAR(psi_trimmed(nu, 0.1), 0.2, 1e-15);
  const auto b = bounds_nonsmooth(nu, 0.1);
  EXPECT_NEAR(b.lower, 0.2 - 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(b.upper, 0.2 + 1.0 / 3.0, 1e-15);
  for (double g : {1e-6, 0.02}) {
    const auto s = bounds_smooth_plugin(nu, {0.1, g});
    EXPECT_NEAR(psi_smooth(nu, {0.1, g}), 0.2, 1e-9);
    EXPECT_NEAR(s.lower, b.lower, 1e-9);
    EXPECT_NEAR(s.upper, b.upper, 1e-9);
  }
}

TEST(Bounds, NoTrimmingAtZeroThreshold) {
  const auto nu = hand_nuisance();
  const auto b = bounds_nonsmooth(nu, 0.0);
  EXPECT_NEAR(b.lower, (0.8 + 0.6 + 0.4 - 0.6) / 3.0, 1e-15);
  EXPECT_DOUBLE_EQ(b.lower, b.upper);
  EXPECT_THROW(bounds_nonsmooth(nu, 0.6), ParameterError);
}

TEST(Bounds, NestingOnRandomInputs) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> cu(0.0, 0.5), gu(1e-4, 0.3);
  for (int d = 0; d < 30; ++d) {
    const auto nu = random_nuisance(rng, 200);
    for (int k = 0; k < 20; ++k) {
      const SmoothingSpec s{cu(rng), gu(rng)};
      const auto b = bounds_nonsmooth(nu, s.c);
      const auto sm = bounds_smooth_plugin(nu, s);
      ASSERT_LE(sm.lower, b.lower);
      ASSERT_LE(b.lower, b.upper);
      ASSERT_LE(b.upper, sm.upper);
      ASSERT_GE(sm.lower, -1.0);
      ASSERT_LE(sm.upper, 1.0);
    }
  }
}

TEST(Bounds, SmoothWidthGrowsWithGamma) {
  std::mt19937_64 rng(4);
  const auto nu = random_nuisance(rng, 500);
  double prev = -1.0;
  for (double g : {1e-4, 1e-3, 1e-2, 0.05, 0.1, 0.2}) {
    const auto s = bounds_smooth_plugin(nu, {0.05, g});
    EXPECT_GE(s.upper - s.lower, prev);
    prev = s.upper - s.lower;
  }
}

TEST(Eif, SaturatedObservationIsClassicalAteEif) {
  const SmoothingSpec s{0.01, 0.01};
  for (double a : {0.0, 1.0}) {
    const auto phi = eif_evaluate(single(a, 1.0), single_nuis(0.4, 0.3, 0.7), s);
    const double classical = 0.7 - 0.3 + (a / 0.4 - (1.0 - a) / 0.6) * (1.0 - (a == 1.0 ? 0.7 : 0.3));
    EXPECT_NEAR(phi.phi_psi[0], classical, 1e-14);
    EXPECT_NEAR(phi.phi_L[0], classical, 1e-14);
    EXPECT_NEAR(phi.phi_U[0], classical, 1e-14);
  }
}

TEST(Eif, TrimmedTreatedObservationHasNoWeight) {
  const SmoothingSpec s{0.1, 0.05};
  const auto phi = eif_evaluate(single(1.0, 1.0), single_nuis(0.02, 0.3, 0.7), s);
  EXPECT_DOUBLE_EQ(phi.phi_psi[0], -0.3);
  EXPECT_DOUBLE_EQ(phi.phi_L[0], -0.3);
  EXPECT_DOUBLE_EQ(phi.phi_U[0], 1.0 - 0.3);
}

TEST(Eif, NonFiniteValueNamesObservation) {
  const SmoothingSpec s{0.1, 0.05};
  try {
    eif_evaluate(single(1.0, 1.0), single_nuis(0.5, std::nan(""), 0.7), s);
    FAIL();
  } catch (const InternalError& e) {
    EXPECT_NE(std::string(e.what()).find("observation 0"), std::string::npos);
  }
}

TEST(Eif, MonteCarloMeanMatchesPopulationFunctionals) {
  DgpConfig cfg;
  cfg.n = 200000;
  cfg.overlap_alpha = 3.0;
  auto rng = make_engine(21, {});
  const auto sim = sample_dgp(cfg, rng);
  NuisanceEstimates nu;
  nu.pi = sim.true_pi;
  nu.mu0.resize(cfg.n);
  nu.mu1.resize(cfg.n);
  for (int i = 0; i < cfg.n; ++i) {
    nu.mu0[i] = stats::expit(0.5 + sim.data.X(i, 0));
    nu.mu1[i] = stats::expit(1.5 + sim.data.X(i, 0));
  }
  const double c = 0.05, g = 0.05;
  const auto phi = eif_evaluate(sim.data, nu, {c, g});
  const auto q = oracle::nodes();
  const auto truth = oracle::functionals(oracle::truth_nuisance({}), c, g, q);
  const double se = 1.0 / std::sqrt(static_cast<double>(cfg.n));
  auto sd = [](const Eigen::VectorXd& v) {
    return std::sqrt((v.array() - v.mean()).square().sum() / static_cast<double>(v.size() - 1));
  };
  EXPECT_NEAR(phi.phi_psi.mean(), truth.psi_s, 4.0 * sd(phi.phi_psi) * se);
  EXPECT_NEAR(phi.phi_L.mean(), truth.L_s, 4.0 * sd(phi.phi_L) * se);
  EXPECT_NEAR(phi.phi_U.mean(), truth.U_s, 4.0 * sd(phi.phi_U) * se);
}

TEST(Eif, QuadratureFunctionalsNestAroundExactBounds) {
  const auto q = oracle::nodes();
  const auto eta = oracle::truth_nuisance({});
  for (double c : {0.01, 0.05, 0.2}) {
    const auto sm = oracle::functionals(eta, c, 0.02, q);
    const auto ns = oracle::nonsmooth(eta, c, q);
    EXPECT_LE(sm.L_s, ns.L_s + 1e-12);
    EXPECT_LE(ns.U_s, sm.U_s + 1e-12);
  }
}

TEST(Eif, VonMisesRemainderIsSecondOrder) {
  const oracle::Truth tr;
  const auto q = oracle::nodes();
  const double c = 0.02, g = 0.05;
  for (double t : {0.1, 0.05}) {
    const auto big = oracle::remainders(tr, c, g, t, q);
    const auto small = oracle::remainders(tr, c, g, t / 2.0, q);
    for (auto [num, den] : {std::pair{big.psi_s, small.psi_s}, std::pair{big.L_s, small.L_s},
                            std::pair{big.U_s, small.U_s}}) {
      const double ratio = num / den;
      EXPECT_GE(ratio, 3.0) << "t = " << t;
      EXPECT_LE(ratio, 5.0) << "t = " << t;
    }
  }
}

TEST(Ci, PointwiseExamples) {
  const auto ci = pointwise_ci(0.0, 0.1, 1.0, 1.0, 100, 0.05);
  EXPECT_NEAR(ci.lo, -0.1959963984540054, 1e-12);
  EXPECT_NEAR(ci.hi, 0.2959963984540054, 1e-12);
  const auto flat = pointwise_ci(-0.2, 0.3, 0.0, 0.0, 50, 0.05);
  EXPECT_DOUBLE_EQ(flat.lo, -0.2);
  EXPECT_DOUBLE_EQ(flat.hi, 0.3);
  EXPECT_THROW(pointwise_ci(0.0, 0.1, 1.0, 1.0, 100, 1.5), ParameterError);
}

TEST(OneStep, SmallFixtures) {
  Dataset d;
  d.X.resize(2, 0);
  d.A.resize(2);
  d.Y.resize(2);
  d.A << 1, 0;
  d.Y << 1, 0;
  NuisanceEstimates nu;
  nu.pi = Eigen::VectorXd::Constant(2, 0.5);
  nu.mu0 = Eigen::VectorXd::Constant(2, 1e-6);
  nu.mu1 = Eigen::VectorXd::Constant(2, 1.0 - 1e-6);
  const auto r = onestep_ate(d, nu);
  EXPECT_NEAR(r.estimate, 1.0, 1e-12);
  EXPECT_NEAR(r.se, 0.0, 1e-12);

  nu.mu1 = Eigen::VectorXd::Constant(2, 0.7);
  nu.mu0 = Eigen::VectorXd::Constant(2, 0.3);
  d.Y << 0.7, 0.3;
  const auto flat = onestep_ate(d, nu);
  EXPECT_NEAR(flat.estimate, 0.4, 1e-15);
  EXPECT_NEAR(flat.se, 0.0, 1e-15);

  nu.mu1 = nu.mu0;
  d.Y << 0.3, 0.3;
  const auto zero = onestep_ate(d, nu);
  EXPECT_EQ(zero.estimate, 0.0);
  EXPECT_EQ(zero.se, 0.0);
  EXPECT_EQ(zero.width, 0.0);
}

TEST(OneStep, WidthCappedAtTwo) {
  Dataset d;
  d.X.resize(2, 0);
  d.A.resize(2);
  d.Y.resize(2);
  d.A << 1, 1;
  d.Y << 1, 0;
  NuisanceEstimates nu;
  nu.pi = Eigen::VectorXd::Constant(2, 0.01);
  nu.mu0 = Eigen::VectorXd::Constant(2, 0.5);
  nu.mu1 = Eigen::VectorXd::Constant(2, 0.5);
  EXPECT_EQ(onestep_ate(d, nu).width, 2.0);
}
