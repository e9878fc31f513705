#pragma once

// Population quantities of the simulation DGP by quadrature over X1 ~ U(-1, 1)
// and the three X2 strata. Smoothers are re-implemented here from their
// branch definitions so the population functionals do not share code with
// the library.

#include <array>
#include <cmath>
#include <functional>
#include <vector>

namespace oracle {

struct Truth {
  double alpha = 3.0;
  double b0 = 0.5;
  double b1 = 1.0;
  double bA = 1.0;
};

inline double expit_q(double z) { return 1.0 / (1.0 + std::exp(-z)); }
inline double logit_q(double p) { return std::log(p / (1.0 - p)); }

inline double bump(double u) { return std::exp(1.0 + 1.0 / (u * u - 1.0)); }

// 1 - exp(1 + 1/(u^2 - 1)) on the open window, 0 / 1 outside.
inline double sg(double x, double t, double g) {
  if (x <= t) return 0.0;
  if (x >= t + g) return 1.0;
  return 1.0 - bump((x - t) / g);
}
inline double sl(double x, double t, double g) {
  if (x >= t) return 0.0;
  if (x <= t - g) return 1.0;
  return 1.0 - bump((x - t) / g);
}

struct Node {
  double x1;
  double x2;
  double weight;  // probability mass, sums to 1
};

/// Composite Gauss-Legendre (8 points per panel) over x1 times the X2 strata.
inline std::vector<Node> nodes(int panels = 400) {
  static const std::array<double, 8> gx{-0.9602898564975363, -0.7966664774136267, -0.5255324099163290,
                                        -0.1834346424956498, 0.1834346424956498,  0.5255324099163290,
                                        0.7966664774136267,  0.9602898564975363};
  static const std::array<double, 8> gw{0.1012285362903763, 0.2223810344533745, 0.3137066458778873,
                                        0.3626837833783620, 0.3626837833783620, 0.3137066458778873,
                                        0.2223810344533745, 0.1012285362903763};
  const std::array<double, 3> x2v{-1.0, 0.0, 1.0};
  const std::array<double, 3> x2p{0.05, 0.9, 0.05};
  std::vector<Node> out;
  const double h = 2.0 / panels;
  for (int s = 0; s < 3; ++s)
    for (int p = 0; p < panels; ++p) {
      const double mid = -1.0 + (p + 0.5) * h;
      for (int k = 0; k < 8; ++k)
        out.push_back({mid + 0.5 * h * gx[k], x2v[s], x2p[s] * 0.5 * (0.5 * h * gw[k])});
    }
  return out;
}

/// Nuisance functions, optionally perturbed on the logit scale by t * h(x).
struct Nuisance {
  std::function<double(double, double)> pi;
  std::function<double(double, double)> mu0;
  std::function<double(double, double)> mu1;
};

inline Nuisance truth_nuisance(const Truth& tr) {
  return {[tr](double x1, double x2) { return expit_q(x1 + tr.alpha * x2); },
          [tr](double x1, double) { return expit_q(tr.b0 + tr.b1 * x1); },
          [tr](double x1, double) { return expit_q(tr.b0 + tr.b1 * x1 + tr.bA); }};
}

inline Nuisance perturbed(const Nuisance& base, double t) {
  return {[base, t](double x1, double x2) { return expit_q(logit_q(base.pi(x1, x2)) + t * (1.0 + x1)); },
          [base, t](double x1, double x2) {
            return expit_q(logit_q(base.mu0(x1, x2)) + t * (std::cos(x1) + x2));
          },
          [base, t](double x1, double x2) { return expit_q(logit_q(base.mu1(x1, x2)) + t * (0.5 - x1)); }};
}

struct Functionals {
  double psi_s;
  double L_s;
  double U_s;
};

inline Functionals functionals(const Nuisance& eta, double c, double g, const std::vector<Node>& q) {
  double psi = 0.0, msl = 0.0, msg = 0.0;
  for (const auto& nd : q) {
    const double p = eta.pi(nd.x1, nd.x2);
    const double a = sg(p, c, g), b = sl(p, 1.0 - c, g);
    psi += nd.weight * (eta.mu1(nd.x1, nd.x2) * a - eta.mu0(nd.x1, nd.x2) * b);
    msl += nd.weight * b;
    msg += nd.weight * a;
  }
  return {psi, psi - (1.0 - msl), psi + (1.0 - msg)};
}

/// Exact non-overlap bounds for threshold c under the unperturbed truth.
inline Functionals nonsmooth(const Nuisance& eta, double c, const std::vector<Node>& q) {
  double psi = 0.0, lo_mass = 0.0, hi_mass = 0.0;
  for (const auto& nd : q) {
    const double p = eta.pi(nd.x1, nd.x2);
    psi += nd.weight * (eta.mu1(nd.x1, nd.x2) * (p > c) - eta.mu0(nd.x1, nd.x2) * (p < 1.0 - c));
    hi_mass += nd.weight * (p >= 1.0 - c);
    lo_mass += nd.weight * (p <= c);
  }
  return {psi, psi - hi_mass, psi + lo_mass};
}

}  // namespace oracle
