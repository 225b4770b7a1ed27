#pragma once

#include <vector>

#include "rml/potential.hpp"

namespace rml {

struct BiasBoundInput {
  double m = 1.0;
  double M = 1.0;
  int d = 1;
  double h = 0.1;
  double C1 = 82500.0;
  double C2 = 99000.0;

  double kappa() const { return M / m; }
  static BiasBoundInput from_potential(const Potential& p, double h);
};

/// 3 sqrt(d h) (1 + 2 M h)^2 / (1/kappa - M h / sqrt 3) for h in (0, 2/(m + M)).
/// Throws std::domain_error outside the window or for a non-positive denominator.
double rlmc_bias_bound(const BiasBoundInput& in);

/// sqrt(C1 h^3 (kappa h^3 + 1) d / (1 - h/(4 kappa) - C2 h^3 kappa (1 + kappa h^3))).
/// Throws std::domain_error when the denominator is not positive.
double rulmc_bias_bound(const BiasBoundInput& in);

/// True when the corresponding bound is defined at `in`.
bool rlmc_bound_valid(const BiasBoundInput& in);
bool rulmc_bound_valid(const BiasBoundInput& in);

/// Stationary per-coordinate variance of RLMC with constant step h on |x|^2/2:
/// (2h - 2h^2 + h^3) / (1 - [(1-h)^2 + (1-h)h^2 + h^4/3]).
double rlmc_stationary_variance_quadratic(double h);

/// Stationary variance of LMC with constant step h on |x|^2/2: 2h / (1 - (1-h)^2).
double lmc_stationary_variance_quadratic(double h);

/// Exact W2 between the empirical measures of two equal-size 1-d samples.
double w2_empirical_1d(std::vector<double> a, std::vector<double> b);

/// W2 between N(mu1, diag(s1^2)) and N(mu2, diag(s2^2)).
double w2_gaussian_diag(const Vec& mu1, const Vec& s1, const Vec& mu2, const Vec& s2);

/// Least-squares slope of log y against log x.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace rml
