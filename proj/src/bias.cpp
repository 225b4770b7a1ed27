#include "rml/bias.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rml {

BiasBoundInput BiasBoundInput::from_potential(const Potential& p, double h) {
  BiasBoundInput in;
  in.m = p.m();
  in.M = p.M();
  in.d = p.dim();
  in.h = h;
  return in;
}

namespace {

void check_common(const BiasBoundInput& in) {
  if (!(in.m > 0.0 && in.M >= in.m)) throw std::invalid_argument("bias bound needs 0 < m <= M");
  if (in.d <= 0) throw std::invalid_argument("bias bound needs d >= 1");
  if (!(in.h > 0.0)) throw std::domain_error("bias bound needs h > 0");
}

double rlmc_denominator(const BiasBoundInput& in) { return 1.0 / in.kappa() - in.M * in.h / std::sqrt(3.0); }

double rulmc_denominator(const BiasBoundInput& in) {
  const double k = in.kappa();
  const double h3 = in.h * in.h * in.h;
  return 1.0 - in.h / (4.0 * k) - in.C2 * h3 * k * (1.0 + k * h3);
}

}  // namespace

bool rlmc_bound_valid(const BiasBoundInput& in) {
  return in.h > 0.0 && in.h < 2.0 / (in.m + in.M) && rlmc_denominator(in) > 0.0;
}

bool rulmc_bound_valid(const BiasBoundInput& in) { return in.h > 0.0 && rulmc_denominator(in) > 0.0; }

double rlmc_bias_bound(const BiasBoundInput& in) {
  check_common(in);
  if (!(in.h < 2.0 / (in.m + in.M))) throw std::domain_error("rlmc bias bound needs h < 2/(m + M)");
  const double den = rlmc_denominator(in);
  if (!(den > 0.0)) throw std::domain_error("rlmc bias bound needs 1/kappa > M h / sqrt(3)");
  const double g = 1.0 + 2.0 * in.M * in.h;
  return 3.0 * std::sqrt(in.d * in.h) * g * g / den;
}

double rulmc_bias_bound(const BiasBoundInput& in) {
  check_common(in);
  const double den = rulmc_denominator(in);
  if (!(den > 0.0)) throw std::domain_error("rulmc bias bound denominator is not positive; h is too large");
  const double k = in.kappa();
  const double h3 = in.h * in.h * in.h;
  return std::sqrt(in.C1 * h3 * (k * h3 + 1.0) * in.d / den);
}

double rlmc_stationary_variance_quadratic(double h) {
  if (!(h > 0.0)) throw std::domain_error("step size must be positive");
  // x' = a x + xi with a = 1 - h + alpha h^2, Var(xi | alpha) = 2h - 4 alpha h^2 + 2 alpha h^3.
  const double ea2 = (1.0 - h) * (1.0 - h) + (1.0 - h) * h * h + h * h * h * h / 3.0;
  if (!(ea2 < 1.0)) throw std::domain_error("RLMC chain is not mean-square stable at this step size");
  return (2.0 * h - 2.0 * h * h + h * h * h) / (1.0 - ea2);
}

double lmc_stationary_variance_quadratic(double h) {
  if (!(h > 0.0 && h < 2.0)) throw std::domain_error("LMC chain is not stable at this step size");
  return 2.0 * h / (1.0 - (1.0 - h) * (1.0 - h));
}

double w2_empirical_1d(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("w2_empirical_1d: empty sample");
  if (a.size() != b.size()) throw std::invalid_argument("w2_empirical_1d: sample sizes differ");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double diff = a[i] - b[i];
    s += diff * diff;
  }
  return std::sqrt(s / static_cast<double>(a.size()));
}

double w2_gaussian_diag(const Vec& mu1, const Vec& s1, const Vec& mu2, const Vec& s2) {
  if (mu1.size() != mu2.size() || s1.size() != s2.size() || mu1.size() != s1.size()) {
    throw std::invalid_argument("w2_gaussian_diag: dimension mismatch");
  }
  if ((s1.array() <= 0.0).any() || (s2.array() <= 0.0).any()) {
    throw std::invalid_argument("w2_gaussian_diag: standard deviations must be positive");
  }
  return std::sqrt((mu1 - mu2).squaredNorm() + (s1 - s2).squaredNorm());
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("loglog_slope: need two matching points");
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0 && y[i] > 0.0)) throw std::domain_error("loglog_slope: values must be positive");
    const double lx = std::log(x[i]);
    const double ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace rml
