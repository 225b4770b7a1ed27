#include "rml/potential.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "rml/descriptor.hpp"

namespace rml {

namespace {

// log cosh(t) without overflow for large |t|.
double log_cosh(double t) {
  const double a = std::abs(t);
  return a + std::log1p(std::exp(-2.0 * a)) - std::log(2.0);
}

double sech2(double t) {
  const double c = std::cosh(t);
  return 1.0 / (c * c);
}

}  // namespace

std::string to_string(PotentialFamily family) {
  switch (family) {
    case PotentialFamily::IsotropicQuadratic:
      return "isotropic-quadratic";
    case PotentialFamily::DiagonalQuadratic:
      return "diagonal-quadratic";
    case PotentialFamily::QuadraticPlusLogcosh:
      return "quadratic-plus-logcosh";
  }
  return "unknown";
}

Potential::Potential(PotentialFamily family, std::vector<double> curvature, double amplitude)
    : family_(family), curvature_(std::move(curvature)), amplitude_(amplitude) {
  if (curvature_.empty()) throw std::invalid_argument("potential dimension must be positive");
  for (double c : curvature_) {
    if (!(c > 0.0) || !std::isfinite(c)) {
      throw std::invalid_argument("curvatures must be positive and finite");
    }
  }
  if (!(amplitude_ >= 0.0) || !std::isfinite(amplitude_)) {
    throw std::invalid_argument("log-cosh amplitude must be non-negative");
  }
  m_ = *std::min_element(curvature_.begin(), curvature_.end());
  M_ = *std::max_element(curvature_.begin(), curvature_.end()) + amplitude_;
}

Potential Potential::isotropic_quadratic(int dim, double curvature) {
  if (dim <= 0) throw std::invalid_argument("potential dimension must be positive");
  return Potential(PotentialFamily::IsotropicQuadratic,
                   std::vector<double>(static_cast<std::size_t>(dim), curvature), 0.0);
}

Potential Potential::diagonal_quadratic(std::vector<double> curvatures) {
  return Potential(PotentialFamily::DiagonalQuadratic, std::move(curvatures), 0.0);
}

Potential Potential::quadratic_plus_logcosh(int dim, double curvature, double amplitude) {
  if (dim <= 0) throw std::invalid_argument("potential dimension must be positive");
  return Potential(PotentialFamily::QuadraticPlusLogcosh,
                   std::vector<double>(static_cast<std::size_t>(dim), curvature), amplitude);
}

Potential Potential::parse(const std::string& descriptor) {
  const Descriptor d = Descriptor::parse(descriptor);
  if (d.name == "isotropic-quadratic") {
    d.require_only({"d", "c"});
    return isotropic_quadratic(static_cast<int>(d.number_or("d", 1)), d.number_or("c", 1.0));
  }
  if (d.name == "diagonal-quadratic") {
    d.require_only({"c"});
    return diagonal_quadratic(d.numbers("c"));
  }
  if (d.name == "quadratic-plus-logcosh") {
    d.require_only({"d", "c", "eps"});
    return quadratic_plus_logcosh(static_cast<int>(d.number_or("d", 1)), d.number_or("c", 1.0),
                                  d.number_or("eps", 0.5));
  }
  throw std::invalid_argument("unknown potential family '" + d.name + "'");
}

std::string Potential::descriptor() const {
  switch (family_) {
    case PotentialFamily::IsotropicQuadratic:
      return "isotropic-quadratic:d=" + std::to_string(dim()) + ",c=" + format_double(curvature_[0]);
    case PotentialFamily::DiagonalQuadratic: {
      std::string s = "diagonal-quadratic:c=";
      for (std::size_t i = 0; i < curvature_.size(); ++i) {
        if (i) s += "|";
        s += format_double(curvature_[i]);
      }
      return s;
    }
    case PotentialFamily::QuadraticPlusLogcosh:
      return "quadratic-plus-logcosh:d=" + std::to_string(dim()) +
             ",c=" + format_double(curvature_[0]) + ",eps=" + format_double(amplitude_);
  }
  return {};
}

void Potential::check_dim(const Vec& v, const char* what) const {
  if (v.size() != dim()) {
    throw std::invalid_argument(std::string("dimension mismatch in ") + what + ": expected " +
                                std::to_string(dim()) + ", got " + std::to_string(v.size()));
  }
}

double Potential::value(const Vec& x) const {
  check_dim(x, "Potential::value");
  double f = 0.0;
  for (int i = 0; i < dim(); ++i) {
    f += 0.5 * curvature_[i] * x[i] * x[i];
    if (amplitude_ != 0.0) f += amplitude_ * log_cosh(x[i]);
  }
  return f;
}

void Potential::grad_into(const Vec& x, Vec& out) const {
  const int d = dim();
  if (amplitude_ == 0.0) {
    for (int i = 0; i < d; ++i) out[i] = curvature_[i] * x[i];
  } else {
    for (int i = 0; i < d; ++i) out[i] = curvature_[i] * x[i] + amplitude_ * std::tanh(x[i]);
  }
}

Vec Potential::grad(const Vec& x) const {
  check_dim(x, "Potential::grad");
  Vec g(dim());
  grad_into(x, g);
  return g;
}

Mat Potential::hessian(const Vec& x) const {
  check_dim(x, "Potential::hessian");
  Mat h = Mat::Zero(dim(), dim());
  for (int i = 0; i < dim(); ++i) {
    h(i, i) = curvature_[i] + (amplitude_ != 0.0 ? amplitude_ * sech2(x[i]) : 0.0);
  }
  return h;
}

Vec Potential::d3_contract(const Vec& x, const Vec& a, const Vec& b) const {
  check_dim(x, "Potential::d3_contract");
  check_dim(a, "Potential::d3_contract");
  check_dim(b, "Potential::d3_contract");
  Vec out = Vec::Zero(dim());
  if (amplitude_ == 0.0) return out;
  for (int i = 0; i < dim(); ++i) {
    // (log cosh)''' = -2 sech^2 tanh
    out[i] = amplitude_ * (-2.0 * sech2(x[i]) * std::tanh(x[i])) * a[i] * b[i];
  }
  return out;
}

AssumptionReport verify_assumption(const Potential& p, const std::vector<Vec>& probes) {
  if (probes.empty()) throw std::invalid_argument("verify_assumption needs at least one probe");
  constexpr double kStep = 1e-5;
  constexpr double kTol = 1e-6;
  // Eigenvalue bounds are compared with a rounding allowance only.
  const double eig_tol = 64.0 * std::numeric_limits<double>::epsilon() * p.M();
  AssumptionReport report;
  for (const Vec& x : probes) {
    ProbeResult r;
    r.x = x;
    const Eigen::SelfAdjointEigenSolver<Mat> es(p.hessian(x), Eigen::EigenvaluesOnly);
    r.min_eigenvalue = es.eigenvalues().minCoeff();
    r.max_eigenvalue = es.eigenvalues().maxCoeff();
    r.lower_margin = r.min_eigenvalue - p.m();
    r.upper_margin = p.M() - r.max_eigenvalue;
    const Vec g = p.grad(x);
    Vec fd(p.dim());
    for (int i = 0; i < p.dim(); ++i) {
      Vec xp = x, xm = x;
      xp[i] += kStep;
      xm[i] -= kStep;
      fd[i] = (p.value(xp) - p.value(xm)) / (2.0 * kStep);
    }
    r.grad_fd_error = (g - fd).norm() / (1.0 + g.norm());
    r.pass = r.lower_margin >= -eig_tol && r.upper_margin >= -eig_tol && r.grad_fd_error <= kTol;
    report.all_pass = report.all_pass && r.pass;
    report.probes.push_back(std::move(r));
  }
  return report;
}

}  // namespace rml
