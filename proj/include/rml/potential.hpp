#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace rml {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

enum class PotentialFamily { IsotropicQuadratic, DiagonalQuadratic, QuadraticPlusLogcosh };

std::string to_string(PotentialFamily family);

// Strongly convex potential f with analytic derivatives up to third order.
// Every registered family is separable and has its minimum at the origin.
//
//   isotropic-quadratic     f(x) = c/2 |x|^2
//   diagonal-quadratic      f(x) = sum_i c_i/2 x_i^2
//   quadratic-plus-logcosh  f(x) = sum_i (c/2 x_i^2 + eps log cosh x_i)
//
// For the log-cosh family the Hessian is diag(c + eps sech^2 x_i), so
// m = c and M = c + eps.
class Potential {
 public:
  static Potential isotropic_quadratic(int dim, double curvature = 1.0);
  static Potential diagonal_quadratic(std::vector<double> curvatures);
  static Potential quadratic_plus_logcosh(int dim, double curvature, double amplitude);

  /// Parses "isotropic-quadratic:d=2,c=1", "diagonal-quadratic:c=1|3" or
  /// "quadratic-plus-logcosh:d=1,c=1,eps=0.5".
  static Potential parse(const std::string& descriptor);

  PotentialFamily family() const noexcept { return family_; }
  int dim() const noexcept { return static_cast<int>(curvature_.size()); }
  double m() const noexcept { return m_; }
  double M() const noexcept { return M_; }
  double kappa() const noexcept { return M_ / m_; }
  double amplitude() const noexcept { return amplitude_; }
  const std::vector<double>& curvatures() const noexcept { return curvature_; }
  bool is_quadratic() const noexcept { return family_ != PotentialFamily::QuadraticPlusLogcosh; }
  std::string descriptor() const;

  Vec argmin() const { return Vec::Zero(dim()); }

  double value(const Vec& x) const;
  Vec grad(const Vec& x) const;
  /// Allocation-free gradient; `out` must already have size dim().
  void grad_into(const Vec& x, Vec& out) const;
  Mat hessian(const Vec& x) const;
  /// w_i = sum_jk D^3 f(x)_{ijk} a_j b_k.
  Vec d3_contract(const Vec& x, const Vec& a, const Vec& b) const;

 private:
  Potential(PotentialFamily family, std::vector<double> curvature, double amplitude);
  void check_dim(const Vec& v, const char* what) const;

  PotentialFamily family_;
  std::vector<double> curvature_;
  double amplitude_ = 0.0;
  double m_ = 0.0;
  double M_ = 0.0;
};

struct ProbeResult {
  Vec x;
  double min_eigenvalue = 0.0;
  double max_eigenvalue = 0.0;
  double lower_margin = 0.0;  // min_eigenvalue - m, must be >= 0
  double upper_margin = 0.0;  // M - max_eigenvalue, must be >= 0
  double grad_fd_error = 0.0;  // |grad - central FD| / (1 + |grad|)
  bool pass = true;
};

struct AssumptionReport {
  std::vector<ProbeResult> probes;
  bool all_pass = true;
};

/// Spot check of m I <= D^2 f <= M I and of the analytic gradient against
/// central differences (step 1e-5, relative tolerance 1e-6). Violations are
/// reported, not thrown.
AssumptionReport verify_assumption(const Potential& p, const std::vector<Vec>& probes);

}  // namespace rml
