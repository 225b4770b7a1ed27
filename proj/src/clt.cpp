#include "rml/clt.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <thread>

#include "rml/descriptor.hpp"

namespace rml {

// ---------------------------------------------------------------- normal

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double inverse_normal_cdf(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("inverse_normal_cdf: p must lie in (0, 1)");
  // Acklam's rational approximation (relative error < 1.2e-9).
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01, -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  // Halley step on normal_cdf(x) - p.
  const double e = normal_cdf(x) - p;
  const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

// ---------------------------------------------------------------- quadrature

GaussHermiteRule gauss_hermite(int n) {
  if (n < 1) throw std::invalid_argument("gauss_hermite: need at least one node");
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd sub(std::max(n - 1, 0));
  for (int k = 1; k < n; ++k) sub[k - 1] = std::sqrt(static_cast<double>(k));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
  es.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
  GaussHermiteRule r;
  r.nodes.resize(n);
  r.weights.resize(n);
  // Orthonormal Hermite values p_0..p_{n-1} at x, and p_n, p_n'.
  auto evaluate = [n](double x, double& pn, double& dpn) {
    double prev = 0.0, cur = 1.0, sum = 1.0;
    for (int k = 0; k < n; ++k) {
      const double next = (x * cur - std::sqrt(static_cast<double>(k)) * prev) / std::sqrt(static_cast<double>(k + 1));
      prev = cur;
      cur = next;
      if (k + 1 < n) sum += cur * cur;
    }
    pn = cur;
    dpn = std::sqrt(static_cast<double>(n)) * prev;
    return sum;
  };
  for (int i = 0; i < n; ++i) {
    double x = es.eigenvalues()[i];
    double pn = 0.0, dpn = 0.0;
    for (int it = 0; it < 3; ++it) {
      evaluate(x, pn, dpn);
      if (dpn != 0.0) x -= pn / dpn;
    }
    r.nodes[i] = x;
    r.weights[i] = 1.0 / evaluate(x, pn, dpn);
  }
  // Symmetrize against rounding.
  for (int i = 0; i < n / 2; ++i) {
    const int j = n - 1 - i;
    const double x = 0.5 * (r.nodes[j] - r.nodes[i]);
    const double w = 0.5 * (r.weights[i] + r.weights[j]);
    r.nodes[i] = -x;
    r.nodes[j] = x;
    r.weights[i] = r.weights[j] = w;
  }
  if (n % 2 == 1) r.nodes[n / 2] = 0.0;
  return r;
}

namespace {

constexpr double kMaxGridPoints = 4e6;

double log_cosh(double t) {
  const double a = std::abs(t);
  return a + std::log1p(std::exp(-2.0 * a)) - std::numbers::ln2;
}

struct Axis {
  std::vector<double> x;
  std::vector<double> w;
};

// Per-coordinate nodes/weights for the marginal of pi on coordinate i.
// Gaussian marginals use the Hermite nodes. The log-cosh marginal uses the
// trapezoid rule on [-12 s, 12 s] with 4 * nodes + 1 points.
Axis target_axis(const Potential& p, int i, const GaussHermiteRule& gh) {
  Axis a;
  const double c = p.curvatures()[static_cast<std::size_t>(i)];
  const double s = 1.0 / std::sqrt(c);
  if (p.is_quadratic()) {
    for (std::size_t k = 0; k < gh.nodes.size(); ++k) {
      a.x.push_back(gh.nodes[k] * s);
      a.w.push_back(gh.weights[k]);
    }
    return a;
  }
  const int m = 2 * static_cast<int>(gh.nodes.size());
  const double step = 12.0 * s / m;
  double total = 0.0;
  for (int k = -m; k <= m; ++k) {
    const double x = k * step;
    const double w = std::exp(-0.5 * c * x * x - p.amplitude() * log_cosh(x));
    a.x.push_back(x);
    a.w.push_back(w);
    total += w;
  }
  for (double& w : a.w) w /= total;
  return a;
}

Axis gaussian_axis(double var, const GaussHermiteRule& gh) {
  Axis a;
  const double s = std::sqrt(var);
  for (std::size_t k = 0; k < gh.nodes.size(); ++k) {
    a.x.push_back(gh.nodes[k] * s);
    a.w.push_back(gh.weights[k]);
  }
  return a;
}

// Sum over the tensor grid of the given axes; fills `point` coordinate by coordinate.
template <class F>
double tensor_sum(const std::vector<Axis>& axes, Vec& point, F&& f) {
  const std::size_t dims = axes.size();
  double points = 1.0;
  for (const Axis& a : axes) points *= static_cast<double>(a.x.size());
  if (points > kMaxGridPoints) throw std::domain_error("quadrature grid too large; use the Monte Carlo oracle");
  std::vector<std::size_t> idx(dims, 0);
  CompensatedSum acc;
  while (true) {
    double w = 1.0;
    for (std::size_t j = 0; j < dims; ++j) {
      point[static_cast<Eigen::Index>(j)] = axes[j].x[idx[j]];
      w *= axes[j].w[idx[j]];
    }
    acc.add(w * f(point));
    std::size_t j = 0;
    while (j < dims && ++idx[j] == axes[j].x.size()) {
      idx[j] = 0;
      ++j;
    }
    if (j == dims) break;
  }
  return acc.value();
}

struct Welford {
  std::uint64_t n = 0;
  double mean = 0.0;
  double m2 = 0.0;
  void add(double v) {
    ++n;
    const double d = v - mean;
    mean += d / static_cast<double>(n);
    m2 += d * (v - mean);
  }
  Estimate estimate() const {
    const double var = n > 1 ? m2 / static_cast<double>(n - 1) : 0.0;
    return {mean, std::sqrt(var / static_cast<double>(n))};
  }
};

constexpr std::uint64_t kOracleStream = 0x6f7261636c65ULL;

}  // namespace

void sample_target(const Potential& p, RngStream& rng, Vec& out) {
  out.resize(p.dim());
  for (int i = 0; i < p.dim(); ++i) {
    const double s = 1.0 / std::sqrt(p.curvatures()[static_cast<std::size_t>(i)]);
    if (p.is_quadratic()) {
      out[i] = s * rng.normal();
      continue;
    }
    while (true) {
      const double y = s * rng.normal();
      if (rng.uniform() < std::exp(-p.amplitude() * log_cosh(y))) {
        out[i] = y;
        break;
      }
    }
  }
}

QuadratureOracle QuadratureOracle::gauss_hermite(int nodes) {
  if (nodes < 1) throw std::invalid_argument("quadrature oracle needs at least one node");
  return QuadratureOracle(Rule::GaussHermite, nodes, 0, 0);
}

QuadratureOracle QuadratureOracle::monte_carlo(std::uint64_t samples, std::uint64_t seed) {
  if (samples < 2) throw std::invalid_argument("Monte Carlo oracle needs at least two samples");
  return QuadratureOracle(Rule::MonteCarlo, 0, samples, seed);
}

std::string QuadratureOracle::describe() const {
  if (rule_ == Rule::GaussHermite) return "gauss-hermite:nodes=" + std::to_string(nodes_);
  return "monte-carlo:samples=" + std::to_string(samples_) + ",seed=" + std::to_string(seed_);
}

double QuadratureOracle::grid_pi(const Potential& p, const FnX& h, int nodes) const {
  const GaussHermiteRule gh = rml::gauss_hermite(nodes);
  std::vector<Axis> axes;
  for (int i = 0; i < p.dim(); ++i) axes.push_back(target_axis(p, i, gh));
  Vec point(p.dim());
  return tensor_sum(axes, point, [&](const Vec& x) { return h(x); });
}

double QuadratureOracle::grid_joint(const Potential& p, double w_var, const FnXW& h, int nodes) const {
  const GaussHermiteRule gh = rml::gauss_hermite(nodes);
  const int d = p.dim();
  std::vector<Axis> axes;
  for (int i = 0; i < d; ++i) axes.push_back(target_axis(p, i, gh));
  for (int i = 0; i < d; ++i) axes.push_back(gaussian_axis(w_var, gh));
  Vec point(2 * d);
  Vec x(d), w(d);
  return tensor_sum(axes, point, [&](const Vec& z) {
    x = z.head(d);
    w = z.tail(d);
    return h(x, w);
  });
}

Estimate QuadratureOracle::checked_grid(const Potential& p, int degree,
                                        const std::function<double(int)>& at) const {
  if (p.is_quadratic()) {
    if (degree > 2 * nodes_ - 1) {
      throw std::domain_error("quadrature oracle under-resolved: integrand degree " + std::to_string(degree) +
                              " exceeds " + std::to_string(2 * nodes_ - 1));
    }
    return {at(nodes_), 0.0};
  }
  const double coarse = at(nodes_);
  const double fine = at(nodes_ + 8);
  const double change = std::abs(fine - coarse);
  if (change > 1e-8 * (1.0 + std::abs(fine))) {
    throw std::domain_error("quadrature oracle under-resolved: refinement changed the value by " +
                            format_double(change));
  }
  return {fine, change};
}

Estimate QuadratureOracle::expect_pi(const Potential& p, const FnX& h, int degree) const {
  if (rule_ == Rule::GaussHermite) {
    return checked_grid(p, degree, [&](int n) { return grid_pi(p, h, n); });
  }
  RngStream rng(seed_, kOracleStream);
  Vec x(p.dim());
  Welford acc;
  for (std::uint64_t s = 0; s < samples_; ++s) {
    sample_target(p, rng, x);
    acc.add(h(x));
  }
  return acc.estimate();
}

Estimate QuadratureOracle::expect_aux(const Potential& p, double w_var, const FnXW& direct, const FnX& reduced,
                                      int degree) const {
  if (rule_ == Rule::GaussHermite) return expect_pi(p, reduced, degree);
  RngStream rng(seed_, kOracleStream + 1);
  const double s = std::sqrt(w_var);
  Vec x(p.dim()), w(p.dim());
  Welford acc;
  for (std::uint64_t k = 0; k < samples_; ++k) {
    sample_target(p, rng, x);
    for (int i = 0; i < p.dim(); ++i) w[i] = s * rng.normal();
    acc.add(direct(x, w));
  }
  return acc.estimate();
}

Estimate QuadratureOracle::expect_joint(const Potential& p, double w_var, const FnXW& h, int degree) const {
  if (rule_ == Rule::GaussHermite) {
    return checked_grid(p, degree, [&](int n) { return grid_joint(p, w_var, h, n); });
  }
  return expect_aux(p, w_var, h, nullptr, degree);
}

// ---------------------------------------------------------------- constants

namespace {

Vec unit(int d, int j) {
  Vec e = Vec::Zero(d);
  e[j] = 1.0;
  return e;
}

// sum_j T(x)[., j, j] for a symmetric third-order tensor given by its contraction.
template <class C3>
Vec trace_pair(int d, C3&& contract) {
  Vec acc = Vec::Zero(d);
  for (int j = 0; j < d; ++j) {
    const Vec e = unit(d, j);
    acc += contract(e, e);
  }
  return acc;
}

// sum_{i,j} D^4 phi_{iijj}
double d4_double_trace(const TestFunction& phi, const Vec& x) {
  const int d = static_cast<int>(x.size());
  double s = 0.0;
  for (int i = 0; i < d; ++i) {
    const Vec ei = unit(d, i);
    for (int j = 0; j < d; ++j) {
      const Vec ej = unit(d, j);
      s += phi.d4_contract(x, ei, ej, ej)[i];
    }
  }
  return s;
}

void check_position_function(const TestFunction& phi, const Potential& p) {
  if (phi.dim() != p.dim()) throw std::invalid_argument("test function and potential dimensions differ");
}

Estimate sum_terms(const std::vector<Estimate>& t) {
  Estimate s;
  double var = 0.0;
  for (const Estimate& e : t) {
    s.value += e.value;
    var += e.std_error * e.std_error;
  }
  // Terms share draws, so this is an indicative error only.
  s.std_error = std::sqrt(var);
  return s;
}

}  // namespace

Estimate asym_variance_overdamped(const TestFunction& phi, const Potential& p, const QuadratureOracle& oracle) {
  check_position_function(phi, p);
  const int degree = 2 * std::max(phi.degree() - 1, 0);
  Estimate e = oracle.expect_pi(p, [&](const Vec& x) { return phi.gradient(x).squaredNorm(); }, degree);
  return {2.0 * e.value, 2.0 * e.std_error};
}

BiasTerms asym_bias_rho_overdamped(const TestFunction& phi, const Potential& p, const QuadratureOracle& oracle) {
  check_position_function(phi, p);
  const int d = p.dim();
  const int degree = 2 * phi.degree() + 2;
  BiasTerms out;
  // <D^3 phi, grad f (x) u (x) u>
  out.terms.push_back(oracle.expect_aux(
      p, 1.0, [&](const Vec& x, const Vec& u) { return p.grad(x).dot(phi.d3_contract(x, u, u)); },
      [&](const Vec& x) {
        return p.grad(x).dot(trace_pair(d, [&](const Vec& a, const Vec& b) { return phi.d3_contract(x, a, b); }));
      },
      degree));
  // -1/2 <D^2 f, grad phi (x) grad f>
  out.terms.push_back(oracle.expect_pi(
      p, [&](const Vec& x) { return -0.5 * phi.gradient(x).dot(p.hessian(x) * p.grad(x)); }, degree));
  // +1/2 <D^3 f, grad phi (x) u (x) u>
  out.terms.push_back(oracle.expect_aux(
      p, 1.0, [&](const Vec& x, const Vec& u) { return 0.5 * phi.gradient(x).dot(p.d3_contract(x, u, u)); },
      [&](const Vec& x) {
        return 0.5 * phi.gradient(x).dot(trace_pair(d, [&](const Vec& a, const Vec& b) { return p.d3_contract(x, a, b); }));
      },
      degree));
  // -1/2 <D^2 phi, grad f (x) grad f>
  out.terms.push_back(oracle.expect_pi(
      p,
      [&](const Vec& x) {
        const Vec g = p.grad(x);
        return -0.5 * g.dot(phi.hessian(x) * g);
      },
      degree));
  // trace((D^2 phi)^2)
  out.terms.push_back(oracle.expect_pi(p, [&](const Vec& x) { return phi.hessian(x).squaredNorm(); }, degree));
  // -1/6 <D^4 phi, u^{(x)4}>
  out.terms.push_back(oracle.expect_aux(
      p, 1.0, [&](const Vec& x, const Vec& u) { return -phi.d4_contract(x, u, u, u).dot(u) / 6.0; },
      [&](const Vec& x) { return -0.5 * d4_double_trace(phi, x); }, degree));
  out.total = sum_terms(out.terms);
  return out;
}

Estimate asym_variance_underdamped(const TestFunction& g_in, double u, const Potential& p,
                                   const QuadratureOracle& oracle) {
  if (!(u > 0.0)) throw std::invalid_argument("inverse mass must be positive");
  const int d = p.dim();
  const TestFunction g = g_in.dim() == d ? g_in.lift_to_phase_space() : g_in;
  if (g.dim() != 2 * d) throw std::invalid_argument("test function must be over x or (x, v)");
  if (!g.depends_on(d, d)) return {0.0, 0.0};
  Vec z(2 * d);
  const int degree = 2 * std::max(g.degree() - 1, 0);
  const Estimate e = oracle.expect_joint(
      p, u,
      [&](const Vec& x, const Vec& v) {
        z << x, v;
        return g.gradient(z).tail(d).squaredNorm();
      },
      degree);
  return {4.0 * u * e.value, 4.0 * u * e.std_error};
}

KineticConstants kinetic_special_law(const TestFunction& phi, double u, const Potential& p, SamplerKind kind,
                                     const QuadratureOracle& oracle) {
  check_position_function(phi, p);
  if (!(u > 0.0)) throw std::invalid_argument("inverse mass must be positive");
  if (kind != SamplerKind::Rulmc && kind != SamplerKind::Klmc) {
    throw std::invalid_argument("kinetic_special_law: sampler must be rulmc or klmc");
  }
  const int d = p.dim();
  const int degree = 2 * phi.degree() + 2;
  KineticConstants k;
  k.kind = kind;
  k.u = u;
  const Estimate g2 = oracle.expect_pi(p, [&](const Vec& x) { return phi.gradient(x).squaredNorm(); },
                                       2 * std::max(phi.degree() - 1, 0));
  k.variance = {10.0 / 3.0 * u * g2.value, 10.0 / 3.0 * u * g2.std_error};

  const bool rulmc = kind == SamplerKind::Rulmc;
  const double c1 = rulmc ? 5.0 * u / 12.0 : u / 6.0;
  const double c3 = rulmc ? 7.0 * u / 12.0 : u / 12.0;
  auto& t = k.rho.terms;
  // c1 <D^3 phi, grad f (x) v (x) v>
  t.push_back(oracle.expect_aux(
      p, u, [&](const Vec& x, const Vec& v) { return c1 * p.grad(x).dot(phi.d3_contract(x, v, v)); },
      [&](const Vec& x) {
        return c1 * u *
               p.grad(x).dot(trace_pair(d, [&](const Vec& a, const Vec& b) { return phi.d3_contract(x, a, b); }));
      },
      degree));
  // u/24 <D^3 f, grad phi (x) v (x) v>
  t.push_back(oracle.expect_aux(
      p, u, [&](const Vec& x, const Vec& v) { return u / 24.0 * phi.gradient(x).dot(p.d3_contract(x, v, v)); },
      [&](const Vec& x) {
        return u / 24.0 * u *
               phi.gradient(x).dot(trace_pair(d, [&](const Vec& a, const Vec& b) { return p.d3_contract(x, a, b); }));
      },
      degree));
  // c3 v^T D^2 phi D^2 f v
  t.push_back(oracle.expect_aux(
      p, u, [&](const Vec& x, const Vec& v) { return c3 * v.dot(phi.hessian(x) * (p.hessian(x) * v)); },
      [&](const Vec& x) { return c3 * u * (phi.hessian(x) * p.hessian(x)).trace(); }, degree));
  if (rulmc) {
    // -u^2/4 <D^2 phi, grad f (x) grad f>
    t.push_back(oracle.expect_pi(
        p,
        [&](const Vec& x) {
          const Vec g = p.grad(x);
          return -u * u / 4.0 * g.dot(phi.hessian(x) * g);
        },
        degree));
  } else {
    // -1/12 <D^4 phi, v^{(x)4}>
    t.push_back(oracle.expect_aux(
        p, u, [&](const Vec& x, const Vec& v) { return -phi.d4_contract(x, v, v, v).dot(v) / 12.0; },
        [&](const Vec& x) { return -3.0 * u * u * d4_double_trace(phi, x) / 12.0; }, degree));
  }
  // -u^2/24 <D^2 f, grad phi (x) grad f>
  t.push_back(oracle.expect_pi(
      p, [&](const Vec& x) { return -u * u / 24.0 * phi.gradient(x).dot(p.hessian(x) * p.grad(x)); }, degree));
  k.rho.total = sum_terms(t);
  return k;
}

// ---------------------------------------------------------------- laws

std::string to_string(Normalizer n) {
  switch (n) {
    case Normalizer::SqrtGamma:
      return "sqrt(Gamma_n)";
    case Normalizer::GammaOverSqrtGamma3:
      return "Gamma_n/sqrt(Gamma3_n)";
    case Normalizer::GammaOverGamma2:
      return "Gamma_n/Gamma2_n";
    case Normalizer::GammaOverGamma4:
      return "Gamma_n/Gamma4_n";
  }
  return "unknown";
}

double normalizer_value(Normalizer n, const std::array<double, 4>& g) {
  switch (n) {
    case Normalizer::SqrtGamma:
      return std::sqrt(g[0]);
    case Normalizer::GammaOverSqrtGamma3:
      return g[0] / std::sqrt(g[2]);
    case Normalizer::GammaOverGamma2:
      return g[0] / g[1];
    case Normalizer::GammaOverGamma4:
      return g[0] / g[3];
  }
  return std::nan("");
}

double normalizer_value(Normalizer n, const Schedule& s) {
  return normalizer_value(n, {s.gamma_sum(1), s.gamma_sum(2), s.gamma_sum(3), s.gamma_sum(4)});
}

nlohmann::json AsymptoticLaw::to_json() const {
  nlohmann::json j;
  j["normalizer"] = to_string(normalizer);
  j["mean"] = mean;
  j["variance"] = variance;
  j["regime"] = regime.label();
  j["setting"] = to_string(regime.setting);
  j["gamma_hat"] = regime.gamma_hat_definition;
  j["rate_exponent"] = regime.rate_exponent;
  if (!note.empty()) j["note"] = note;
  return j;
}

AsymptoticLaw overdamped_law(double variance, double varrho, const RegimeReport& regime) {
  AsymptoticLaw law;
  law.regime = regime;
  switch (regime.regime) {
    case Regime::Zero:
      law.normalizer = Normalizer::SqrtGamma;
      law.variance = variance;
      break;
    case Regime::Finite:
      law.normalizer = Normalizer::SqrtGamma;
      law.mean = varrho * regime.value;
      law.variance = variance;
      break;
    case Regime::Infinite:
      law.normalizer = Normalizer::GammaOverGamma2;
      law.mean = varrho;
      law.note = "convergence in probability to the bias constant";
      break;
  }
  return law;
}

AsymptoticLaw kinetic_law(const KineticConstants& k, const RegimeReport& regime) {
  AsymptoticLaw law;
  law.regime = regime;
  law.note = "variance uses the squared gradient integrand";
  switch (regime.regime) {
    case Regime::Zero:
      law.normalizer = Normalizer::GammaOverSqrtGamma3;
      law.variance = k.variance.value;
      break;
    case Regime::Finite:
      law.normalizer = Normalizer::GammaOverGamma4;
      law.mean = k.rho.total.value;
      law.variance = k.variance.value / (regime.value * regime.value);
      break;
    case Regime::Infinite:
      law.normalizer = Normalizer::GammaOverGamma4;
      law.mean = k.rho.total.value;
      law.note += "; convergence in probability to the bias constant";
      break;
  }
  return law;
}

AsymptoticLaw underdamped_law(double variance, const RegimeReport& overdamped_regime) {
  if (overdamped_regime.regime != Regime::Zero) {
    throw std::domain_error("general underdamped CLT is only available in the unbiased regime");
  }
  AsymptoticLaw law;
  law.regime = overdamped_regime;
  law.normalizer = Normalizer::SqrtGamma;
  law.variance = variance;
  return law;
}

Interval confidence_interval(double estimate, double normalizer, const AsymptoticLaw& law, double level) {
  if (law.regime.regime == Regime::Infinite) throw std::domain_error("biased regime: no confidence interval");
  if (!(level >= 0.0 && level < 1.0)) throw std::invalid_argument("confidence level must lie in [0, 1)");
  if (!(normalizer > 0.0)) throw std::invalid_argument("normalizer must be positive");
  if (law.variance < 0.0) throw std::invalid_argument("negative asymptotic variance");
  Interval iv;
  iv.center = estimate - law.mean / normalizer;
  const double z = level == 0.0 ? 0.0 : inverse_normal_cdf(0.5 + 0.5 * level);
  iv.half_width = z * std::sqrt(law.variance) / normalizer;
  iv.lower = iv.center - iv.half_width;
  iv.upper = iv.center + iv.half_width;
  return iv;
}

// ---------------------------------------------------------------- replicates

std::vector<ReplicateOutcome> run_replicates(const ReplicateSpec& spec, std::size_t replicates, unsigned workers) {
  if (spec.n_steps == 0) throw std::invalid_argument("run_replicates: n_steps must be positive");
  Schedule::parse(spec.schedule);  // validate up front
  std::vector<ReplicateOutcome> out(replicates);
  std::atomic<std::size_t> next{0};
  auto work = [&]() {
    while (true) {
      const std::size_t r = next.fetch_add(1);
      if (r >= replicates) return;
      ReplicateOutcome& o = out[r];
      o.replicate = r;
      o.stream = spec.same_stream ? 0 : r;
      try {
        Schedule schedule = Schedule::parse(spec.schedule);
        RngStream rng(spec.seed, o.stream);
        AveragingObserver avg(spec.observable, &schedule, spec.checkpoints);
        run_chain(spec.sampler, spec.potential, schedule, spec.n_steps, {&avg}, rng);
        o.estimate = avg.average().value();
        for (int l = 0; l < 4; ++l) o.gamma_sums[static_cast<std::size_t>(l)] = schedule.gamma_sum(l + 1);
        o.checkpoints = avg.checkpoints();
        o.ok = true;
      } catch (const DivergenceError& e) {
        o.error = e.what();
        o.failed_step = e.step();
      } catch (const std::exception& e) {
        o.error = e.what();
      }
    }
  };
  const unsigned n_threads = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(replicates)));
  if (n_threads == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  return out;
}

std::vector<double> standardized_statistics(const std::vector<ReplicateOutcome>& outcomes, const AsymptoticLaw& law) {
  std::vector<double> s;
  for (const auto& o : outcomes) {
    if (!o.ok) continue;
    s.push_back(normalizer_value(law.normalizer, o.gamma_sums) * o.estimate - law.mean);
  }
  return s;
}

nlohmann::json NormalityReport::to_json() const {
  nlohmann::json j{{"n", n},       {"ks", ks},           {"critical", critical}, {"pass", pass},
                   {"mean", mean}, {"variance", variance}, {"skewness", skewness}};
  if (!note.empty()) j["note"] = note;
  return j;
}

NormalityReport normality_check(const std::vector<double>& stats, double target_variance, double coefficient) {
  NormalityReport r;
  r.n = stats.size();
  if (r.n > 0) {
    double m = 0.0;
    for (double s : stats) m += s;
    m /= static_cast<double>(r.n);
    double m2 = 0.0, m3 = 0.0;
    for (double s : stats) {
      const double c = s - m;
      m2 += c * c;
      m3 += c * c * c;
    }
    r.mean = m;
    r.variance = r.n > 1 ? m2 / static_cast<double>(r.n - 1) : 0.0;
    const double pop = m2 / static_cast<double>(r.n);
    r.skewness = pop > 0.0 ? (m3 / static_cast<double>(r.n)) / std::pow(pop, 1.5) : 0.0;
  }
  if (r.n < 50) {
    r.note = "fewer than 50 statistics";
    return r;
  }
  if (!(target_variance > 0.0)) {
    r.note = "target variance must be positive";
    return r;
  }
  std::vector<double> z(stats);
  const double scale = 1.0 / std::sqrt(target_variance);
  for (double& v : z) v *= scale;
  std::sort(z.begin(), z.end());
  const double n = static_cast<double>(z.size());
  double dmax = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double f = normal_cdf(z[i]);
    dmax = std::max({dmax, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
  }
  r.ks = dmax;
  r.critical = coefficient / std::sqrt(n);
  r.pass = r.ks <= r.critical;
  return r;
}

}  // namespace rml
