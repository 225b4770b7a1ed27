#include "rml/noise.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rml {

std::string to_string(SamplerKind kind) {
  switch (kind) {
    case SamplerKind::Lmc:
      return "lmc";
    case SamplerKind::Rlmc:
      return "rlmc";
    case SamplerKind::Klmc:
      return "klmc";
    case SamplerKind::Rulmc:
      return "rulmc";
  }
  return "unknown";
}

SamplerKind parse_sampler_kind(const std::string& name) {
  if (name == "lmc") return SamplerKind::Lmc;
  if (name == "rlmc") return SamplerKind::Rlmc;
  if (name == "klmc") return SamplerKind::Klmc;
  if (name == "rulmc") return SamplerKind::Rulmc;
  throw std::invalid_argument("unknown sampler kind '" + name + "'");
}

bool is_underdamped(SamplerKind kind) noexcept {
  return kind == SamplerKind::Klmc || kind == SamplerKind::Rulmc;
}

namespace kernel {

// Both integrals lose all significant digits to cancellation for small a when
// written in closed form, so below the cutoff they are summed from
//   (1 - e^{-2r})   = -sum_{k>=1} (-2r)^k / k!
//   (1 - e^{-2r})^2 =  sum_{k>=2} ((-4)^k - 2 (-2)^k) r^k / k!
// integrated term by term.
constexpr double kSeriesCutoff = 0.25;

double ou_int1(double a) {
  if (a < kSeriesCutoff) {
    double sum = 0.0;
    double term_pow = -2.0 * a;  // (-2a)^k
    double fact = 1.0;           // (k+1)!
    for (int k = 1; k < 30; ++k) {
      fact *= static_cast<double>(k + 1);
      const double t = -term_pow * a / fact;
      sum += t;
      if (std::abs(t) < 1e-18 * std::abs(sum)) break;
      term_pow *= -2.0 * a;
    }
    return sum;
  }
  return a + 0.5 * std::expm1(-2.0 * a);
}

double ou_int2(double a) {
  if (a < kSeriesCutoff) {
    double sum = 0.0;
    double p4 = 16.0;  // (-4)^k for k = 2
    double p2 = 4.0;   // (-2)^k for k = 2
    double apow = a * a * a;  // a^(k+1)
    double fact = 6.0;        // (k+1)!
    for (int k = 2; k < 40; ++k) {
      const double t = (p4 - 2.0 * p2) * apow / fact;
      sum += t;
      if (std::abs(t) < 1e-18 * std::abs(sum)) break;
      p4 *= -4.0;
      p2 *= -2.0;
      apow *= a;
      fact *= static_cast<double>(k + 2);
    }
    return sum;
  }
  return a - 0.25 * std::expm1(-4.0 * a) + std::expm1(-2.0 * a);
}

}  // namespace kernel

NoiseGram rlmc_gram(double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("rlmc_gram: alpha must lie in [0, 1]");
  NoiseGram g;
  g.order = 2;
  g.tag = SamplerKind::Rlmc;
  g.alpha = alpha;
  const double c = std::sqrt(alpha);
  g.entries(0, 0) = 1.0;
  g.entries(1, 1) = 1.0;
  g.entries(0, 1) = g.entries(1, 0) = c;
  return g;
}

namespace detail {

NoiseGram rulmc_gram_unchecked(double alpha, double gamma) {
  NoiseGram g;
  g.order = 3;
  g.tag = SamplerKind::Rulmc;
  g.alpha = alpha;
  g.gamma = gamma;
  const double a = alpha * gamma;
  const double decay = std::exp(-2.0 * gamma);
  const double sa = std::sinh(a);
  const double sg = std::sinh(gamma);
  // G12 = int_0^a (1 - e^{-2r})(1 - e^{-2(b + r)}) dr with b = gamma - a, split as
  // (1 - e^{-2b}) int1(a) + e^{-2b} int2(a): both pieces are non-negative.
  const double b = gamma - a;
  const double g12 = -std::expm1(-2.0 * b) * kernel::ou_int1(a) + std::exp(-2.0 * b) * kernel::ou_int2(a);
  g.entries(0, 0) = kernel::ou_int2(a);
  g.entries(1, 1) = kernel::ou_int2(gamma);
  g.entries(2, 2) = -0.25 * std::expm1(-4.0 * gamma);
  g.entries(0, 1) = g.entries(1, 0) = g12;
  g.entries(1, 2) = g.entries(2, 1) = decay * sg * sg;
  g.entries(0, 2) = g.entries(2, 0) = decay * sa * sa;
  return g;
}

}  // namespace detail

NoiseGram rulmc_gram(double alpha, double gamma) {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw std::invalid_argument("rulmc_gram: gamma must be positive");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("rulmc_gram: alpha must lie in [0, 1]");
  NoiseGram g = detail::rulmc_gram_unchecked(alpha, gamma);
  if (min_eigenvalue(g) < -1e-12) {
    throw std::domain_error("rulmc_gram: Gram matrix is not positive semidefinite");
  }
  return g;
}

NoiseGram klmc_gram(double gamma) {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw std::invalid_argument("klmc_gram: gamma must be positive");
  NoiseGram g;
  g.order = 2;
  g.tag = SamplerKind::Klmc;
  g.gamma = gamma;
  const double e = std::expm1(-2.0 * gamma);
  g.entries(0, 0) = kernel::ou_int2(gamma);
  g.entries(1, 1) = -0.25 * std::expm1(-4.0 * gamma);
  g.entries(0, 1) = g.entries(1, 0) = 0.25 * e * e;
  return g;
}

double min_eigenvalue(const NoiseGram& g) {
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g.matrix(), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

GramFactor factorize(const NoiseGram& g) {
  GramFactor f;
  f.order = g.order;
  const int n = g.order;
  double scale = 0.0;
  for (int i = 0; i < n; ++i) scale = std::max(scale, std::abs(g.entries(i, i)));
  if (scale == 0.0) return f;
  const Eigen::MatrixXd block = g.entries.topLeftCorner(n, n);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(block);
  Eigen::VectorXd lam = es.eigenvalues();
  if (lam.minCoeff() < -1e-9 * scale) {
    throw std::domain_error("factorize: noise Gram matrix is materially indefinite");
  }
  for (Eigen::Index k = 0; k < n; ++k) lam[k] = lam[k] <= 1e-12 * scale ? 0.0 : std::sqrt(lam[k]);
  f.root.topLeftCorner(n, n) = es.eigenvectors() * lam.asDiagonal();
  return f;
}

void sample_block_into(const GramFactor& factor, RngStream& rng, Vec* out[]) {
  const int n = factor.order;
  const Eigen::Index dim = out[0]->size();
  const Eigen::Matrix3d& R = factor.root;
  for (Eigen::Index c = 0; c < dim; ++c) {
    double z[3] = {0.0, 0.0, 0.0};
    for (int k = 0; k < n; ++k) z[k] = rng.normal();
    for (int i = 0; i < n; ++i) {
      double s = 0.0;
      for (int k = 0; k < n; ++k) s += R(i, k) * z[k];
      (*out[i])[c] = s;
    }
  }
}

std::vector<Vec> sample_block(const NoiseGram& g, int dim, RngStream& rng) {
  if (dim <= 0) throw std::invalid_argument("sample_block: dimension must be positive");
  const GramFactor f = factorize(g);
  std::vector<Vec> out(static_cast<std::size_t>(g.order), Vec(dim));
  Vec* ptrs[3] = {nullptr, nullptr, nullptr};
  for (int i = 0; i < g.order; ++i) ptrs[i] = &out[i];
  sample_block_into(f, rng, ptrs);
  return out;
}

}  // namespace rml
