#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rml/rng.hpp"

namespace rml {

using Vec = Eigen::VectorXd;

enum class SamplerKind { Lmc, Rlmc, Klmc, Rulmc };

std::string to_string(SamplerKind kind);
SamplerKind parse_sampler_kind(const std::string& name);
bool is_underdamped(SamplerKind kind) noexcept;

/// Per-coordinate covariance of one correlated Gaussian noise block. The same
/// matrix applies independently to each of the d coordinates.
struct NoiseGram {
  int order = 2;
  Eigen::Matrix3d entries = Eigen::Matrix3d::Zero();  // top-left order x order block is used
  SamplerKind tag = SamplerKind::Rlmc;
  double alpha = 0.0;
  double gamma = 0.0;

  double operator()(int i, int j) const { return entries(i, j); }
  Eigen::MatrixXd matrix() const { return entries.topLeftCorner(order, order); }
};

/// Covariance of the standardized RLMC pair (U', U): [[1, sqrt(a)], [sqrt(a), 1]].
NoiseGram rlmc_gram(double alpha);

/// Covariance of (s1 U1, s2 U2, s3 U3) for the randomized midpoint underdamped
/// step. With a = alpha * gamma:
///   G11 = a + (1 - e^{-4a})/4 - (1 - e^{-2a})      G22 = same with a -> gamma
///   G33 = (1 - e^{-4 gamma})/4
///   G12 = a - (e^{-a} + e^{-2 gamma} sinh a) sinh a
///   G23 = e^{-2 gamma} sinh^2 gamma               G13 = e^{-2 gamma} sinh^2 a
/// The entries are evaluated in cancellation-free form.
NoiseGram rulmc_gram(double alpha, double gamma);

/// Covariance of (s1 U1, s2 U2) for the exponential-integrator KLMC step.
NoiseGram klmc_gram(double gamma);

/// Smallest eigenvalue of the active block.
double min_eigenvalue(const NoiseGram& g);

/// Square root R with R R^T = G from the symmetric eigendecomposition.
/// Eigenvalues up to 1e-12 times the largest diagonal entry are clamped to
/// zero; one below -1e-9 times that entry throws std::domain_error.
struct GramFactor {
  int order = 2;
  Eigen::Matrix3d root = Eigen::Matrix3d::Zero();
};
GramFactor factorize(const NoiseGram& g);

/// order-many d-dimensional vectors with per-coordinate joint covariance g.
std::vector<Vec> sample_block(const NoiseGram& g, int dim, RngStream& rng);

/// Allocation-free variant; each out[k] must already have size dim.
void sample_block_into(const GramFactor& factor, RngStream& rng, Vec* out[]);

namespace detail {
/// rulmc_gram without argument or PSD checks, for the sampler hot path.
NoiseGram rulmc_gram_unchecked(double alpha, double gamma);
}  // namespace detail

// Building blocks, exposed for tests.
namespace kernel {
/// integral_0^a (1 - e^{-2r}) dr = a - (1 - e^{-2a})/2
double ou_int1(double a);
/// integral_0^a (1 - e^{-2r})^2 dr = a + (1 - e^{-4a})/4 - (1 - e^{-2a})
double ou_int2(double a);
}  // namespace kernel

}  // namespace rml
