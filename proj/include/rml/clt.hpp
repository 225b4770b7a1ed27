#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rml/average.hpp"
#include "rml/noise.hpp"
#include "rml/potential.hpp"
#include "rml/sampler.hpp"
#include "rml/schedule.hpp"
#include "rml/test_function.hpp"

namespace rml {

/// Standard normal distribution function, 0.5 erfc(-x / sqrt 2).
double normal_cdf(double x);
/// Inverse of normal_cdf on (0, 1): rational initial guess refined by one Halley step.
double inverse_normal_cdf(double p);

/// Nodes and weights integrating against N(0, 1) (Golub-Welsch).
struct GaussHermiteRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};
GaussHermiteRule gauss_hermite(int n);

struct Estimate {
  double value = 0.0;
  double std_error = 0.0;  // Monte Carlo standard error, or node-refinement change for quadrature
};

// Expectations under pi (and under pi x N(0, s^2 I) for an auxiliary Gaussian).
//
// Gauss-Hermite: tensor grid, one factor per coordinate. For quadratic
// potentials a polynomial integrand of degree <= 2 nodes - 1 is integrated
// exactly; a higher declared degree throws std::domain_error. For the log-cosh
// family each target axis is a trapezoid rule on [-12 s, 12 s] (s the
// quadratic part's scale) with 4 nodes + 1 points, and the result is compared
// against nodes + 8; a relative change above 1e-8 throws std::domain_error.
//
// Monte Carlo: exact draws from pi (rejection with acceptance cosh(x)^{-eps}
// for the log-cosh family) on a dedicated stream.
class QuadratureOracle {
 public:
  enum class Rule { GaussHermite, MonteCarlo };

  static QuadratureOracle gauss_hermite(int nodes = 20);
  static QuadratureOracle monte_carlo(std::uint64_t samples, std::uint64_t seed = 0);

  Rule rule() const noexcept { return rule_; }
  int nodes() const noexcept { return nodes_; }
  std::uint64_t samples() const noexcept { return samples_; }
  std::string describe() const;

  using FnX = std::function<double(const Vec& x)>;
  using FnXW = std::function<double(const Vec& x, const Vec& w)>;

  /// E_pi h(x); `degree` is the polynomial degree of h for quadratic targets.
  Estimate expect_pi(const Potential& p, const FnX& h, int degree) const;

  /// E h(x, w) with x ~ pi and w ~ N(0, w_var I_d) independent. Quadrature
  /// integrates `reduced` (= E_w h(x, w), supplied in closed form) over x;
  /// Monte Carlo integrates `direct` over both.
  Estimate expect_aux(const Potential& p, double w_var, const FnXW& direct, const FnX& reduced, int degree) const;

  /// E h(x, w) by a full tensor grid over (x, w) (quadrature) or joint draws.
  Estimate expect_joint(const Potential& p, double w_var, const FnXW& h, int degree) const;

 private:
  QuadratureOracle(Rule rule, int nodes, std::uint64_t samples, std::uint64_t seed)
      : rule_(rule), nodes_(nodes), samples_(samples), seed_(seed) {}

  double grid_pi(const Potential& p, const FnX& h, int nodes) const;
  double grid_joint(const Potential& p, double w_var, const FnXW& h, int nodes) const;
  Estimate checked_grid(const Potential& p, int degree, const std::function<double(int)>& at) const;

  Rule rule_;
  int nodes_;
  std::uint64_t samples_;
  std::uint64_t seed_;
};

/// Draws x ~ pi exactly (quadratic and log-cosh families).
void sample_target(const Potential& p, RngStream& rng, Vec& out);

/// 2 E_pi |grad phi~|^2
Estimate asym_variance_overdamped(const TestFunction& phi, const Potential& p, const QuadratureOracle& oracle);

/// The six-term overdamped bias constant (varrho), term by term.
struct BiasTerms {
  std::vector<Estimate> terms;
  Estimate total;
};
BiasTerms asym_bias_rho_overdamped(const TestFunction& phi, const Potential& p, const QuadratureOracle& oracle);

/// 4u E_nu |grad_v g|^2 with nu = pi x N(0, u I). `g` is over (x, v) or over x only.
Estimate asym_variance_underdamped(const TestFunction& g, double u, const Potential& p,
                                   const QuadratureOracle& oracle);

/// Constants of the underdamped class <v, grad phi~(x)>:
/// variance (10/3) u E_pi |grad phi~|^2 and the five-term bias rho for RULMC or KLMC.
struct KineticConstants {
  SamplerKind kind = SamplerKind::Rulmc;
  double u = 0.0;
  Estimate variance;
  BiasTerms rho;
};
KineticConstants kinetic_special_law(const TestFunction& phi, double u, const Potential& p, SamplerKind kind,
                                     const QuadratureOracle& oracle);

enum class Normalizer { SqrtGamma, GammaOverSqrtGamma3, GammaOverGamma2, GammaOverGamma4 };
std::string to_string(Normalizer n);
/// Normalizer value from the running sums (Gamma^(1..4)).
double normalizer_value(Normalizer n, const std::array<double, 4>& gamma_sums);
double normalizer_value(Normalizer n, const Schedule& s);

struct AsymptoticLaw {
  Normalizer normalizer = Normalizer::SqrtGamma;
  double mean = 0.0;
  double variance = 0.0;
  RegimeReport regime;
  std::string note;

  nlohmann::json to_json() const;
};

/// Overdamped law for A phi~ given the schedule's regime.
AsymptoticLaw overdamped_law(double variance, double varrho, const RegimeReport& regime);
/// Underdamped class <v, grad phi~> given the schedule's regime.
AsymptoticLaw kinetic_law(const KineticConstants& k, const RegimeReport& regime);
/// General L g in the unbiased regime only; throws std::domain_error otherwise.
AsymptoticLaw underdamped_law(double variance, const RegimeReport& overdamped_regime);

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
  double center = 0.0;
  double half_width = 0.0;
};

/// center = estimate - mean / normalizer, half width = z_{(1+level)/2} sqrt(variance) / normalizer.
/// Throws std::domain_error for the Infinite regime.
Interval confidence_interval(double estimate, double normalizer, const AsymptoticLaw& law, double level);

// ---------------------------------------------------------------- replicates

struct ReplicateSpec {
  SamplerConfig sampler;
  Potential potential;
  std::string schedule;  // descriptor, instantiated fresh per replicate
  Observable observable;
  std::uint64_t n_steps = 0;
  std::uint64_t seed = 0;
  std::vector<std::uint64_t> checkpoints;  // optional snapshots before n_steps
  bool same_stream = false;                // every replicate on stream 0 (determinism check)
};

struct ReplicateOutcome {
  std::size_t replicate = 0;
  std::uint64_t stream = 0;
  bool ok = false;
  std::string error;
  std::uint64_t failed_step = 0;
  double estimate = 0.0;
  std::array<double, 4> gamma_sums{};
  std::vector<AveragingObserver::Checkpoint> checkpoints;
};

/// Runs R independent chains on `workers` threads; replicate r uses stream r.
/// Results are ordered by replicate index whatever the scheduling.
std::vector<ReplicateOutcome> run_replicates(const ReplicateSpec& spec, std::size_t replicates, unsigned workers);

/// normalizer * estimate - law.mean for every successful replicate.
std::vector<double> standardized_statistics(const std::vector<ReplicateOutcome>& outcomes, const AsymptoticLaw& law);

struct NormalityReport {
  std::size_t n = 0;
  double ks = 0.0;
  double critical = 0.0;
  bool pass = false;
  double mean = 0.0;
  double variance = 0.0;
  double skewness = 0.0;
  std::string note;

  nlohmann::json to_json() const;
};

/// Kolmogorov-Smirnov distance of stats / sqrt(target_variance) from N(0, 1);
/// passes when D <= coefficient / sqrt(n). Fewer than 50 statistics fail with a note.
NormalityReport normality_check(const std::vector<double>& stats, double target_variance, double coefficient = 1.36);

}  // namespace rml
