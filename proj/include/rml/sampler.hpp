#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "rml/noise.hpp"
#include "rml/potential.hpp"
#include "rml/rng.hpp"
#include "rml/schedule.hpp"

namespace rml {

struct OverdampedState {
  Vec x;
  std::uint64_t n = 0;
};

// Friction is fixed at 2 throughout.
struct UnderdampedState {
  Vec x;
  Vec v;
  std::uint64_t n = 0;
};

/// Standardized correlated pair with Cov(u_half, u_full) = sqrt(alpha) I.
struct RlmcNoise {
  double alpha = 0.0;
  Vec u_half;
  Vec u_full;
};

/// The products sigma_i U_i, i = 1..3.
struct RulmcNoise {
  double alpha = 0.0;
  Vec w1;
  Vec w2;
  Vec w3;
};

/// The products sigma_i U_i, i = 1..2.
struct KlmcNoise {
  Vec w1;
  Vec w2;
};

class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(std::uint64_t step, const std::string& what)
      : std::runtime_error(what + " (step " + std::to_string(step) + ")"), step_(step) {}
  std::uint64_t step() const noexcept { return step_; }

 private:
  std::uint64_t step_;
};

// Noise draws. Each consumes alpha first (when present), then the Gaussian block.
RlmcNoise draw_rlmc_noise(int dim, RngStream& rng, std::optional<double> alpha = std::nullopt);
RulmcNoise draw_rulmc_noise(int dim, double gamma, RngStream& rng, std::optional<double> alpha = std::nullopt);
KlmcNoise draw_klmc_noise(int dim, double gamma, RngStream& rng);

// One-step kernels with explicit noise (deterministic) and with a stream.
OverdampedState lmc_step(const OverdampedState& s, double gamma, const Potential& p, const Vec& z);
OverdampedState lmc_step(const OverdampedState& s, double gamma, const Potential& p, RngStream& rng);

OverdampedState rlmc_step(const OverdampedState& s, double gamma, const Potential& p, const RlmcNoise& noise);
OverdampedState rlmc_step(const OverdampedState& s, double gamma, const Potential& p, RngStream& rng,
                          std::optional<double> alpha = std::nullopt);

UnderdampedState rulmc_step(const UnderdampedState& s, double gamma, double u, const Potential& p,
                            const RulmcNoise& noise);
UnderdampedState rulmc_step(const UnderdampedState& s, double gamma, double u, const Potential& p,
                            RngStream& rng, std::optional<double> alpha = std::nullopt);

UnderdampedState klmc_step(const UnderdampedState& s, double gamma, double u, const Potential& p,
                           const KlmcNoise& noise);
UnderdampedState klmc_step(const UnderdampedState& s, double gamma, double u, const Potential& p, RngStream& rng);

enum class InitPolicy { Argmin, Explicit };

struct SamplerConfig {
  SamplerKind kind = SamplerKind::Rlmc;
  std::optional<double> u;  // inverse mass; defaults to 1/M
  InitPolicy init = InitPolicy::Argmin;
  Vec x0;  // used with InitPolicy::Explicit
  Vec v0;  // used with InitPolicy::Explicit; zero when empty
};

/// Inverse mass in effect: cfg.u or 1/M.
double resolve_inverse_mass(const SamplerConfig& cfg, const Potential& p);

/// Pre-step hook and result reporting. `v` is null for overdamped chains.
class Observer {
 public:
  virtual ~Observer() = default;
  virtual std::string name() const = 0;
  /// Called before step k (1-based) with gamma_k and the state x_{k-1}.
  virtual void before_step(std::uint64_t k, double gamma, const Vec& x, const Vec* v) = 0;
  /// Called after step k with x_k.
  virtual void after_step(std::uint64_t /*k*/, const Vec& /*x*/, const Vec* /*v*/) {}
  virtual nlohmann::json summary() const = 0;
};

/// Per-coordinate mean and variance of x (and v) after burn-in, every `stride` steps.
class MomentObserver : public Observer {
 public:
  MomentObserver(std::uint64_t burn_in, std::uint64_t stride = 1);
  std::string name() const override { return "moments"; }
  void before_step(std::uint64_t, double, const Vec&, const Vec*) override {}
  void after_step(std::uint64_t k, const Vec& x, const Vec* v) override;
  nlohmann::json summary() const override;

  std::uint64_t count() const noexcept { return count_; }
  Vec mean_x() const { return mean_x_; }
  Vec variance_x() const;
  Vec second_moment_x() const;

 private:
  std::uint64_t burn_in_;
  std::uint64_t stride_;
  std::uint64_t count_ = 0;
  Vec mean_x_, m2_x_, mean_v_, m2_v_;
};

/// Post-burn-in thinned positions, stored row-major (sample, coordinate).
class TraceObserver : public Observer {
 public:
  TraceObserver(std::uint64_t burn_in, std::uint64_t stride, std::size_t reserve = 0);
  std::string name() const override { return "trace"; }
  void before_step(std::uint64_t, double, const Vec&, const Vec*) override {}
  void after_step(std::uint64_t k, const Vec& x, const Vec* v) override;
  nlohmann::json summary() const override;

  std::size_t samples() const noexcept { return dim_ == 0 ? 0 : data_.size() / dim_; }
  int dim() const noexcept { return static_cast<int>(dim_); }
  /// All retained values of coordinate i.
  std::vector<double> coordinate(int i) const;

 private:
  std::uint64_t burn_in_;
  std::uint64_t stride_;
  std::size_t dim_ = 0;
  std::vector<double> data_;
};

struct ChainSummary {
  SamplerKind kind = SamplerKind::Rlmc;
  std::string schedule;
  std::uint64_t n_steps = 0;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  double u = 0.0;  // underdamped only
  Vec final_x;
  Vec final_v;
  nlohmann::json observers = nlohmann::json::object();

  nlohmann::json to_json() const;
};

/// Runs n_steps steps, pulling gamma_k from `schedule` (advanced in place).
/// Throws DivergenceError carrying the step index on a non-finite state.
ChainSummary run_chain(const SamplerConfig& cfg, const Potential& p, Schedule& schedule, std::uint64_t n_steps,
                       const std::vector<Observer*>& observers, RngStream& rng);

}  // namespace rml
