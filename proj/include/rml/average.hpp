#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "rml/potential.hpp"
#include "rml/sampler.hpp"
#include "rml/schedule.hpp"
#include "rml/test_function.hpp"

namespace rml {

// Step-size weighted mean pi_n = sum gamma_k c_k / sum gamma_k, updated by
//   pi_{n+1} = pi_n + (gamma_{n+1} / Gamma_{n+1}) (c_{n+1} - pi_n).
// Gamma and the running value are both Neumaier-compensated.
class RunningAverage {
 public:
  void update(double gamma, double value);

  double value() const noexcept { return value_.value(); }
  double gamma_sum() const noexcept { return gamma_.value(); }
  std::uint64_t n() const noexcept { return n_; }

 private:
  CompensatedSum value_;
  CompensatedSum gamma_;
  std::uint64_t n_ = 0;
};

/// A phi~ = -<grad f, grad phi~> + lap phi~.
double generator_overdamped(const TestFunction& phi, const Potential& p, const Vec& x);

/// L g = 2u lap_v g - 2<v, grad_v g> - u<grad f(x), grad_v g> + <v, grad_x g>,
/// with g a function of the 2d phase-space variables. A function of x alone
/// gives <v, grad g(x)>.
double generator_underdamped(const TestFunction& g, double u, const Potential& p, const Vec& x, const Vec& v);

// Scalar function of the chain state observed by the averaging observer.
// Instances carry scratch space: copy one per chain.
class Observable {
 public:
  enum class Kind { Zero, Raw, Overdamped, Underdamped };

  /// A phi~ over position space.
  static Observable overdamped_generator(TestFunction phi, Potential p);
  /// L g; `g` may be a position-space function (then L g = <v, grad g>) or a phase-space one.
  static Observable underdamped_generator(TestFunction g, Potential p, double u);
  /// phi itself, over x or over (x, v).
  static Observable raw(TestFunction f);
  static Observable zero();

  double operator()(const Vec& x, const Vec* v);

  Kind kind() const noexcept { return kind_; }
  const TestFunction& function() const { return *fn_; }
  /// True for the underdamped class <v, grad phi~(x)>.
  bool position_only() const noexcept { return position_only_; }
  std::string describe() const;

 private:
  Observable(Kind kind, std::shared_ptr<const TestFunction> fn, std::shared_ptr<const Potential> p, double u);

  Kind kind_;
  std::shared_ptr<const TestFunction> fn_;
  std::shared_ptr<const Potential> p_;
  double u_ = 0.0;
  bool position_only_ = false;
  Vec grad_f_;
  Vec z_;
  Vec drift_;
};

/// Feeds phi(x_{k-1}) with weight gamma_k into a RunningAverage. Optional
/// checkpoints snapshot the average and the four Gamma sums.
class AveragingObserver : public Observer {
 public:
  struct Checkpoint {
    std::uint64_t n = 0;
    double estimate = 0.0;
    double gamma_sum[4] = {0.0, 0.0, 0.0, 0.0};
  };

  AveragingObserver(Observable phi, const Schedule* schedule = nullptr, std::vector<std::uint64_t> checkpoints = {});
  std::string name() const override { return "average"; }
  void before_step(std::uint64_t k, double gamma, const Vec& x, const Vec* v) override;
  void after_step(std::uint64_t k, const Vec& x, const Vec* v) override;
  nlohmann::json summary() const override;

  const RunningAverage& average() const noexcept { return avg_; }
  const std::vector<Checkpoint>& checkpoints() const noexcept { return taken_; }

 private:
  Observable phi_;
  const Schedule* schedule_;
  std::vector<std::uint64_t> wanted_;
  std::size_t next_ = 0;
  std::vector<Checkpoint> taken_;
  RunningAverage avg_;
};

/// Runs the chain with an averaging observer and returns the final average.
RunningAverage estimate_expectation(const SamplerConfig& cfg, const Potential& p, Schedule& schedule,
                                    const Observable& phi, std::uint64_t n_steps, RngStream& rng);

}  // namespace rml
