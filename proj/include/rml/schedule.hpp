#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

namespace rml {

class Potential;

/// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double v) noexcept;
  double value() const noexcept { return sum_ + comp_; }
  void reset() noexcept { sum_ = comp_ = 0.0; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

struct ConstantRule {
  double h = 0.1;
};
/// gamma_k = k^{-alpha}
struct PolynomialRule {
  double alpha = 0.5;
};
/// gamma_{n+1} = 1/(m + 34 M) for n < K1, 1/(m + 34 M + lambda (n - K1)) after.
struct RlmcFastRule {
  double m = 1.0;
  double M = 1.0;
  double lambda = 0.0;
  std::uint64_t k1 = 0;
};
/// gamma_n = 16 kappa / (32 kappa^{5/3} + (n - K1)^+)
struct RulmcFastRule {
  double kappa = 1.0;
  std::uint64_t k1 = 0;
};

using ScheduleRule = std::variant<ConstantRule, PolynomialRule, RlmcFastRule, RulmcFastRule>;

/// Default lambda of the rlmc-fast rule: the largest lambda with
/// G(lambda) <= 0 at n - K1 = 1, where
///   G(l) = (K - m (K+1)^2 / 10) l^2 + (X - m X (K+1) / 5) l - m X^2 / 10,
///   X = m + 34 M, K = 1,
/// located by bisection. When G stays non-positive for every lambda (m >= 5/2)
/// the search bracket's upper end 1e3 X is returned.
double rlmc_fast_default_lambda(double m, double M);

// Step-size generator with running sums Gamma^(l)_n = sum_{k<=n} gamma_k^l for
// l = 1..4.
class Schedule {
 public:
  explicit Schedule(ScheduleRule rule);

  /// "const:h=0.1", "poly:alpha=1/3", "rlmc-fast:m=1,M=1[,lambda=..][,K1=0]",
  /// "rulmc-fast:kappa=1[,K1=0]".
  static Schedule parse(const std::string& descriptor);

  /// Emits gamma_{n+1} and updates the accumulators.
  double next_gamma();
  /// gamma_k for 1-based k, without touching state.
  double gamma_at(std::uint64_t k) const;

  std::uint64_t n() const noexcept { return n_; }
  /// Gamma^(l)_n, l in 1..4.
  double gamma_sum(int ell = 1) const;
  void reset() noexcept;

  const ScheduleRule& rule() const noexcept { return rule_; }
  std::string descriptor() const;
  bool is_constant() const noexcept { return std::holds_alternative<ConstantRule>(rule_); }

 private:
  ScheduleRule rule_;
  std::uint64_t n_ = 0;
  std::array<CompensatedSum, 4> sums_{};
};

enum class Setting { Overdamped, UnderdampedSpecial };
enum class Regime { Zero, Finite, Infinite };

std::string to_string(Setting s);
std::string to_string(Regime r);

struct RegimeReport {
  Setting setting = Setting::Overdamped;
  std::string gamma_hat_definition;
  Regime regime = Regime::Zero;
  double value = 0.0;          // gamma_hat_infinity when Finite
  double rate_exponent = 0.0;  // exponent of n in the CLT normalizer
  std::string rate_descriptor;
  std::string label() const;  // "Zero", "Finite(2.449489742783178)", "Infinite"
};

/// gamma_k = k^{-alpha}, alpha in (0, 1]; gamma_hat = Gamma^(2)/sqrt(Gamma).
RegimeReport classify_overdamped(double alpha);
/// gamma_k = k^{-alpha}, alpha in (0, 1/4]; gamma_hat = Gamma^(4)/sqrt(Gamma^(3)).
RegimeReport classify_underdamped(double alpha);
/// Analytic classification of any rule (constant and fast rules included).
RegimeReport classify(const Schedule& s, Setting setting);

/// Gamma^(2)/sqrt(Gamma) or Gamma^(4)/sqrt(Gamma^(3)) from the accumulators.
double empirical_gamma_hat(const Schedule& s, Setting setting);

struct ScheduleValidation {
  std::vector<std::string> warnings;
  RegimeReport regime;
  bool ok() const { return warnings.empty(); }
};

/// Advisory check of the hypotheses attached to each rule; never throws.
/// `potential` may be null, in which case the m/M bound is skipped.
ScheduleValidation validate_schedule(const Schedule& s, Setting setting, const Potential* potential);

}  // namespace rml
