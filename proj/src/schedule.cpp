#include "rml/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "rml/descriptor.hpp"
#include "rml/potential.hpp"

namespace rml {

namespace {

constexpr double kAlphaTol = 1e-12;

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

}  // namespace

void CompensatedSum::add(double v) noexcept {
  const double t = sum_ + v;
  if (std::abs(sum_) >= std::abs(v)) {
    comp_ += (sum_ - t) + v;
  } else {
    comp_ += (v - t) + sum_;
  }
  sum_ = t;
}

double rlmc_fast_default_lambda(double m, double M) {
  const double X = m + 34.0 * M;
  const double K = 1.0;
  const auto G = [&](double l) {
    return (K - 0.1 * m * (K + 1) * (K + 1)) * l * l + (X - 0.2 * m * X * (K + 1)) * l - 0.1 * m * X * X;
  };
  double lo = 0.0;
  double hi = 1e3 * X;
  if (G(hi) <= 0.0) return hi;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (G(mid) <= 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return lo;
}

Schedule::Schedule(ScheduleRule rule) : rule_(std::move(rule)) {
  std::visit(overloaded{
                 [](const ConstantRule& r) {
                   if (!(r.h > 0.0) || !std::isfinite(r.h)) throw std::invalid_argument("const schedule needs h > 0");
                 },
                 [](const PolynomialRule& r) {
                   if (!(r.alpha > 0.0 && r.alpha <= 1.0)) {
                     throw std::invalid_argument("poly schedule needs alpha in (0, 1]");
                   }
                 },
                 [](const RlmcFastRule& r) {
                   if (!(r.m > 0.0 && r.M >= r.m)) throw std::invalid_argument("rlmc-fast needs 0 < m <= M");
                   if (!(r.lambda > 0.0)) throw std::invalid_argument("rlmc-fast needs lambda > 0");
                 },
                 [](const RulmcFastRule& r) {
                   if (!(r.kappa >= 1.0)) throw std::invalid_argument("rulmc-fast needs kappa >= 1");
                 },
             },
             rule_);
}

Schedule Schedule::parse(const std::string& descriptor) {
  const Descriptor d = Descriptor::parse(descriptor);
  if (d.name == "const") {
    d.require_only({"h"});
    return Schedule(ConstantRule{d.number("h")});
  }
  if (d.name == "poly") {
    d.require_only({"alpha"});
    return Schedule(PolynomialRule{d.number("alpha")});
  }
  if (d.name == "rlmc-fast") {
    d.require_only({"m", "M", "lambda", "K1"});
    RlmcFastRule r;
    r.m = d.number("m");
    r.M = d.number("M");
    r.lambda = d.has("lambda") ? d.number("lambda") : rlmc_fast_default_lambda(r.m, r.M);
    r.k1 = static_cast<std::uint64_t>(d.number_or("K1", 0));
    return Schedule(r);
  }
  if (d.name == "rulmc-fast") {
    d.require_only({"kappa", "K1"});
    return Schedule(RulmcFastRule{d.number("kappa"), static_cast<std::uint64_t>(d.number_or("K1", 0))});
  }
  throw std::invalid_argument("unknown schedule rule '" + d.name + "'");
}

std::string Schedule::descriptor() const {
  return std::visit(
      overloaded{
          [](const ConstantRule& r) { return "const:h=" + format_double(r.h); },
          [](const PolynomialRule& r) { return "poly:alpha=" + format_double(r.alpha); },
          [](const RlmcFastRule& r) {
            return "rlmc-fast:m=" + format_double(r.m) + ",M=" + format_double(r.M) +
                   ",lambda=" + format_double(r.lambda) + ",K1=" + std::to_string(r.k1);
          },
          [](const RulmcFastRule& r) {
            return "rulmc-fast:kappa=" + format_double(r.kappa) + ",K1=" + std::to_string(r.k1);
          },
      },
      rule_);
}

double Schedule::gamma_at(std::uint64_t k) const {
  if (k == 0) throw std::invalid_argument("gamma_at: steps are numbered from 1");
  return std::visit(
      overloaded{
          [](const ConstantRule& r) { return r.h; },
          [k](const PolynomialRule& r) { return std::pow(static_cast<double>(k), -r.alpha); },
          [k](const RlmcFastRule& r) {
            const double X = r.m + 34.0 * r.M;
            const std::uint64_t n = k - 1;  // emitting gamma_{n+1}
            if (n < r.k1) return 1.0 / X;
            return 1.0 / (X + r.lambda * static_cast<double>(n - r.k1));
          },
          [k](const RulmcFastRule& r) {
            const double excess = k > r.k1 ? static_cast<double>(k - r.k1) : 0.0;
            return 16.0 * r.kappa / (32.0 * std::pow(r.kappa, 5.0 / 3.0) + excess);
          },
      },
      rule_);
}

double Schedule::next_gamma() {
  const double g = gamma_at(n_ + 1);
  ++n_;
  double p = g;
  for (auto& s : sums_) {
    s.add(p);
    p *= g;
  }
  return g;
}

double Schedule::gamma_sum(int ell) const {
  if (ell < 1 || ell > 4) throw std::invalid_argument("gamma_sum: ell must be in 1..4");
  return sums_[static_cast<std::size_t>(ell - 1)].value();
}

void Schedule::reset() noexcept {
  n_ = 0;
  for (auto& s : sums_) s.reset();
}

std::string to_string(Setting s) {
  return s == Setting::Overdamped ? "overdamped" : "underdamped-special";
}

std::string to_string(Regime r) {
  switch (r) {
    case Regime::Zero:
      return "Zero";
    case Regime::Finite:
      return "Finite";
    case Regime::Infinite:
      return "Infinite";
  }
  return "unknown";
}

std::string RegimeReport::label() const {
  if (regime == Regime::Finite) return "Finite(" + format_double(value) + ")";
  return to_string(regime);
}

namespace {

const char* kOverdampedHat = "Gamma2_n / sqrt(Gamma_n)";
const char* kUnderdampedHat = "Gamma4_n / sqrt(Gamma3_n)";

}  // namespace

RegimeReport classify_overdamped(double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("classify_overdamped: alpha must lie in (0, 1]");
  RegimeReport r;
  r.setting = Setting::Overdamped;
  r.gamma_hat_definition = kOverdampedHat;
  // Gamma_n ~ n^{1-a}/(1-a), Gamma2_n ~ n^{1-2a}/(1-2a) (log n at a = 1/2,
  // bounded for a > 1/2), so gamma_hat ~ n^{(1-3a)/2}.
  if (std::abs(alpha - 1.0 / 3.0) <= kAlphaTol) {
    r.regime = Regime::Finite;
    r.value = std::sqrt(6.0);
  } else if (alpha > 1.0 / 3.0) {
    r.regime = Regime::Zero;
  } else {
    r.regime = Regime::Infinite;
  }
  if (r.regime == Regime::Infinite) {
    // sqrt(Gamma_n)/gamma_hat_n = Gamma_n/Gamma2_n ~ n^{alpha}
    r.rate_exponent = alpha;
    r.rate_descriptor = "Gamma_n/Gamma2_n ~ n^" + format_double(alpha);
  } else {
    r.rate_exponent = 0.5 * (1.0 - alpha);
    r.rate_descriptor = alpha == 1.0 ? "sqrt(Gamma_n) ~ sqrt(log n)"
                                     : "sqrt(Gamma_n) ~ n^" + format_double(r.rate_exponent);
  }
  return r;
}

RegimeReport classify_underdamped(double alpha) {
  if (!(alpha > 0.0 && alpha <= 0.25 + kAlphaTol)) {
    throw std::invalid_argument("classify_underdamped: alpha must lie in (0, 1/4]");
  }
  RegimeReport r;
  r.setting = Setting::UnderdampedSpecial;
  r.gamma_hat_definition = kUnderdampedHat;
  if (std::abs(alpha - 0.2) <= kAlphaTol) {
    r.regime = Regime::Finite;
    r.value = std::sqrt(10.0);
  } else if (alpha > 0.2) {
    r.regime = Regime::Zero;
  } else {
    r.regime = Regime::Infinite;
  }
  if (r.regime == Regime::Zero) {
    r.rate_exponent = 0.5 * (1.0 + alpha);
    r.rate_descriptor = "Gamma_n/sqrt(Gamma3_n) ~ n^" + format_double(r.rate_exponent);
  } else {
    r.rate_exponent = 3.0 * alpha;
    r.rate_descriptor = "Gamma_n/Gamma4_n ~ n^" + format_double(r.rate_exponent);
  }
  return r;
}

RegimeReport classify(const Schedule& s, Setting setting) {
  return std::visit(
      overloaded{
          [setting](const PolynomialRule& r) {
            return setting == Setting::Overdamped ? classify_overdamped(r.alpha) : classify_underdamped(r.alpha);
          },
          [setting](const ConstantRule&) {
            RegimeReport out;
            out.setting = setting;
            out.gamma_hat_definition = setting == Setting::Overdamped ? kOverdampedHat : kUnderdampedHat;
            out.regime = Regime::Infinite;
            out.rate_exponent = 0.0;
            out.rate_descriptor = "constant step: no CLT normalization, biased average";
            return out;
          },
          [setting](const auto&) {
            // Fast rules decay like 1/n: Gamma_n ~ log n and every higher sum converges.
            if (setting == Setting::UnderdampedSpecial) {
              throw std::domain_error("fast-decreasing rule keeps Gamma4_n bounded; the underdamped special CLT does not apply");
            }
            RegimeReport out;
            out.setting = setting;
            out.gamma_hat_definition = kOverdampedHat;
            out.regime = Regime::Zero;
            out.rate_exponent = 0.0;
            out.rate_descriptor = "sqrt(Gamma_n) ~ sqrt(log n)";
            return out;
          },
      },
      s.rule());
}

double empirical_gamma_hat(const Schedule& s, Setting setting) {
  if (s.n() == 0) throw std::invalid_argument("empirical_gamma_hat: no steps emitted yet");
  if (setting == Setting::Overdamped) return s.gamma_sum(2) / std::sqrt(s.gamma_sum(1));
  return s.gamma_sum(4) / std::sqrt(s.gamma_sum(3));
}

ScheduleValidation validate_schedule(const Schedule& s, Setting setting, const Potential* potential) {
  ScheduleValidation out;
  auto warn = [&](std::string w) { out.warnings.push_back(std::move(w)); };

  // Monotonicity, checked on the first 1000 values.
  for (std::uint64_t k = 1; k < 1000; ++k) {
    if (s.gamma_at(k + 1) > s.gamma_at(k)) {
      warn("step sizes increase at n = " + std::to_string(k + 1));
      break;
    }
  }

  if (const auto* poly = std::get_if<PolynomialRule>(&s.rule())) {
    if (setting == Setting::UnderdampedSpecial) {
      if (poly->alpha > 0.25 + kAlphaTol) {
        warn("alpha = " + format_double(poly->alpha) +
             " outside (0, 1/4]: Gamma4_n stays bounded and the special underdamped CLT does not apply");
      }
      // (1/sqrt(Gamma_n)) sum gamma^{3/2} ~ n^{1/2 - alpha}
      if (poly->alpha >= 0.5) {
        warn("(1/sqrt(Gamma_n)) sum gamma_k^{3/2} does not diverge for alpha >= 1/2");
      }
    }
  }
  if (s.is_constant()) {
    warn("biased regime: γ̂∞ = ∞ (constant step size)");
  }
  if (setting == Setting::UnderdampedSpecial &&
      (std::holds_alternative<RlmcFastRule>(s.rule()) || std::holds_alternative<RulmcFastRule>(s.rule()))) {
    warn("fast-decreasing rule: Gamma4_n stays bounded; only the W2 guarantee applies");
  }

  if (const auto* fast = std::get_if<RlmcFastRule>(&s.rule())) {
    const double m = potential ? potential->m() : fast->m;
    const double M = potential ? potential->M() : fast->M;
    if (potential && (std::abs(potential->m() - fast->m) > 1e-12 || std::abs(potential->M() - fast->M) > 1e-12)) {
      warn("rlmc-fast parameters (m, M) differ from the potential's constants");
    }
    const double kappa = M / m;
    // Bound as used in the convergence argument: m / (m^2 + M^2 (33 + kappa)).
    const double bound = m / (m * m + M * M * (33.0 + kappa));
    for (std::uint64_t k = 1; k <= 10; ++k) {
      if (s.gamma_at(k) > bound * (1.0 + 1e-12)) {
        warn("gamma_" + std::to_string(k) + " = " + format_double(s.gamma_at(k)) +
             " exceeds m/(m^2 + M^2(33 + kappa)) = " + format_double(bound));
        break;
      }
    }
  }

  try {
    out.regime = classify(s, setting);
    if (out.regime.regime == Regime::Infinite && !s.is_constant()) {
      warn("biased regime: γ̂∞ = ∞");
    }
  } catch (const std::exception& e) {
    out.regime.setting = setting;
    out.regime.regime = Regime::Infinite;
    out.regime.rate_descriptor = "unclassified";
    warn(std::string("regime not classified: ") + e.what());
  }
  return out;
}

}  // namespace rml
