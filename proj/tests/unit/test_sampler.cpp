#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "rml/sampler.hpp"

using namespace rml;

namespace {

Vec scalar(double v) { return Vec::Constant(1, v); }

const Potential kQuad = Potential::isotropic_quadratic(1, 1.0);

}  // namespace

TEST_CASE("lmc zero-noise arithmetic") {
  const OverdampedState s = lmc_step(OverdampedState{scalar(1.0), 0}, 0.1, kQuad, scalar(0.0));
  CHECK(s.x[0] == doctest::Approx(0.9).epsilon(1e-15));
  CHECK(s.n == 1);
}

TEST_CASE("rlmc zero-noise arithmetic") {
  const RlmcNoise z{0.5, scalar(0.0), scalar(0.0)};
  const OverdampedState s = rlmc_step(OverdampedState{scalar(1.0), 0}, 0.1, kQuad, z);
  // x_half = 1 - 0.05 = 0.95, x' = 1 - 0.1 * 0.95
  CHECK(std::abs(s.x[0] - 0.905) <= 1e-12);
}

TEST_CASE("rulmc zero-noise arithmetic") {
  const RulmcNoise z{0.5, scalar(0.0), scalar(0.0), scalar(0.0)};
  const UnderdampedState s = rulmc_step(UnderdampedState{scalar(0.0), scalar(1.0), 0}, 0.2, 1.0, kQuad, z);
  const double xh = 0.5 * (1.0 - std::exp(-0.2));
  const double x = 0.5 * (1.0 - std::exp(-0.4)) - 0.1 * (1.0 - std::exp(-0.2)) * xh;
  const double v = std::exp(-0.4) - 0.2 * std::exp(-0.2) * xh;
  CHECK(xh == doctest::Approx(0.0906346).epsilon(1e-6));
  CHECK(std::abs(s.x[0] - x) <= 1e-12);
  CHECK(std::abs(s.v[0] - v) <= 1e-12);
  CHECK(s.x[0] == doctest::Approx(0.16319705).epsilon(1e-7));
  CHECK(s.v[0] == doctest::Approx(0.65547898).epsilon(1e-7));
}

TEST_CASE("klmc zero-noise arithmetic") {
  const KlmcNoise z{scalar(0.0), scalar(0.0)};
  const UnderdampedState s = klmc_step(UnderdampedState{scalar(0.0), scalar(1.0), 0}, 0.2, 1.0, kQuad, z);
  CHECK(std::abs(s.x[0] - 0.5 * (1.0 - std::exp(-0.4))) <= 1e-12);
  CHECK(std::abs(s.v[0] - std::exp(-0.4)) <= 1e-12);
  CHECK(s.x[0] == doctest::Approx(0.1648400).epsilon(1e-6));
  CHECK(s.v[0] == doctest::Approx(0.6703200).epsilon(1e-6));
}

TEST_CASE("property: argmin with zero velocity is a fixed point under zero noise") {
  for (const Potential& p : {Potential::isotropic_quadratic(2), Potential::quadratic_plus_logcosh(2, 1.0, 0.5)}) {
    const Vec zero = Vec::Zero(2);
    for (double gamma : {0.01, 0.1, 0.5}) {
      for (double alpha : {0.0, 0.3, 1.0}) {
        CHECK(lmc_step(OverdampedState{zero, 0}, gamma, p, zero).x.norm() == 0.0);
        CHECK(rlmc_step(OverdampedState{zero, 0}, gamma, p, RlmcNoise{alpha, zero, zero}).x.norm() == 0.0);
        const UnderdampedState a = rulmc_step(UnderdampedState{zero, zero, 0}, gamma, 1.0, p,
                                              RulmcNoise{alpha, zero, zero, zero});
        CHECK(a.x.norm() + a.v.norm() == 0.0);
        const UnderdampedState b = klmc_step(UnderdampedState{zero, zero, 0}, gamma, 1.0, p, KlmcNoise{zero, zero});
        CHECK(b.x.norm() + b.v.norm() == 0.0);
      }
    }
  }
}

TEST_CASE("property: rlmc with alpha = 0 is lmc") {
  RngStream rng(3, 0);
  const Potential p = Potential::quadratic_plus_logcosh(3, 1.0, 0.5);
  for (int k = 0; k < 100; ++k) {
    Vec x(3), z(3), junk(3);
    for (int i = 0; i < 3; ++i) {
      x[i] = 2.0 * rng.normal();
      z[i] = rng.normal();
      junk[i] = rng.normal();
    }
    const double gamma = 0.01 + 0.5 * rng.uniform();
    const Vec a = rlmc_step(OverdampedState{x, 0}, gamma, p, RlmcNoise{0.0, junk, z}).x;
    const Vec b = lmc_step(OverdampedState{x, 0}, gamma, p, z).x;
    REQUIRE((a - b).norm() <= 1e-15 * (1.0 + b.norm()));
  }
}

TEST_CASE("rulmc tends to the identity as the step shrinks") {
  const RulmcNoise z{0.5, scalar(0.0), scalar(0.0), scalar(0.0)};
  for (double gamma : {1e-4, 1e-6, 1e-8}) {
    const UnderdampedState s = rulmc_step(UnderdampedState{scalar(1.0), scalar(1.0), 0}, gamma, 1.0, kQuad, z);
    CHECK(std::abs(s.x[0] - 1.0) <= 3.0 * gamma);
    CHECK(std::abs(s.v[0] - 1.0) <= 3.0 * gamma);
  }
}

TEST_CASE("one chain step equals the step operation on the same stream") {
  const Potential p = Potential::quadratic_plus_logcosh(2, 1.0, 0.5);
  Vec x0(2), v0(2);
  x0 << 0.4, -1.2;
  v0 << 0.3, 0.1;
  for (SamplerKind kind : {SamplerKind::Lmc, SamplerKind::Rlmc, SamplerKind::Klmc, SamplerKind::Rulmc}) {
    SamplerConfig cfg;
    cfg.kind = kind;
    cfg.u = 0.7;
    cfg.init = InitPolicy::Explicit;
    cfg.x0 = x0;
    cfg.v0 = v0;
    Schedule s(ConstantRule{0.15});
    RngStream a(8, 1), b(8, 1);
    const ChainSummary sum = run_chain(cfg, p, s, 1, {}, a);
    Vec x, v;
    switch (kind) {
      case SamplerKind::Lmc: x = lmc_step(OverdampedState{x0, 0}, 0.15, p, b).x; break;
      case SamplerKind::Rlmc: x = rlmc_step(OverdampedState{x0, 0}, 0.15, p, b).x; break;
      case SamplerKind::Klmc: {
        const auto r = klmc_step(UnderdampedState{x0, v0, 0}, 0.15, 0.7, p, b);
        x = r.x;
        v = r.v;
        break;
      }
      case SamplerKind::Rulmc: {
        const auto r = rulmc_step(UnderdampedState{x0, v0, 0}, 0.15, 0.7, p, b);
        x = r.x;
        v = r.v;
        break;
      }
    }
    CHECK((sum.final_x - x).norm() == 0.0);
    if (is_underdamped(kind)) CHECK((sum.final_v - v).norm() == 0.0);
  }
}

TEST_CASE("chains are reproducible") {
  for (SamplerKind kind : {SamplerKind::Rlmc, SamplerKind::Rulmc}) {
    SamplerConfig cfg;
    cfg.kind = kind;
    auto run = [&] {
      Schedule s = Schedule::parse("poly:alpha=0.4");
      MomentObserver m(100);
      RngStream rng(99, 4);
      return run_chain(cfg, Potential::isotropic_quadratic(2), s, 5000, {&m}, rng).to_json().dump();
    };
    CHECK(run() == run());
  }
}

TEST_CASE("divergence is reported with the step index") {
  SamplerConfig cfg;
  cfg.kind = SamplerKind::Lmc;
  cfg.init = InitPolicy::Explicit;
  cfg.x0 = scalar(1.0);
  Schedule s(ConstantRule{3.0});
  RngStream rng(1, 0);
  try {
    run_chain(cfg, kQuad, s, 100000, {}, rng);
    FAIL("expected divergence");
  } catch (const DivergenceError& e) {
    CHECK(e.step() > 100);
    CHECK(e.step() < 5000);
  }
}

TEST_CASE("inverse mass defaults to 1/M") {
  SamplerConfig cfg;
  cfg.kind = SamplerKind::Rulmc;
  CHECK(resolve_inverse_mass(cfg, Potential::diagonal_quadratic({1.0, 4.0})) == 0.25);
  cfg.u = 0.5;
  CHECK(resolve_inverse_mass(cfg, Potential::diagonal_quadratic({1.0, 4.0})) == 0.5);
}

TEST_CASE("rlmc on the fast schedule reaches the target second moment") {
  const std::uint64_t n = 100000;
  // Exact second-moment recursion of the linear chain x' = a x + xi, started at 0.
  Schedule s = Schedule::parse("rlmc-fast:m=1,M=1");
  double m2 = 0.0;
  for (std::uint64_t k = 0; k < n; ++k) {
    const double g = s.next_gamma();
    const double ea2 = (1 - g) * (1 - g) + (1 - g) * g * g + g * g * g * g / 3.0;
    m2 = ea2 * m2 + 2 * g - 2 * g * g + g * g * g;
  }
  // Started at 0 the gap to 1 decays like prod (1 - 2 gamma_k) ~ (X / (lambda n))^(2 / lambda).
  const double lambda = (-21.0 + std::sqrt(21.0 * 21.0 + 4.0 * 0.6 * 122.5)) / 1.2;
  const double predicted_gap = std::pow(35.0 / (35.0 + lambda * static_cast<double>(n)), 2.0 / lambda);
  CHECK(1.0 - m2 > 0.0);
  CHECK((1.0 - m2) == doctest::Approx(predicted_gap).epsilon(0.1));
  CHECK(m2 == doctest::Approx(0.9775).epsilon(0.002));
  // Ten times longer gets within 1%.
  double m2_long = m2;
  for (std::uint64_t k = n; k < 10 * n; ++k) {
    const double g = s.next_gamma();
    m2_long = ((1 - g) * (1 - g) + (1 - g) * g * g + g * g * g * g / 3.0) * m2_long + 2 * g - 2 * g * g + g * g * g;
  }
  CHECK(std::abs(m2_long - 1.0) <= 0.01);

  // The sampler agrees with the recursion across an ensemble of chains.
  const int R = 300;
  double acc = 0.0, acc2 = 0.0;
  SamplerConfig cfg;
  cfg.kind = SamplerKind::Rlmc;
  for (int r = 0; r < R; ++r) {
    Schedule sr = Schedule::parse("rlmc-fast:m=1,M=1");
    RngStream rng(123, static_cast<std::uint64_t>(r));
    const double x = run_chain(cfg, kQuad, sr, n, {}, rng).final_x[0];
    acc += x * x;
    acc2 += x * x * x * x;
  }
  const double mean = acc / R;
  const double se = std::sqrt((acc2 / R - mean * mean) / R);
  CHECK(std::abs(mean - m2) <= 5.0 * se);
}

TEST_CASE("moment observer on a long constant-step chain") {
  SamplerConfig cfg;
  cfg.kind = SamplerKind::Lmc;
  Schedule s(ConstantRule{0.1});
  MomentObserver m(10000);
  RngStream rng(4, 0);
  run_chain(cfg, kQuad, s, 410000, {&m}, rng);
  CHECK(m.count() == 400000);
  // AR(1) stationary variance 2h / (1 - (1 - h)^2)
  CHECK(m.variance_x()[0] == doctest::Approx(0.2 / 0.19).epsilon(0.03));
}
