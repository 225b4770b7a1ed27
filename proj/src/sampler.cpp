#include "rml/sampler.hpp"

#include <cmath>

namespace rml {

namespace {

struct Workspace {
  Vec g, xh;
  Vec n1, n2, n3;
  explicit Workspace(int d) : g(d), xh(d), n1(d), n2(d), n3(d) {}
};

void rlmc_inplace(Vec& x, double gamma, const Potential& p, double alpha, const Vec& u_half, const Vec& u_full,
                  Workspace& w) {
  p.grad_into(x, w.g);
  w.xh = x - (alpha * gamma) * w.g + std::sqrt(2.0 * alpha * gamma) * u_half;
  p.grad_into(w.xh, w.g);
  x.noalias() -= gamma * w.g;
  x.noalias() += std::sqrt(2.0 * gamma) * u_full;
}

void lmc_inplace(Vec& x, double gamma, const Potential& p, const Vec& z, Workspace& w) {
  p.grad_into(x, w.g);
  x.noalias() -= gamma * w.g;
  x.noalias() += std::sqrt(2.0 * gamma) * z;
}

void rulmc_inplace(Vec& x, Vec& v, double gamma, double u, const Potential& p, double alpha, const Vec& w1,
                   const Vec& w2, const Vec& w3, Workspace& w) {
  const double a = alpha * gamma;
  const double su = std::sqrt(u);
  p.grad_into(x, w.g);
  // a - (1 - e^{-2a})/2 computed without cancellation.
  w.xh = x + (-0.5 * std::expm1(-2.0 * a)) * v - (0.5 * u * kernel::ou_int1(a)) * w.g + su * w1;
  p.grad_into(w.xh, w.g);
  const double rest = (1.0 - alpha) * gamma;
  const double cx = -0.5 * std::expm1(-2.0 * gamma);
  const double dx = 0.5 * u * gamma * -std::expm1(-2.0 * rest);
  const double dv = u * gamma * std::exp(-2.0 * rest);
  x.noalias() += cx * v;
  x.noalias() -= dx * w.g;
  x.noalias() += su * w2;
  v *= std::exp(-2.0 * gamma);
  v.noalias() -= dv * w.g;
  v.noalias() += (2.0 * su) * w3;
}

void klmc_inplace(Vec& x, Vec& v, double gamma, double u, const Potential& p, const Vec& w1, const Vec& w2,
                  Workspace& w) {
  const double su = std::sqrt(u);
  const double e = -std::expm1(-2.0 * gamma);
  p.grad_into(x, w.g);
  x.noalias() += (0.5 * e) * v;
  x.noalias() -= (0.5 * u * kernel::ou_int1(gamma)) * w.g;
  x.noalias() += su * w1;
  v *= std::exp(-2.0 * gamma);
  v.noalias() -= (0.5 * u * e) * w.g;
  v.noalias() += (2.0 * su) * w2;
}

void check_gamma(double gamma) {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw std::invalid_argument("step size must be positive");
}

void check_u(double u) {
  if (!(u > 0.0) || !std::isfinite(u)) throw std::invalid_argument("inverse mass u must be positive");
}

void check_finite(std::uint64_t step, const Vec& x, const Vec* v) {
  if (!x.allFinite() || (v != nullptr && !v->allFinite())) throw DivergenceError(step, "non-finite chain state");
}

double draw_alpha(RngStream& rng, std::optional<double> alpha) {
  if (alpha) {
    if (!(*alpha >= 0.0 && *alpha <= 1.0)) throw std::invalid_argument("forced alpha must lie in [0, 1]");
    return *alpha;
  }
  return rng.uniform();
}

}  // namespace

RlmcNoise draw_rlmc_noise(int dim, RngStream& rng, std::optional<double> alpha) {
  RlmcNoise n;
  n.alpha = draw_alpha(rng, alpha);
  n.u_half.resize(dim);
  n.u_full.resize(dim);
  Vec* out[3] = {&n.u_half, &n.u_full, nullptr};
  sample_block_into(factorize(rlmc_gram(n.alpha)), rng, out);
  return n;
}

RulmcNoise draw_rulmc_noise(int dim, double gamma, RngStream& rng, std::optional<double> alpha) {
  check_gamma(gamma);
  RulmcNoise n;
  n.alpha = draw_alpha(rng, alpha);
  n.w1.resize(dim);
  n.w2.resize(dim);
  n.w3.resize(dim);
  Vec* out[3] = {&n.w1, &n.w2, &n.w3};
  sample_block_into(factorize(detail::rulmc_gram_unchecked(n.alpha, gamma)), rng, out);
  return n;
}

KlmcNoise draw_klmc_noise(int dim, double gamma, RngStream& rng) {
  KlmcNoise n;
  n.w1.resize(dim);
  n.w2.resize(dim);
  Vec* out[3] = {&n.w1, &n.w2, nullptr};
  sample_block_into(factorize(klmc_gram(gamma)), rng, out);
  return n;
}

OverdampedState lmc_step(const OverdampedState& s, double gamma, const Potential& p, const Vec& z) {
  check_gamma(gamma);
  Workspace w(p.dim());
  OverdampedState out{s.x, s.n + 1};
  lmc_inplace(out.x, gamma, p, z, w);
  check_finite(out.n, out.x, nullptr);
  return out;
}

OverdampedState lmc_step(const OverdampedState& s, double gamma, const Potential& p, RngStream& rng) {
  Vec z(p.dim());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.normal();
  return lmc_step(s, gamma, p, z);
}

OverdampedState rlmc_step(const OverdampedState& s, double gamma, const Potential& p, const RlmcNoise& noise) {
  check_gamma(gamma);
  Workspace w(p.dim());
  OverdampedState out{s.x, s.n + 1};
  rlmc_inplace(out.x, gamma, p, noise.alpha, noise.u_half, noise.u_full, w);
  check_finite(out.n, out.x, nullptr);
  return out;
}

OverdampedState rlmc_step(const OverdampedState& s, double gamma, const Potential& p, RngStream& rng,
                          std::optional<double> alpha) {
  return rlmc_step(s, gamma, p, draw_rlmc_noise(p.dim(), rng, alpha));
}

UnderdampedState rulmc_step(const UnderdampedState& s, double gamma, double u, const Potential& p,
                            const RulmcNoise& noise) {
  check_gamma(gamma);
  check_u(u);
  Workspace w(p.dim());
  UnderdampedState out{s.x, s.v, s.n + 1};
  rulmc_inplace(out.x, out.v, gamma, u, p, noise.alpha, noise.w1, noise.w2, noise.w3, w);
  check_finite(out.n, out.x, &out.v);
  return out;
}

UnderdampedState rulmc_step(const UnderdampedState& s, double gamma, double u, const Potential& p, RngStream& rng,
                            std::optional<double> alpha) {
  return rulmc_step(s, gamma, u, p, draw_rulmc_noise(p.dim(), gamma, rng, alpha));
}

UnderdampedState klmc_step(const UnderdampedState& s, double gamma, double u, const Potential& p,
                           const KlmcNoise& noise) {
  check_gamma(gamma);
  check_u(u);
  Workspace w(p.dim());
  UnderdampedState out{s.x, s.v, s.n + 1};
  klmc_inplace(out.x, out.v, gamma, u, p, noise.w1, noise.w2, w);
  check_finite(out.n, out.x, &out.v);
  return out;
}

UnderdampedState klmc_step(const UnderdampedState& s, double gamma, double u, const Potential& p, RngStream& rng) {
  return klmc_step(s, gamma, u, p, draw_klmc_noise(p.dim(), gamma, rng));
}

double resolve_inverse_mass(const SamplerConfig& cfg, const Potential& p) {
  if (cfg.u) {
    check_u(*cfg.u);
    return *cfg.u;
  }
  return 1.0 / p.M();
}

// ---------------------------------------------------------------- observers

MomentObserver::MomentObserver(std::uint64_t burn_in, std::uint64_t stride)
    : burn_in_(burn_in), stride_(stride == 0 ? 1 : stride) {}

void MomentObserver::after_step(std::uint64_t k, const Vec& x, const Vec* v) {
  if (k <= burn_in_ || (k - burn_in_) % stride_ != 0) return;
  if (count_ == 0) {
    mean_x_ = Vec::Zero(x.size());
    m2_x_ = Vec::Zero(x.size());
    if (v) {
      mean_v_ = Vec::Zero(v->size());
      m2_v_ = Vec::Zero(v->size());
    }
  }
  ++count_;
  const double inv = 1.0 / static_cast<double>(count_);
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double d = x[i] - mean_x_[i];
    mean_x_[i] += d * inv;
    m2_x_[i] += d * (x[i] - mean_x_[i]);
  }
  if (v) {
    for (Eigen::Index i = 0; i < v->size(); ++i) {
      const double d = (*v)[i] - mean_v_[i];
      mean_v_[i] += d * inv;
      m2_v_[i] += d * ((*v)[i] - mean_v_[i]);
    }
  }
}

Vec MomentObserver::variance_x() const {
  if (count_ < 2) return Vec::Constant(mean_x_.size(), std::nan(""));
  return m2_x_ / static_cast<double>(count_ - 1);
}

Vec MomentObserver::second_moment_x() const {
  if (count_ == 0) return Vec();
  return m2_x_ / static_cast<double>(count_) + mean_x_.cwiseProduct(mean_x_);
}

namespace {
nlohmann::json to_json_vec(const Vec& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}
}  // namespace

nlohmann::json MomentObserver::summary() const {
  nlohmann::json j;
  j["count"] = count_;
  j["burn_in"] = burn_in_;
  j["stride"] = stride_;
  j["mean_x"] = to_json_vec(mean_x_);
  j["variance_x"] = to_json_vec(variance_x());
  if (mean_v_.size() > 0) {
    j["mean_v"] = to_json_vec(mean_v_);
    j["variance_v"] = count_ < 2 ? to_json_vec(Vec::Constant(mean_v_.size(), std::nan("")))
                                 : to_json_vec(m2_v_ / static_cast<double>(count_ - 1));
  }
  return j;
}

TraceObserver::TraceObserver(std::uint64_t burn_in, std::uint64_t stride, std::size_t reserve)
    : burn_in_(burn_in), stride_(stride == 0 ? 1 : stride) {
  data_.reserve(reserve);
}

void TraceObserver::after_step(std::uint64_t k, const Vec& x, const Vec*) {
  if (k <= burn_in_ || (k - burn_in_) % stride_ != 0) return;
  dim_ = static_cast<std::size_t>(x.size());
  data_.insert(data_.end(), x.data(), x.data() + x.size());
}

std::vector<double> TraceObserver::coordinate(int i) const {
  std::vector<double> out;
  if (dim_ == 0) return out;
  out.reserve(samples());
  for (std::size_t s = 0; s < samples(); ++s) out.push_back(data_[s * dim_ + static_cast<std::size_t>(i)]);
  return out;
}

nlohmann::json TraceObserver::summary() const {
  return {{"samples", samples()}, {"burn_in", burn_in_}, {"stride", stride_}};
}

// ---------------------------------------------------------------- chain

nlohmann::json ChainSummary::to_json() const {
  nlohmann::json j;
  j["sampler"] = to_string(kind);
  j["schedule"] = schedule;
  j["n_steps"] = n_steps;
  j["seed"] = seed;
  j["stream"] = stream;
  if (is_underdamped(kind)) j["u"] = u;
  j["final_x"] = to_json_vec(final_x);
  if (final_v.size() > 0) j["final_v"] = to_json_vec(final_v);
  j["observers"] = observers;
  return j;
}

ChainSummary run_chain(const SamplerConfig& cfg, const Potential& p, Schedule& schedule, std::uint64_t n_steps,
                       const std::vector<Observer*>& observers, RngStream& rng) {
  if (n_steps == 0) throw std::invalid_argument("run_chain: n_steps must be at least 1");
  const int d = p.dim();
  const bool under = is_underdamped(cfg.kind);
  Vec x = p.argmin();
  Vec v = Vec::Zero(d);
  if (cfg.init == InitPolicy::Explicit) {
    if (cfg.x0.size() != d) throw std::invalid_argument("run_chain: explicit x0 has the wrong dimension");
    x = cfg.x0;
    if (cfg.v0.size() > 0) {
      if (cfg.v0.size() != d) throw std::invalid_argument("run_chain: explicit v0 has the wrong dimension");
      v = cfg.v0;
    }
  }
  const double u = under ? resolve_inverse_mass(cfg, p) : 0.0;
  const Vec* vp = under ? &v : nullptr;

  Workspace w(d);
  Vec* block[3] = {&w.n1, &w.n2, &w.n3};
  GramFactor klmc_factor;
  double klmc_gamma = -1.0;

  for (std::uint64_t k = 1; k <= n_steps; ++k) {
    const double gamma = schedule.next_gamma();
    for (Observer* o : observers) o->before_step(k, gamma, x, vp);
    switch (cfg.kind) {
      case SamplerKind::Lmc: {
        for (int i = 0; i < d; ++i) w.n1[i] = rng.normal();
        lmc_inplace(x, gamma, p, w.n1, w);
        break;
      }
      case SamplerKind::Rlmc: {
        const double alpha = rng.uniform();
        sample_block_into(factorize(rlmc_gram(alpha)), rng, block);
        rlmc_inplace(x, gamma, p, alpha, w.n1, w.n2, w);
        break;
      }
      case SamplerKind::Rulmc: {
        const double alpha = rng.uniform();
        sample_block_into(factorize(detail::rulmc_gram_unchecked(alpha, gamma)), rng, block);
        rulmc_inplace(x, v, gamma, u, p, alpha, w.n1, w.n2, w.n3, w);
        break;
      }
      case SamplerKind::Klmc: {
        if (gamma != klmc_gamma) {
          klmc_factor = factorize(klmc_gram(gamma));
          klmc_gamma = gamma;
        }
        sample_block_into(klmc_factor, rng, block);
        klmc_inplace(x, v, gamma, u, p, w.n1, w.n2, w);
        break;
      }
    }
    check_finite(k, x, vp);
    for (Observer* o : observers) o->after_step(k, x, vp);
  }

  ChainSummary out;
  out.kind = cfg.kind;
  out.schedule = schedule.descriptor();
  out.n_steps = n_steps;
  out.seed = rng.seed();
  out.stream = rng.stream_id();
  out.u = u;
  out.final_x = x;
  if (under) out.final_v = v;
  for (Observer* o : observers) out.observers[o->name()] = o->summary();
  return out;
}

}  // namespace rml
