#include "rml/average.hpp"

#include <cmath>
#include <stdexcept>

namespace rml {

void RunningAverage::update(double gamma, double value) {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw std::invalid_argument("RunningAverage: gamma must be positive");
  if (!std::isfinite(value)) throw std::invalid_argument("RunningAverage: non-finite value");
  gamma_.add(gamma);
  ++n_;
  if (n_ == 1) {
    value_.reset();
    value_.add(value);
    return;
  }
  const double current = value_.value();
  value_.add((gamma / gamma_.value()) * (value - current));
}

double generator_overdamped(const TestFunction& phi, const Potential& p, const Vec& x) {
  if (phi.dim() != p.dim() || x.size() != p.dim()) {
    throw std::invalid_argument("generator_overdamped: dimension mismatch");
  }
  const Vec g = p.grad(x);
  return -phi.directional(x, g, 0) + phi.laplacian(x, 0, p.dim());
}

double generator_underdamped(const TestFunction& g, double u, const Potential& p, const Vec& x, const Vec& v) {
  const int d = p.dim();
  if ((g.dim() != d && g.dim() != 2 * d) || x.size() != d || v.size() != d) {
    throw std::invalid_argument("generator_underdamped: dimension mismatch");
  }
  if (g.dim() == d) return g.directional(x, v, 0);
  Vec z(2 * d);
  z << x, v;
  const Vec drift = -2.0 * v - u * p.grad(x);
  return 2.0 * u * g.laplacian(z, d, d) + g.directional(z, drift, d) + g.directional(z, v, 0);
}

Observable::Observable(Kind kind, std::shared_ptr<const TestFunction> fn, std::shared_ptr<const Potential> p,
                       double u)
    : kind_(kind), fn_(std::move(fn)), p_(std::move(p)), u_(u) {}

Observable Observable::overdamped_generator(TestFunction phi, Potential p) {
  if (phi.dim() != p.dim()) throw std::invalid_argument("observable: test function and potential dimensions differ");
  Observable o(Kind::Overdamped, std::make_shared<const TestFunction>(std::move(phi)),
               std::make_shared<const Potential>(std::move(p)), 0.0);
  o.grad_f_.resize(o.p_->dim());
  return o;
}

Observable Observable::underdamped_generator(TestFunction g, Potential p, double u) {
  if (!(u > 0.0)) throw std::invalid_argument("observable: inverse mass must be positive");
  const int d = p.dim();
  bool position_only = false;
  if (g.dim() == d) {
    g = g.lift_to_phase_space();
    position_only = true;
  } else if (g.dim() != 2 * d) {
    throw std::invalid_argument("observable: test function dimension must be d or 2d");
  } else {
    position_only = !g.depends_on(d, d);
  }
  Observable o(Kind::Underdamped, std::make_shared<const TestFunction>(std::move(g)),
               std::make_shared<const Potential>(std::move(p)), u);
  o.position_only_ = position_only;
  o.grad_f_.resize(d);
  o.z_.resize(2 * d);
  o.drift_.resize(d);
  return o;
}

Observable Observable::raw(TestFunction f) {
  return Observable(Kind::Raw, std::make_shared<const TestFunction>(std::move(f)), nullptr, 0.0);
}

Observable Observable::zero() { return Observable(Kind::Zero, nullptr, nullptr, 0.0); }

double Observable::operator()(const Vec& x, const Vec* v) {
  switch (kind_) {
    case Kind::Zero:
      return 0.0;
    case Kind::Raw: {
      if (fn_->dim() == x.size()) return fn_->value(x);
      if (v == nullptr) throw std::invalid_argument("observable: phase-space function on an overdamped chain");
      z_.resize(2 * x.size());
      z_ << x, *v;
      return fn_->value(z_);
    }
    case Kind::Overdamped:
      p_->grad_into(x, grad_f_);
      return -fn_->directional(x, grad_f_, 0) + fn_->laplacian(x, 0, p_->dim());
    case Kind::Underdamped: {
      if (v == nullptr) throw std::invalid_argument("observable: underdamped generator needs a velocity");
      const int d = p_->dim();
      z_.head(d) = x;
      z_.tail(d) = *v;
      if (position_only_) return fn_->directional(z_, *v, 0);
      p_->grad_into(x, grad_f_);
      drift_ = -2.0 * *v - u_ * grad_f_;
      return 2.0 * u_ * fn_->laplacian(z_, d, d) + fn_->directional(z_, drift_, d) + fn_->directional(z_, *v, 0);
    }
  }
  return 0.0;
}

std::string Observable::describe() const {
  switch (kind_) {
    case Kind::Zero:
      return "0";
    case Kind::Raw:
      return fn_->to_string();
    case Kind::Overdamped:
      return "A[" + fn_->to_string() + "]";
    case Kind::Underdamped:
      return "L[" + fn_->to_string() + "]";
  }
  return "";
}

AveragingObserver::AveragingObserver(Observable phi, const Schedule* schedule, std::vector<std::uint64_t> checkpoints)
    : phi_(std::move(phi)), schedule_(schedule), wanted_(std::move(checkpoints)) {
  for (std::size_t i = 1; i < wanted_.size(); ++i) {
    if (wanted_[i] <= wanted_[i - 1]) throw std::invalid_argument("checkpoints must be strictly increasing");
  }
  if (!wanted_.empty() && schedule_ == nullptr) {
    throw std::invalid_argument("checkpoints need the chain's schedule");
  }
}

void AveragingObserver::before_step(std::uint64_t, double gamma, const Vec& x, const Vec* v) {
  avg_.update(gamma, phi_(x, v));
}

void AveragingObserver::after_step(std::uint64_t k, const Vec&, const Vec*) {
  if (next_ < wanted_.size() && wanted_[next_] == k) {
    Checkpoint c;
    c.n = k;
    c.estimate = avg_.value();
    for (int l = 0; l < 4; ++l) c.gamma_sum[l] = schedule_->gamma_sum(l + 1);
    taken_.push_back(c);
    ++next_;
  }
}

nlohmann::json AveragingObserver::summary() const {
  nlohmann::json j{{"estimate", avg_.value()}, {"gamma_sum", avg_.gamma_sum()}, {"n", avg_.n()}};
  if (!taken_.empty()) {
    nlohmann::json cps = nlohmann::json::array();
    for (const Checkpoint& c : taken_) {
      cps.push_back({{"n", c.n},
                     {"estimate", c.estimate},
                     {"gamma_sums", {c.gamma_sum[0], c.gamma_sum[1], c.gamma_sum[2], c.gamma_sum[3]}}});
    }
    j["checkpoints"] = cps;
  }
  return j;
}

RunningAverage estimate_expectation(const SamplerConfig& cfg, const Potential& p, Schedule& schedule,
                                    const Observable& phi, std::uint64_t n_steps, RngStream& rng) {
  AveragingObserver obs(phi);
  run_chain(cfg, p, schedule, n_steps, {&obs}, rng);
  return obs.average();
}

}  // namespace rml
