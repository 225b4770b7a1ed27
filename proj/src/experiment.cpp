#include "rml/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <thread>

#include "rml/average.hpp"
#include "rml/bias.hpp"
#include "rml/clt.hpp"
#include "rml/descriptor.hpp"
#include "rml/potential.hpp"
#include "rml/sampler.hpp"
#include "rml/schedule.hpp"
#include "rml/test_function.hpp"

namespace rml {

namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

// Stream ids for exact target draws; chains use small ids (replicate or job index).
constexpr std::uint64_t kExactStream = 0x6578616374000000ULL;

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<json>> rows;
};

std::string cell_text(const json& v) {
  if (v.is_null()) return "";
  if (v.is_string()) {
    const std::string s = v.get<std::string>();
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
      if (c == '"') q += '"';
      q += c;
    }
    return q + "\"";
  }
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_unsigned()) return std::to_string(v.get<std::uint64_t>());
  if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
  if (v.is_number_float()) return format_double(v.get<double>());
  return v.dump();
}

std::string render_csv(const Table& t) {
  std::string out;
  for (std::size_t i = 0; i < t.columns.size(); ++i) out += (i ? "," : "") + t.columns[i];
  out += "\n";
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + cell_text(row[i]);
    out += "\n";
  }
  return out;
}

json render_json(const Table& t) {
  json arr = json::array();
  for (const auto& row : t.rows) {
    json o = json::object();
    for (std::size_t i = 0; i < t.columns.size(); ++i) o[t.columns[i]] = row[i];
    arr.push_back(std::move(o));
  }
  return arr;
}

// NaN and infinities are not representable in JSON.
json num(double v) { return std::isfinite(v) ? json(v) : json(); }

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << content;
}

/// Calls fn(i) for i in [0, count) on `workers` threads; the first exception is rethrown.
template <class Fn>
void parallel_for(std::size_t count, unsigned workers, Fn fn) {
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
  std::atomic<std::size_t> next{0};
  std::exception_ptr first;
  std::mutex mu;
  auto work = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < count;) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!first) first = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (first) std::rethrow_exception(first);
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

struct Context {
  const ExperimentConfig& cfg;
  std::uint64_t seed;
  unsigned workers;
  Potential potential;
  SamplerKind kind;
  SamplerConfig sampler;
  double u = 0.0;
  std::vector<std::string> notes;
  json divergences = json::array();
  bool partial = false;

  bool underdamped() const { return is_underdamped(kind); }
};

Context make_context(const ExperimentConfig& cfg, std::uint64_t seed, unsigned workers) {
  Context ctx{cfg, seed, workers, Potential::parse(cfg.potential), parse_sampler_kind(cfg.sampler), {}, 0.0, cfg.notes};
  ctx.sampler.kind = ctx.kind;
  ctx.sampler.u = cfg.u;
  if (cfg.init == "explicit") {
    ctx.sampler.init = InitPolicy::Explicit;
    ctx.sampler.x0 = Eigen::Map<const Vec>(cfg.x0.data(), static_cast<Eigen::Index>(cfg.x0.size()));
    if (!cfg.v0.empty()) ctx.sampler.v0 = Eigen::Map<const Vec>(cfg.v0.data(), static_cast<Eigen::Index>(cfg.v0.size()));
  }
  if (ctx.underdamped()) ctx.u = resolve_inverse_mass(ctx.sampler, ctx.potential);
  return ctx;
}

struct ObservableSetup {
  Observable observable = Observable::zero();
  std::optional<TestFunction> position_phi;  // phi~ over x when the law is available in closed form
  std::optional<TestFunction> phase_g;       // general g over (x, v)
};

ObservableSetup make_observable(const Context& ctx) {
  const int d = ctx.potential.dim();
  const std::string& desc = ctx.cfg.test_function;
  ObservableSetup s;
  if (!ctx.underdamped()) {
    TestFunction phi = TestFunction::parse(desc, d, false);
    if (ctx.cfg.observable == "generator") {
      s.observable = Observable::overdamped_generator(phi, ctx.potential);
      s.position_phi = phi;
    } else if (ctx.cfg.observable == "raw") {
      s.observable = Observable::raw(phi);
    }
    return s;
  }
  TestFunction g = TestFunction::parse(desc, d, true);
  const bool position_only = !g.depends_on(d, d);
  if (ctx.cfg.observable == "generator") {
    if (position_only) {
      TestFunction phi = TestFunction::parse(desc, d, false);
      s.observable = Observable::underdamped_generator(phi, ctx.potential, ctx.u);
      s.position_phi = phi;
    } else {
      s.observable = Observable::underdamped_generator(g, ctx.potential, ctx.u);
      s.phase_g = g;
    }
  } else if (ctx.cfg.observable == "raw") {
    s.observable = Observable::raw(g);
  }
  return s;
}

struct LawSetup {
  std::optional<AsymptoticLaw> law;
  json constants = json::object();
};

json estimate_json(const Estimate& e) { return {{"value", num(e.value)}, {"std_error", num(e.std_error)}}; }

json terms_json(const BiasTerms& b) {
  json t = json::array();
  for (const Estimate& e : b.terms) t.push_back(estimate_json(e));
  return {{"terms", t}, {"total", estimate_json(b.total)}};
}

LawSetup make_law(Context& ctx, const ObservableSetup& obs, const Schedule& schedule) {
  LawSetup out;
  if (ctx.cfg.observable != "generator") {
    ctx.notes.push_back("no asymptotic law: observable is not a generator image");
    return out;
  }
  const QuadratureOracle oracle = QuadratureOracle::gauss_hermite(ctx.cfg.oracle_nodes);
  out.constants["oracle"] = oracle.describe();
  try {
    if (!ctx.underdamped()) {
      const RegimeReport regime = classify(schedule, Setting::Overdamped);
      const Estimate var = asym_variance_overdamped(*obs.position_phi, ctx.potential, oracle);
      out.constants["variance"] = estimate_json(var);
      double varrho = 0.0;
      if (regime.regime != Regime::Zero) {
        if (ctx.kind != SamplerKind::Rlmc) {
          ctx.notes.push_back("no asymptotic law: the bias constant is implemented for rlmc only");
          return out;
        }
        const BiasTerms b = asym_bias_rho_overdamped(*obs.position_phi, ctx.potential, oracle);
        out.constants["varrho"] = terms_json(b);
        varrho = b.total.value;
      }
      out.law = overdamped_law(var.value, varrho, regime);
    } else if (obs.position_phi) {
      const RegimeReport regime = classify(schedule, Setting::UnderdampedSpecial);
      const KineticConstants k = kinetic_special_law(*obs.position_phi, ctx.u, ctx.potential, ctx.kind, oracle);
      out.constants["variance"] = estimate_json(k.variance);
      out.constants["rho"] = terms_json(k.rho);
      out.constants["u"] = ctx.u;
      out.law = kinetic_law(k, regime);
    } else {
      const Estimate var = asym_variance_underdamped(*obs.phase_g, ctx.u, ctx.potential, oracle);
      out.constants["variance"] = estimate_json(var);
      out.constants["u"] = ctx.u;
      out.law = underdamped_law(var.value, classify(schedule, Setting::Overdamped));
    }
  } catch (const std::exception& e) {
    ctx.notes.push_back(std::string("no asymptotic law: ") + e.what());
    out.law.reset();
  }
  return out;
}

void add_schedule_notes(Context& ctx, const Schedule& s) {
  const ScheduleValidation v =
      validate_schedule(s, ctx.underdamped() ? Setting::UnderdampedSpecial : Setting::Overdamped, &ctx.potential);
  for (const std::string& w : v.warnings) ctx.notes.push_back("schedule: " + w);
}

// ---------------------------------------------------------------- replicate tables

const std::vector<std::string> kReplicateColumns = {
    "replicate", "stream", "n", "estimate", "gamma_sum", "gamma_sum2", "gamma_sum3", "gamma_sum4",
    "normalizer", "scaled", "statistic", "status"};

std::vector<json> replicate_row(const ReplicateOutcome& o, std::uint64_t n, double estimate, const double* sums,
                                const std::optional<AsymptoticLaw>& law) {
  std::vector<json> row = {o.replicate, o.stream, n, num(estimate), num(sums[0]), num(sums[1]), num(sums[2]),
                           num(sums[3])};
  if (law) {
    const double norm = normalizer_value(law->normalizer, {sums[0], sums[1], sums[2], sums[3]});
    row.push_back(num(norm));
    row.push_back(num(norm * estimate));
    row.push_back(num(norm * estimate - law->mean));
  } else {
    row.insert(row.end(), {json(), json(), json()});
  }
  row.push_back("ok");
  return row;
}

struct Moments {
  std::size_t n = 0;
  double mean = 0.0;
  double variance = 0.0;
};

Moments moments(const std::vector<double>& v) {
  Moments m;
  m.n = v.size();
  if (v.empty()) return m;
  double mean = 0.0, m2 = 0.0;
  std::size_t k = 0;
  for (double x : v) {
    ++k;
    const double d = x - mean;
    mean += d / static_cast<double>(k);
    m2 += d * (x - mean);
  }
  m.mean = mean;
  m.variance = v.size() > 1 ? m2 / static_cast<double>(v.size() - 1) : 0.0;
  return m;
}

// classify() throws for unsupported combinations; summaries record null instead.
json regime_json(const Schedule& s, Setting setting) {
  try {
    const RegimeReport r = classify(s, setting);
    return {{"label", r.label()}, {"rate_exponent", r.rate_exponent}, {"rate", r.rate_descriptor},
            {"gamma_hat_definition", r.gamma_hat_definition}};
  } catch (const std::exception&) {
    return json();
  }
}

struct KindOutput {
  Table table;
  json summary = json::object();
};

KindOutput run_replicate_kind(Context& ctx, std::size_t replicates) {
  const ExperimentConfig& cfg = ctx.cfg;
  const Schedule schedule = Schedule::parse(cfg.schedule);
  add_schedule_notes(ctx, schedule);
  const ObservableSetup obs = make_observable(ctx);
  const LawSetup law = make_law(ctx, obs, schedule);

  ReplicateSpec spec{ctx.sampler, ctx.potential, cfg.schedule, obs.observable, cfg.n_steps, ctx.seed, cfg.checkpoints,
                     false};
  std::vector<std::uint64_t> cps = cfg.checkpoints;
  if (!cps.empty() && cps.back() == cfg.n_steps) cps.pop_back();
  spec.checkpoints = cps;
  const std::vector<ReplicateOutcome> outcomes = run_replicates(spec, replicates, ctx.workers);

  KindOutput out;
  out.table.columns = kReplicateColumns;
  std::map<std::uint64_t, std::vector<double>> scaled_at;
  for (const ReplicateOutcome& o : outcomes) {
    if (!o.ok) {
      ctx.partial = true;
      ctx.divergences.push_back({{"replicate", o.replicate}, {"stream", o.stream}, {"step", o.failed_step},
                                 {"error", o.error}});
      std::vector<json> row(kReplicateColumns.size());
      row[0] = o.replicate;
      row[1] = o.stream;
      row[2] = o.failed_step;
      row.back() = "diverged";
      out.table.rows.push_back(std::move(row));
      continue;
    }
    for (const auto& c : o.checkpoints) {
      auto row = replicate_row(o, c.n, c.estimate, c.gamma_sum, law.law);
      if (law.law) scaled_at[c.n].push_back(row[9].get<double>());
      out.table.rows.push_back(std::move(row));
    }
    auto row = replicate_row(o, cfg.n_steps, o.estimate, o.gamma_sums.data(), law.law);
    if (law.law && row[9].is_number()) scaled_at[cfg.n_steps].push_back(row[9].get<double>());
    out.table.rows.push_back(std::move(row));
  }

  json& s = out.summary;
  s["experiment"] = cfg.kind;
  s["replicates"] = replicates;
  s["completed"] = outcomes.size() - ctx.divergences.size();
  s["divergent"] = ctx.divergences.size();
  s["observable"] = obs.observable.describe();
  s["schedule"] = schedule.descriptor();
  s["regime"] = regime_json(schedule, ctx.underdamped() && obs.position_phi ? Setting::UnderdampedSpecial
                                                                          : Setting::Overdamped);
  s["constants"] = law.constants;
  s["law"] = law.law ? law.law->to_json() : json();
  if (law.law) {
    json per_n = json::array();
    for (const auto& [n, v] : scaled_at) {
      const Moments m = moments(v);
      per_n.push_back({{"n", n}, {"count", m.n}, {"mean_scaled", num(m.mean)}, {"variance_scaled", num(m.variance)}});
    }
    s["by_n"] = per_n;
    const std::vector<double> stats = standardized_statistics(outcomes, *law.law);
    if (law.law->regime.regime != Regime::Infinite && law.law->variance > 0.0) {
      s["normality"] = normality_check(stats, law.law->variance, cfg.ks_coefficient).to_json();
      std::size_t covered = 0, total = 0;
      for (const ReplicateOutcome& o : outcomes) {
        if (!o.ok) continue;
        const double norm = normalizer_value(law.law->normalizer, o.gamma_sums);
        const Interval ci = confidence_interval(o.estimate, norm, *law.law, cfg.level);
        ++total;
        if (ci.lower <= 0.0 && 0.0 <= ci.upper) ++covered;
        if (o.replicate == 0 || total == 1) {
          s["interval_first_replicate"] = {{"lower", num(ci.lower)}, {"upper", num(ci.upper)},
                                           {"center", num(ci.center)}, {"half_width", num(ci.half_width)},
                                           {"level", cfg.level}};
        }
      }
      s["coverage_of_zero"] = total ? json(static_cast<double>(covered) / static_cast<double>(total)) : json();
    }
  }
  return out;
}

// ---------------------------------------------------------------- bias sweep

struct BiasJob {
  double h = 0.0;
  std::size_t seed_index = 0;
  std::uint64_t stream = 0;
  double w2 = 0.0;
  std::string method;
  bool diverged = false;
  std::string error;
};

double oracle_w2(const Context& ctx, double h) {
  const Potential& p = ctx.potential;
  if (!p.is_quadratic() || (ctx.kind != SamplerKind::Rlmc && ctx.kind != SamplerKind::Lmc)) return std::nan("");
  double s = 0.0;
  for (double c : p.curvatures()) {
    const double ch = c * h;
    const double v = ctx.kind == SamplerKind::Rlmc ? rlmc_stationary_variance_quadratic(ch)
                                                   : lmc_stationary_variance_quadratic(ch);
    const double diff = std::sqrt(v / c) - 1.0 / std::sqrt(c);
    s += diff * diff;
  }
  return std::sqrt(s);
}

KindOutput run_bias_sweep(Context& ctx) {
  const ExperimentConfig& cfg = ctx.cfg;
  const Potential& p = ctx.potential;
  const int d = p.dim();
  const std::uint64_t kept = cfg.samples * cfg.thin;
  const auto burn = static_cast<std::uint64_t>(
      std::ceil(cfg.burn_in_fraction / (1.0 - cfg.burn_in_fraction) * static_cast<double>(kept)));
  const std::uint64_t n_steps = burn + kept;

  std::vector<BiasJob> jobs;
  for (double h : cfg.h_grid) {
    for (std::size_t s = 0; s < cfg.bias_seeds; ++s) {
      BiasJob j;
      j.h = h;
      j.seed_index = s;
      j.stream = jobs.size();
      jobs.push_back(j);
    }
  }

  parallel_for(jobs.size(), ctx.workers, [&](std::size_t i) {
    BiasJob& job = jobs[i];
    Schedule schedule(ConstantRule{job.h});
    TraceObserver trace(burn, cfg.thin, cfg.samples * static_cast<std::size_t>(d));
    RngStream rng(ctx.seed, job.stream);
    try {
      run_chain(ctx.sampler, p, schedule, n_steps, {&trace}, rng);
    } catch (const DivergenceError& e) {
      job.diverged = true;
      job.error = e.what();
      return;
    }
    RngStream exact(ctx.seed, kExactStream + job.stream);
    const std::size_t n = trace.samples();
    std::vector<double> chain0 = trace.coordinate(0);
    if (d == 1) {
      std::vector<double> target(n);
      Vec x(1);
      for (std::size_t k = 0; k < n; ++k) {
        sample_target(p, exact, x);
        target[k] = x[0];
      }
      job.w2 = w2_empirical_1d(std::move(chain0), std::move(target));
      job.method = "empirical-1d";
    } else {
      Vec mu_c = Vec::Zero(d), sd_c = Vec::Zero(d), mu_t = Vec::Zero(d), sd_t = Vec::Zero(d);
      for (int c = 0; c < d; ++c) {
        const Moments m = moments(trace.coordinate(c));
        mu_c[c] = m.mean;
        sd_c[c] = std::sqrt(m.variance);
      }
      if (p.is_quadratic()) {
        for (int c = 0; c < d; ++c) sd_t[c] = 1.0 / std::sqrt(p.curvatures()[static_cast<std::size_t>(c)]);
        job.method = "gaussian-diag";
      } else {
        std::vector<std::vector<double>> cols(static_cast<std::size_t>(d), std::vector<double>(n));
        Vec x(d);
        for (std::size_t k = 0; k < n; ++k) {
          sample_target(p, exact, x);
          for (int c = 0; c < d; ++c) cols[static_cast<std::size_t>(c)][k] = x[c];
        }
        for (int c = 0; c < d; ++c) {
          const Moments m = moments(cols[static_cast<std::size_t>(c)]);
          mu_t[c] = m.mean;
          sd_t[c] = std::sqrt(m.variance);
        }
        job.method = "gaussian-diag-approx";
      }
      job.w2 = w2_gaussian_diag(mu_c, sd_c, mu_t, sd_t);
    }
  });

  KindOutput out;
  out.table.columns = {"h", "sampler", "seed", "stream", "empirical_w2", "oracle_value", "paper_bound",
                       "valid_window", "method"};
  const std::string sampler = to_string(ctx.kind);
  const bool has_bound = ctx.kind == SamplerKind::Rlmc || ctx.kind == SamplerKind::Rulmc;
  if (ctx.kind == SamplerKind::Rulmc && cfg.u && std::abs(*cfg.u * p.M() - 1.0) > 1e-12) {
    ctx.notes.push_back("bias bound for rulmc assumes u = 1/M; configured u = " + format_double(*cfg.u));
  }

  auto bound_at = [&](double h, bool& valid) -> double {
    BiasBoundInput in = BiasBoundInput::from_potential(p, h);
    in.C1 = cfg.C1;
    in.C2 = cfg.C2;
    valid = ctx.kind == SamplerKind::Rlmc ? rlmc_bound_valid(in) : rulmc_bound_valid(in);
    if (!valid) return std::nan("");
    return ctx.kind == SamplerKind::Rlmc ? rlmc_bias_bound(in) : rulmc_bias_bound(in);
  };
  auto oracle_at = [&](double h) {
    try {
      return oracle_w2(ctx, h);
    } catch (const std::exception&) {
      return std::nan("");
    }
  };

  json per_h = json::array();
  std::vector<double> hs, medians;
  bool monotone = true, dominated = true;
  double prev = -1.0;
  for (std::size_t hi = 0; hi < cfg.h_grid.size(); ++hi) {
    const double h = cfg.h_grid[hi];
    bool valid = false;
    const double bound = has_bound ? bound_at(h, valid) : std::nan("");
    const double oracle = oracle_at(h);
    std::vector<double> w2s;
    for (const BiasJob& j : jobs) {
      if (j.h != h) continue;
      if (j.diverged) {
        ctx.partial = true;
        ctx.divergences.push_back({{"h", h}, {"seed", j.seed_index}, {"stream", j.stream}, {"error", j.error}});
        out.table.rows.push_back({h, sampler, j.seed_index, j.stream, json(), num(oracle), num(bound),
                                  has_bound ? json(valid) : json(), "diverged"});
        continue;
      }
      w2s.push_back(j.w2);
      out.table.rows.push_back({h, sampler, j.seed_index, j.stream, num(j.w2), num(oracle), num(bound),
                                has_bound ? json(valid) : json(), j.method});
    }
    const double med = w2s.empty() ? std::nan("") : median(w2s);
    if (!w2s.empty()) {
      hs.push_back(h);
      medians.push_back(med);
      if (med < prev) monotone = false;
      prev = med;
    }
    if (!(has_bound && valid && med <= bound)) dominated = false;
    per_h.push_back({{"h", h}, {"median_w2", num(med)}, {"oracle_value", num(oracle)}, {"paper_bound", num(bound)},
                     {"valid_window", has_bound ? json(valid) : json()}, {"runs", w2s.size()}});
  }
  double slope = std::nan("");
  try {
    slope = loglog_slope(hs, medians);
  } catch (const std::exception&) {
  }
  out.summary = {{"experiment", "bias-sweep"},
                 {"sampler", sampler},
                 {"potential", p.descriptor()},
                 {"u", ctx.underdamped() ? json(ctx.u) : json()},
                 {"steps_per_run", n_steps},
                 {"burn_in_steps", burn},
                 {"thin", cfg.thin},
                 {"samples_per_run", cfg.samples},
                 {"constants", {{"C1", cfg.C1}, {"C2", cfg.C2}}},
                 {"by_h", per_h},
                 {"loglog_slope", num(slope)},
                 {"monotone_in_h", monotone},
                 {"bound_dominates_everywhere", dominated}};
  return out;
}

// ---------------------------------------------------------------- w2 rate

class SnapshotObserver : public Observer {
 public:
  explicit SnapshotObserver(std::vector<std::uint64_t> at) : at_(std::move(at)) {}
  std::string name() const override { return "snapshot"; }
  void before_step(std::uint64_t, double, const Vec&, const Vec*) override {}
  void after_step(std::uint64_t k, const Vec& x, const Vec*) override {
    if (next_ < at_.size() && at_[next_] == k) {
      states.push_back(x);
      ++next_;
    }
  }
  json summary() const override { return {{"snapshots", states.size()}}; }
  std::vector<Vec> states;

 private:
  std::vector<std::uint64_t> at_;
  std::size_t next_ = 0;
};

KindOutput run_w2_rate(Context& ctx) {
  const ExperimentConfig& cfg = ctx.cfg;
  const Potential& p = ctx.potential;
  const int d = p.dim();
  std::vector<std::uint64_t> at = cfg.checkpoints;
  if (at.empty() || at.back() != cfg.n_steps) at.push_back(cfg.n_steps);
  {
    const Schedule probe = Schedule::parse(cfg.schedule);
    add_schedule_notes(ctx, probe);
  }

  const std::size_t R = cfg.replicates;
  std::vector<std::vector<Vec>> snaps(R);
  std::vector<std::string> errors(R);
  parallel_for(R, ctx.workers, [&](std::size_t r) {
    Schedule schedule = Schedule::parse(cfg.schedule);
    SnapshotObserver obs(at);
    RngStream rng(ctx.seed, r);
    try {
      run_chain(ctx.sampler, p, schedule, cfg.n_steps, {&obs}, rng);
      snaps[r] = std::move(obs.states);
    } catch (const DivergenceError& e) {
      errors[r] = e.what();
    }
  });

  std::vector<std::size_t> good;
  for (std::size_t r = 0; r < R; ++r) {
    if (errors[r].empty()) {
      good.push_back(r);
    } else {
      ctx.partial = true;
      ctx.divergences.push_back({{"replicate", r}, {"stream", r}, {"error", errors[r]}});
    }
  }

  // The same exact sample serves every checkpoint.
  RngStream exact(ctx.seed, kExactStream);
  std::vector<Vec> target(good.size(), Vec(d));
  for (Vec& x : target) sample_target(p, exact, x);

  Schedule sums = Schedule::parse(cfg.schedule);
  KindOutput out;
  out.table.columns = {"n", "gamma_sum", "replicates", "w2", "method"};
  json rows = json::array();
  std::vector<double> ns, w2s;
  for (std::size_t c = 0; c < at.size(); ++c) {
    while (sums.n() < at[c]) sums.next_gamma();
    double w2 = std::nan("");
    std::string method = "none";
    if (good.size() >= 2) {
      if (d == 1) {
        std::vector<double> a, b;
        for (std::size_t i = 0; i < good.size(); ++i) {
          a.push_back(snaps[good[i]][c][0]);
          b.push_back(target[i][0]);
        }
        w2 = w2_empirical_1d(a, b);
        method = "empirical-1d";
      } else {
        Vec mu_a = Vec::Zero(d), sd_a = Vec::Zero(d), mu_b = Vec::Zero(d), sd_b = Vec::Zero(d);
        for (int k = 0; k < d; ++k) {
          std::vector<double> a, b;
          for (std::size_t i = 0; i < good.size(); ++i) {
            a.push_back(snaps[good[i]][c][k]);
            b.push_back(target[i][k]);
          }
          const Moments ma = moments(a), mb = moments(b);
          mu_a[k] = ma.mean;
          sd_a[k] = std::sqrt(ma.variance);
          mu_b[k] = mb.mean;
          sd_b[k] = std::sqrt(mb.variance);
        }
        w2 = w2_gaussian_diag(mu_a, sd_a, mu_b, sd_b);
        method = "gaussian-diag-approx";
      }
      ns.push_back(static_cast<double>(at[c]));
      w2s.push_back(w2);
    }
    out.table.rows.push_back({at[c], num(sums.gamma_sum(1)), good.size(), num(w2), method});
  }
  double slope = std::nan("");
  try {
    slope = loglog_slope(ns, w2s);
  } catch (const std::exception&) {
  }
  out.summary = {{"experiment", "w2-rate"},
                 {"sampler", to_string(ctx.kind)},
                 {"schedule", cfg.schedule},
                 {"replicates", R},
                 {"completed", good.size()},
                 {"checkpoints", at},
                 {"w2", render_json(out.table)},
                 {"loglog_slope_in_n", num(slope)}};
  return out;
}

// ---------------------------------------------------------------- regime table

KindOutput run_regime_table(Context& ctx) {
  const ExperimentConfig& cfg = ctx.cfg;
  KindOutput out;
  out.table.columns = {"setting", "alpha", "regime", "gamma_hat_inf", "rate_exponent", "rate", "empirical_gamma_hat",
                       "n"};
  json entries = json::array();
  for (Setting setting : {Setting::Overdamped, Setting::UnderdampedSpecial}) {
    for (double alpha : cfg.alpha_grid) {
      const std::string name = to_string(setting);
      try {
        const RegimeReport r =
            setting == Setting::Overdamped ? classify_overdamped(alpha) : classify_underdamped(alpha);
        Schedule s(PolynomialRule{alpha});
        for (std::uint64_t k = 0; k < cfg.n_steps; ++k) s.next_gamma();
        const double emp = empirical_gamma_hat(s, setting);
        const json value = r.regime == Regime::Finite ? json(r.value) : json();
        out.table.rows.push_back(
            {name, alpha, r.label(), value, r.rate_exponent, r.rate_descriptor, num(emp), cfg.n_steps});
        entries.push_back({{"setting", name}, {"alpha", alpha}, {"label", r.label()},
                           {"regime", to_string(r.regime)}, {"value", value}, {"rate_exponent", r.rate_exponent},
                           {"gamma_hat_definition", r.gamma_hat_definition}, {"empirical", num(emp)}});
      } catch (const std::exception& e) {
        out.table.rows.push_back({name, alpha, "not-applicable", json(), json(), json(), json(), cfg.n_steps});
        entries.push_back({{"setting", name}, {"alpha", alpha}, {"label", "not-applicable"}, {"reason", e.what()}});
      }
    }
  }
  out.summary = {{"experiment", "regime-table"}, {"n", cfg.n_steps}, {"rows", entries}};
  return out;
}

}  // namespace

RunResult run_experiment(ExperimentConfig cfg, const RunOptions& opts) {
  const auto t0 = std::chrono::steady_clock::now();
  RunResult result;
  if (opts.seed) cfg.seed = opts.seed;
  if (opts.workers) cfg.workers = *opts.workers;
  if (opts.out) cfg.out = *opts.out;
  if (!cfg.seed) {
    result.exit_code = kExitValidation;
    result.error = "seed: a seed is required (set [experiment] seed or pass --seed)";
    return result;
  }
  if (opts.format != "csv" && opts.format != "json") {
    result.exit_code = kExitValidation;
    result.error = "format: must be 'csv' or 'json'";
    return result;
  }
  const unsigned workers = cfg.workers ? cfg.workers : std::max(1u, std::thread::hardware_concurrency());

  KindOutput kind_out;
  std::optional<Context> ctx_holder;
  try {
    ctx_holder.emplace(make_context(cfg, *cfg.seed, workers));
  } catch (const std::exception& e) {
    result.exit_code = kExitValidation;
    result.error = e.what();
    return result;
  }
  Context& ctx = *ctx_holder;
  try {
    if (cfg.kind == "single-run") {
      kind_out = run_replicate_kind(ctx, 1);
    } else if (cfg.kind == "clt-replicates") {
      kind_out = run_replicate_kind(ctx, cfg.replicates);
    } else if (cfg.kind == "bias-sweep") {
      kind_out = run_bias_sweep(ctx);
    } else if (cfg.kind == "w2-rate") {
      kind_out = run_w2_rate(ctx);
    } else if (cfg.kind == "regime-table") {
      kind_out = run_regime_table(ctx);
    } else {
      throw ConfigError("unknown experiment kind '" + cfg.kind + "'", 0, "kind");
    }
  } catch (const std::invalid_argument& e) {
    result.exit_code = kExitValidation;
    result.error = e.what();
    return result;
  } catch (const ConfigError& e) {
    result.exit_code = kExitValidation;
    result.error = e.what();
    return result;
  }

  const fs::path dir(cfg.out);
  fs::create_directories(dir);
  const std::string results_name = opts.format == "csv" ? "results.csv" : "results.json";
  write_file(dir / results_name,
             opts.format == "csv" ? render_csv(kind_out.table) : render_json(kind_out.table).dump(2) + "\n");
  kind_out.summary["notes"] = ctx.notes;
  kind_out.summary["divergences"] = ctx.divergences;
  write_file(dir / "summary.json", kind_out.summary.dump(2) + "\n");

  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  json manifest = {{"config", cfg.to_json()},
                   {"seed", *cfg.seed},
                   {"streams",
                    {{"chains", "stream id = replicate index (bias-sweep: h index * seeds + seed index)"},
                     {"exact_target_draws", kExactStream}}},
                   {"library_version", RML_VERSION},
                   {"workers", workers},
                   {"format", opts.format},
                   {"wall_time_seconds", wall},
                   {"partial", ctx.partial},
                   {"divergent_runs", ctx.divergences.size()},
                   {"notes", ctx.notes},
                   {"files", {results_name, "summary.json", "manifest.json"}}};
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");

  result.files = {(dir / results_name).string(), (dir / "summary.json").string(), (dir / "manifest.json").string()};
  result.summary = std::move(kind_out.summary);
  result.exit_code = ctx.partial ? kExitDivergence : kExitOk;
  if (ctx.partial) result.error = std::to_string(ctx.divergences.size()) + " run(s) diverged";
  return result;
}

}  // namespace rml
