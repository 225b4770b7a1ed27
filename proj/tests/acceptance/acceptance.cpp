// Acceptance suite. Usage: rml_acceptance <criterion 1..10> [--out DIR]
// Prints one PASS/FAIL line and exits non-zero on failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "oracles.hpp"
#include "rml/bias.hpp"
#include "rml/clt.hpp"
#include "rml/descriptor.hpp"
#include "rml/experiment.hpp"
#include "rml/noise.hpp"
#include "rml/sampler.hpp"
#include "rml/schedule.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using rml::Vec;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int prec = 6) {
  std::ostringstream os;
  os.precision(prec);
  os << v;
  return os.str();
}

void write_text(const fs::path& p, const std::string& s) {
  fs::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << s;
}

unsigned default_workers() { return std::max(1u, std::thread::hardware_concurrency()); }

json run_config(const std::string& text, const fs::path& out, std::uint64_t seed, int* exit_code = nullptr) {
  rml::RunOptions opts;
  opts.seed = seed;
  opts.workers = default_workers();
  opts.out = out.string();
  const rml::RunResult r = rml::run_experiment(rml::parse_config(text), opts);
  if (exit_code) *exit_code = r.exit_code;
  if (r.exit_code == rml::kExitValidation) throw std::runtime_error("experiment rejected: " + r.error);
  return r.summary;
}

// 1. Gram entries against Brownian-kernel integrals.
Outcome noise_covariance(const fs::path& dir) {
  std::string csv = "sampler,alpha,gamma,entry,closed_form,quadrature,abs_error\n";
  double worst = 0.0;
  int points = 0;
  const std::vector<double> gammas = {1e-4, 1e-3, 1e-2, 0.1, 0.25, 0.5};
  for (int ai = 0; ai <= 10; ++ai) {
    const double alpha = ai / 10.0;
    for (double gamma : gammas) {
      ++points;
      const rml::NoiseGram g = rml::rulmc_gram(alpha, gamma);
      const auto ref = oracle::rulmc_gram(alpha, gamma);
      for (int i = 0; i < 3; ++i) {
        for (int j = i; j < 3; ++j) {
          const double err = std::abs(g.entries(i, j) - ref[i][j]);
          worst = std::max(worst, err);
          csv += "rulmc," + rml::format_double(alpha) + "," + rml::format_double(gamma) + ",G" +
                 std::to_string(i + 1) + std::to_string(j + 1) + "," + rml::format_double(g.entries(i, j)) + "," +
                 rml::format_double(ref[i][j]) + "," + rml::format_double(err) + "\n";
        }
      }
      if (ai == 0) {
        const rml::NoiseGram k = rml::klmc_gram(gamma);
        const auto kref = oracle::klmc_gram(gamma);
        for (int i = 0; i < 2; ++i) {
          for (int j = i; j < 2; ++j) {
            const double err = std::abs(k.entries(i, j) - kref[i][j]);
            worst = std::max(worst, err);
            csv += "klmc,," + rml::format_double(gamma) + ",G" + std::to_string(i + 1) + std::to_string(j + 1) +
                   "," + rml::format_double(k.entries(i, j)) + "," + rml::format_double(kref[i][j]) + "," +
                   rml::format_double(err) + "\n";
          }
        }
      }
    }
  }
  write_text(dir / "gram_check.csv", csv);
  return {worst <= 1e-10 && points == 66,
          std::to_string(points) + " grid points, max abs error " + fmt(worst, 3) + " (tol 1e-10)"};
}

// 2. One-step conditional law on the quadratic target.
Outcome conditional_gaussian(const fs::path& dir) {
  struct Tuple {
    double x, v, alpha, gamma, c;
  };
  const std::vector<Tuple> tuples = {
      {1.0, 0.0, 0.5, 0.1, 1.0}, {-2.0, 1.0, 0.1, 0.2, 1.0}, {0.5, -1.0, 0.9, 0.05, 2.0},
      {3.0, 2.0, 0.3, 0.5, 1.0}, {0.0, 1.0, 0.7, 1.0, 0.5}};
  const std::size_t N = 100000;
  const double u = 1.0;
  std::string csv = "sampler,tuple,quantity,sample,analytic,std_error,z\n";
  double worst_z = 0.0;
  int checks = 0;
  std::uint64_t stream = 0;
  for (rml::SamplerKind kind :
       {rml::SamplerKind::Lmc, rml::SamplerKind::Rlmc, rml::SamplerKind::Klmc, rml::SamplerKind::Rulmc}) {
    for (std::size_t t = 0; t < tuples.size(); ++t) {
      const Tuple& tp = tuples[t];
      const rml::Potential p = rml::Potential::isotropic_quadratic(1, tp.c);
      rml::RngStream rng(2002, stream++);
      std::vector<Vec> out;
      out.reserve(N);
      oracle::AffineGaussian law;
      const bool under = rml::is_underdamped(kind);
      for (std::size_t k = 0; k < N; ++k) {
        if (!under) {
          rml::OverdampedState s{Vec::Constant(1, tp.x), 0};
          rml::OverdampedState r = kind == rml::SamplerKind::Lmc ? rml::lmc_step(s, tp.gamma, p, rng)
                                                                 : rml::rlmc_step(s, tp.gamma, p, rng, tp.alpha);
          out.push_back(r.x);
        } else {
          rml::UnderdampedState s{Vec::Constant(1, tp.x), Vec::Constant(1, tp.v), 0};
          rml::UnderdampedState r = kind == rml::SamplerKind::Klmc
                                        ? rml::klmc_step(s, tp.gamma, u, p, rng)
                                        : rml::rulmc_step(s, tp.gamma, u, p, rng, tp.alpha);
          Vec z(2);
          z << r.x[0], r.v[0];
          out.push_back(z);
        }
      }
      switch (kind) {
        case rml::SamplerKind::Lmc: law = oracle::lmc_step_law(tp.x, tp.gamma, tp.c); break;
        case rml::SamplerKind::Rlmc: law = oracle::rlmc_step_law(tp.x, tp.gamma, tp.alpha, tp.c); break;
        case rml::SamplerKind::Klmc: law = oracle::klmc_step_law(tp.x, tp.v, tp.gamma, u, tp.c); break;
        case rml::SamplerKind::Rulmc: law = oracle::rulmc_step_law(tp.x, tp.v, tp.gamma, tp.alpha, u, tp.c); break;
      }
      const oracle::SampleMoments m = oracle::moments(out);
      const auto k = static_cast<int>(law.mean.size());
      auto record = [&](const std::string& q, double sample, double analytic, double se) {
        const double z = se > 0.0 ? std::abs(sample - analytic) / se : (sample == analytic ? 0.0 : 1e300);
        worst_z = std::max(worst_z, z);
        ++checks;
        csv += rml::to_string(kind) + "," + std::to_string(t) + "," + q + "," + rml::format_double(sample) + "," +
               rml::format_double(analytic) + "," + rml::format_double(se) + "," + rml::format_double(z) + "\n";
      };
      for (int i = 0; i < k; ++i) {
        record("mean" + std::to_string(i), m.mean[i], law.mean[i], std::sqrt(law.cov(i, i) / static_cast<double>(N)));
      }
      for (int i = 0; i < k; ++i) {
        for (int j = i; j < k; ++j) {
          record("cov" + std::to_string(i) + std::to_string(j), m.cov(i, j), law.cov(i, j),
                 oracle::cov_std_error(law.cov, i, j, N));
        }
      }
    }
  }
  write_text(dir / "step_moments.csv", csv);
  return {worst_z <= 5.0, std::to_string(checks) + " moment checks over 4 samplers x 5 tuples, max |z| " +
                              fmt(worst_z, 3) + " (limit 5)"};
}

// 3. Stationary variance at constant step.
Outcome stationary_bias(const fs::path& dir) {
  const rml::Potential p = rml::Potential::isotropic_quadratic(1, 1.0);
  const std::uint64_t burn = 100000, kept = 1000000;
  std::string csv = "sampler,h,sample_variance,batch_std_error,oracle,z\n";
  struct Row {
    double var, se, target;
  };
  std::vector<Row> rows;
  std::uint64_t stream = 0;
  for (rml::SamplerKind kind : {rml::SamplerKind::Rlmc, rml::SamplerKind::Lmc}) {
    rml::SamplerConfig cfg;
    cfg.kind = kind;
    rml::Schedule s(rml::ConstantRule{0.1});
    rml::TraceObserver trace(burn, 1, kept);
    rml::RngStream rng(3003, stream++);
    rml::run_chain(cfg, p, s, burn + kept, {&trace}, rng);
    const std::vector<double> x = trace.coordinate(0);
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(x.size());
    // Batch means on the squared deviations.
    const std::size_t batches = 50, len = x.size() / batches;
    std::vector<double> bm(batches, 0.0);
    double var = 0.0;
    for (std::size_t b = 0; b < batches; ++b) {
      for (std::size_t i = b * len; i < (b + 1) * len; ++i) bm[b] += (x[i] - mean) * (x[i] - mean);
      bm[b] /= static_cast<double>(len);
      var += bm[b];
    }
    var /= static_cast<double>(batches);
    double sbm = 0.0;
    for (double b : bm) sbm += (b - var) * (b - var);
    const double se = std::sqrt(sbm / static_cast<double>(batches - 1) / static_cast<double>(batches));
    const double target = kind == rml::SamplerKind::Rlmc ? 1.000184 : 1.052632;
    rows.push_back({var, se, target});
    csv += rml::to_string(kind) + ",0.1," + rml::format_double(var) + "," + rml::format_double(se) + "," +
           rml::format_double(target) + "," + rml::format_double((var - target) / se) + "\n";
  }
  write_text(dir / "stationary_variance.csv", csv);
  const bool rlmc_ok = std::abs(rows[0].var - rows[0].target) <= 3.0 * rows[0].se;
  const bool lmc_ok = std::abs(rows[1].var - rows[1].target) <= 3.0 * rows[1].se;
  const bool ordered = std::abs(rows[0].var - 1.0) < std::abs(rows[1].var - 1.0);
  return {rlmc_ok && lmc_ok && ordered,
          "rlmc var " + fmt(rows[0].var) + " +- " + fmt(rows[0].se, 2) + " vs 1.000184; lmc var " + fmt(rows[1].var) +
              " +- " + fmt(rows[1].se, 2) + " vs 1.052632; rlmc closer to 1: " + (ordered ? "yes" : "no")};
}

// 4. Bias-bound dominance and order gap.
Outcome bias_bounds(const fs::path& dir) {
  auto config = [](const std::string& sampler) {
    return "[experiment]\nkind = bias-sweep\n[model]\npotential = isotropic-quadratic:d=1,c=1\nsampler = " + sampler +
           "\n[bias]\nh_grid = 0.02|0.05|0.1|0.2\nseeds = 10\nsamples = 1000000\n";
  };
  const json rl = run_config(config("rlmc"), dir / "rlmc", 4004);
  const json ru = run_config(config("rulmc"), dir / "rulmc", 4005);
  bool dominated = true;
  std::string detail;
  for (const json* s : {&rl, &ru}) {
    detail += (*s)["sampler"].get<std::string>() + " medians:";
    for (const json& e : (*s)["by_h"]) {
      const double h = e["h"].get<double>();
      const bool has_bound = e["paper_bound"].is_number();
      const double med = e["median_w2"].get<double>();
      detail += " h=" + fmt(h, 3) + ":" + fmt(med, 3);
      if (!has_bound) {
        dominated = false;
        detail += "(bound undefined)";
      } else if (med > e["paper_bound"].get<double>()) {
        dominated = false;
        detail += "(exceeds " + fmt(e["paper_bound"].get<double>(), 3) + ")";
      }
    }
    detail += "; ";
  }
  const double s_rl = rl["loglog_slope"].is_number() ? rl["loglog_slope"].get<double>() : std::nan("");
  const double s_ru = ru["loglog_slope"].is_number() ? ru["loglog_slope"].get<double>() : std::nan("");
  const bool gap = s_ru - s_rl >= 0.5;
  detail += "slopes rlmc " + fmt(s_rl, 3) + ", rulmc " + fmt(s_ru, 3) + " (gap needs >= 0.5)";
  return {dominated && gap, detail};
}

std::string clt_config(const std::string& sampler, const std::string& schedule, std::uint64_t n_steps,
                       const std::string& checkpoints, double ks_coefficient) {
  std::string t = "[experiment]\nkind = clt-replicates\nreplicates = 200\nn_steps = " + std::to_string(n_steps) +
                  "\nks_coefficient = " + rml::format_double(ks_coefficient) + "\n";
  if (!checkpoints.empty()) t += "checkpoints = " + checkpoints + "\n";
  t += "[model]\npotential = isotropic-quadratic:d=1,c=1\nsampler = " + sampler + "\nschedule = " + schedule +
       "\ntest_function = quadratic\nobservable = generator\n";
  return t;
}

const json& final_moments(const json& summary) { return summary["by_n"].back(); }

// 5. Unbiased-regime CLT for RLMC.
Outcome clt_unbiased(const fs::path& dir) {
  int code = 0;
  const json s = run_config(clt_config("rlmc", "poly:alpha=0.4", 100000, "", 1.36), dir, 5005, &code);
  const json& norm = s["normality"];
  const double var = final_moments(s)["variance_scaled"].get<double>();
  const bool ks = norm["pass"].get<bool>();
  const bool band = var >= 6.0 && var <= 10.0;
  return {code == 0 && ks && band, "KS D = " + fmt(norm["ks"].get<double>(), 4) + " (critical " +
                                       fmt(norm["critical"].get<double>(), 4) + "), variance " + fmt(var, 4) +
                                       " in [6, 10] against " + fmt(s["law"]["variance"].get<double>(), 4) +
                                       ", divergent " + std::to_string(s["divergent"].get<std::size_t>())};
}

// 6. Finite-regime bias trend for RLMC.
Outcome clt_finite_bias(const fs::path& dir) {
  int code = 0;
  const json s = run_config(clt_config("rlmc", "poly:alpha=1/3", 1000000, "10000|100000", 1.36), dir, 6006, &code);
  const double target = s["law"]["mean"].get<double>();
  std::vector<double> means;
  std::string detail = "target " + fmt(target, 5) + "; replicate means:";
  for (const json& e : s["by_n"]) {
    means.push_back(e["mean_scaled"].get<double>());
    detail += " n=" + std::to_string(e["n"].get<std::uint64_t>()) + ":" + fmt(means.back(), 4);
  }
  bool monotone = means.size() == 3;
  for (std::size_t i = 1; i < means.size(); ++i) {
    if (!(std::abs(means[i] - target) < std::abs(means[i - 1] - target))) monotone = false;
  }
  const double rel = std::abs(means.back() - target) / std::abs(target);
  detail += "; monotone toward target: " + std::string(monotone ? "yes" : "no") + "; final relative gap " +
            fmt(rel, 3) + " (limit 0.4)";
  return {code == 0 && monotone && rel <= 0.4, detail};
}

// 7. Underdamped regime table.
Outcome regime_table(const fs::path& dir) {
  const rml::RegimeReport a = rml::classify_underdamped(0.2);
  const rml::RegimeReport b = rml::classify_underdamped(0.25);
  const rml::RegimeReport c = rml::classify_underdamped(0.1);
  const bool ok_a = a.regime == rml::Regime::Finite && a.value == std::sqrt(10.0);
  const bool ok_b = b.regime == rml::Regime::Zero && b.rate_exponent == 5.0 / 8.0;
  const bool ok_c = c.regime == rml::Regime::Infinite && std::abs(c.rate_exponent - 0.3) <= 1e-15;
  const json s = run_config(
      "[experiment]\nkind = regime-table\nn_steps = 100000\n[regime]\nalpha_grid = 0.1|0.2|0.25|1/3|0.4|0.5\n", dir,
      7007);
  bool table_ok = true;
  for (const json& row : s["rows"]) {
    if (row["setting"] != "underdamped-special" || row["label"] == "not-applicable") continue;
    const rml::RegimeReport r = rml::classify_underdamped(row["alpha"].get<double>());
    if (row["label"].get<std::string>() != r.label()) table_ok = false;
  }
  return {ok_a && ok_b && ok_c && table_ok,
          "alpha=1/5 -> " + a.label() + ", alpha=1/4 -> " + b.label() + " rate " + fmt(b.rate_exponent) +
              ", alpha=0.1 -> " + c.label() + " rate " + fmt(c.rate_exponent) + "; table consistent: " +
              (table_ok ? "yes" : "no")};
}

// 8. Kinetic CLT for RULMC with the <v, grad phi> class.
Outcome clt_kinetic(const fs::path& dir) {
  int code = 0;
  const json s = run_config(clt_config("rulmc", "poly:alpha=1/4", 100000, "", 1.63), dir, 8008, &code);
  const json& norm = s["normality"];
  const double var = final_moments(s)["variance_scaled"].get<double>();
  const double target = s["law"]["variance"].get<double>();
  const double ratio = var / target;
  const bool ks = norm["pass"].get<bool>();
  return {code == 0 && ks && ratio >= 0.6 && ratio <= 1.6,
          "KS D = " + fmt(norm["ks"].get<double>(), 4) + " (critical " + fmt(norm["critical"].get<double>(), 4) +
              "), variance ratio " + fmt(ratio, 4) + " in [0.6, 1.6] against " + fmt(target, 5)};
}

using Criterion = std::function<Outcome(const fs::path&)>;

const std::vector<std::pair<std::string, Criterion>>& criteria() {
  static const std::vector<std::pair<std::string, Criterion>> c = {
      {"noise covariance oracle", noise_covariance},
      {"conditional Gaussian step oracle", conditional_gaussian},
      {"stationary variance at constant step", stationary_bias},
      {"bias bound dominance and order gap", bias_bounds},
      {"unbiased-regime CLT (rlmc)", clt_unbiased},
      {"finite-regime bias trend (rlmc)", clt_finite_bias},
      {"underdamped regime table", regime_table},
      {"kinetic CLT (rulmc)", clt_kinetic},
  };
  return c;
}

std::vector<fs::path> csv_files(const fs::path& root) {
  std::vector<fs::path> out;
  if (!fs::exists(root)) return out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file() && e.path().extension() == ".csv") out.push_back(fs::relative(e.path(), root));
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// 9. Re-run 1-8 and compare every CSV byte for byte.
Outcome determinism(const fs::path& base) {
  std::size_t compared = 0;
  std::vector<std::string> mismatched;
  for (std::size_t k = 0; k < criteria().size(); ++k) {
    const std::string name = "c" + std::to_string(k + 1);
    const fs::path first = base / "run1" / name;
    const fs::path second = base / "run2" / name;
    if (csv_files(first).empty()) criteria()[k].second(first);
    fs::remove_all(second);
    criteria()[k].second(second);
    const auto a = csv_files(first);
    const auto b = csv_files(second);
    if (a != b || a.empty()) {
      mismatched.push_back(name + " (file set differs)");
      continue;
    }
    for (const fs::path& f : a) {
      ++compared;
      if (slurp(first / f) != slurp(second / f)) mismatched.push_back(name + "/" + f.string());
    }
  }
  std::string detail = std::to_string(compared) + " CSV files compared";
  if (!mismatched.empty()) {
    detail += "; differing:";
    for (const auto& m : mismatched) detail += " " + m;
  }
  return {mismatched.empty(), detail};
}

// 10. Quadrature against Monte Carlo for every constant used above.
Outcome cross_validation(const fs::path& dir) {
  const rml::Potential p = rml::Potential::isotropic_quadratic(1, 1.0);
  const rml::TestFunction phi = rml::TestFunction::parse("quadratic", 1);
  const rml::QuadratureOracle gh = rml::QuadratureOracle::gauss_hermite(20);
  const rml::QuadratureOracle mc = rml::QuadratureOracle::monte_carlo(10000000, 1010);
  std::string csv = "constant,quadrature,monte_carlo,mc_std_error,z\n";
  double worst = 0.0;
  int count = 0;
  auto compare = [&](const std::string& name, const rml::Estimate& q, const rml::Estimate& m) {
    const double diff = std::abs(q.value - m.value);
    const double z = m.std_error > 0.0 ? diff / m.std_error : (diff <= 1e-9 * (1.0 + std::abs(q.value)) ? 0.0 : 1e300);
    worst = std::max(worst, z);
    ++count;
    csv += name + "," + rml::format_double(q.value) + "," + rml::format_double(m.value) + "," +
           rml::format_double(m.std_error) + "," + rml::format_double(z) + "\n";
  };
  compare("overdamped_variance", rml::asym_variance_overdamped(phi, p, gh), rml::asym_variance_overdamped(phi, p, mc));
  {
    const rml::BiasTerms a = rml::asym_bias_rho_overdamped(phi, p, gh);
    const rml::BiasTerms b = rml::asym_bias_rho_overdamped(phi, p, mc);
    for (std::size_t i = 0; i < a.terms.size(); ++i) compare("varrho_t" + std::to_string(i + 1), a.terms[i], b.terms[i]);
    compare("varrho", a.total, b.total);
  }
  for (rml::SamplerKind kind : {rml::SamplerKind::Rulmc, rml::SamplerKind::Klmc}) {
    const rml::KineticConstants a = rml::kinetic_special_law(phi, 1.0, p, kind, gh);
    const rml::KineticConstants b = rml::kinetic_special_law(phi, 1.0, p, kind, mc);
    const std::string tag = rml::to_string(kind);
    if (kind == rml::SamplerKind::Rulmc) compare("kinetic_variance", a.variance, b.variance);
    for (std::size_t i = 0; i < a.rho.terms.size(); ++i) {
      compare("rho_" + tag + "_t" + std::to_string(i + 1), a.rho.terms[i], b.rho.terms[i]);
    }
    compare("rho_" + tag, a.rho.total, b.rho.total);
  }
  write_text(dir / "cross_validation.csv", csv);
  return {worst <= 5.0, std::to_string(count) + " constants, max |z| " + fmt(worst, 3) + " (limit 5, 1e7 samples)"};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: rml_acceptance <1..10> [--out DIR]\n";
    return 2;
  }
  const int n = std::atoi(argv[1]);
  fs::path base = "acceptance_out";
  for (int i = 2; i + 1 < argc; ++i) {
    if (std::string(argv[i]) == "--out") base = argv[i + 1];
  }
  if (n < 1 || n > 10) {
    std::cerr << "criterion must be 1..10\n";
    return 2;
  }
  struct Budget {
    const char* title;
    double seconds;
  };
  static const Budget budgets[] = {
      {"noise covariance oracle", 5},          {"conditional Gaussian step oracle", 60},
      {"stationary variance at constant step", 120}, {"bias bound dominance and order gap", 1200},
      {"unbiased-regime CLT (rlmc)", 600},     {"finite-regime bias trend (rlmc)", 3600},
      {"underdamped regime table", 5},         {"kinetic CLT (rulmc)", 900},
      {"determinism of runs 1-8", 0},          {"quadrature vs Monte Carlo constants", 300}};

  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    if (n <= 8) {
      const fs::path dir = base / "run1" / ("c" + std::to_string(n));
      fs::remove_all(dir);
      o = criteria()[static_cast<std::size_t>(n - 1)].second(dir);
    } else if (n == 9) {
      o = determinism(base);
    } else {
      o = cross_validation(base / "run1" / "c10");
    }
  } catch (const std::exception& e) {
    o = {false, std::string("error: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const Budget& b = budgets[n - 1];
  const bool in_time = b.seconds <= 0.0 || secs <= b.seconds;
  const bool pass = o.pass && in_time;
  std::printf("[%s] criterion %2d %s: %s; %.1f s", pass ? "PASS" : "FAIL", n, b.title, o.detail.c_str(), secs);
  if (b.seconds > 0.0) std::printf(" (budget %.0f s)", b.seconds);
  std::printf("\n");
  return pass ? 0 : 1;
}
