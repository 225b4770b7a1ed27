#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "rml/average.hpp"
#include "rml/bias.hpp"
#include "rml/clt.hpp"
#include "rml/experiment.hpp"
#include "rml/noise.hpp"
#include "rml/potential.hpp"
#include "rml/rng.hpp"
#include "rml/sampler.hpp"
#include "rml/schedule.hpp"
#include "rml/test_function.hpp"

namespace py = pybind11;
using namespace rml;

namespace {

SamplerConfig make_config(const std::string& sampler, std::optional<double> u, std::optional<Vec> x0,
                          std::optional<Vec> v0) {
  SamplerConfig cfg;
  cfg.kind = parse_sampler_kind(sampler);
  cfg.u = u;
  if (x0) {
    cfg.init = InitPolicy::Explicit;
    cfg.x0 = *x0;
    if (v0) cfg.v0 = *v0;
  }
  return cfg;
}

QuadratureOracle make_oracle(const std::string& rule, int nodes, std::uint64_t samples, std::uint64_t seed) {
  if (rule == "gauss-hermite") return QuadratureOracle::gauss_hermite(nodes);
  if (rule == "monte-carlo") return QuadratureOracle::monte_carlo(samples, seed);
  throw std::invalid_argument("oracle must be 'gauss-hermite' or 'monte-carlo'");
}

py::dict estimate_dict(const Estimate& e) {
  py::dict d;
  d["value"] = e.value;
  d["std_error"] = e.std_error;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Randomized-midpoint Langevin samplers";
  m.attr("__version__") = RML_VERSION;

  py::register_exception<DivergenceError>(m, "DivergenceError", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  py::class_<RngStream>(m, "RngStream")
      .def(py::init<std::uint64_t, std::uint64_t>(), py::arg("seed"), py::arg("stream") = 0)
      .def("uniform", &RngStream::uniform)
      .def("normal", &RngStream::normal)
      .def("next_u64", &RngStream::next_u64)
      .def_property_readonly("seed", &RngStream::seed)
      .def_property_readonly("stream", &RngStream::stream_id);

  py::class_<Potential>(m, "Potential")
      .def_static("parse", &Potential::parse, py::arg("descriptor"))
      .def_static("isotropic_quadratic", &Potential::isotropic_quadratic, py::arg("dim"), py::arg("curvature") = 1.0)
      .def_static("diagonal_quadratic", &Potential::diagonal_quadratic, py::arg("curvatures"))
      .def_static("quadratic_plus_logcosh", &Potential::quadratic_plus_logcosh, py::arg("dim"), py::arg("curvature"),
                  py::arg("amplitude"))
      .def_property_readonly("dim", &Potential::dim)
      .def_property_readonly("m", &Potential::m)
      .def_property_readonly("M", &Potential::M)
      .def_property_readonly("kappa", &Potential::kappa)
      .def_property_readonly("descriptor", &Potential::descriptor)
      .def("value", &Potential::value)
      .def("grad", &Potential::grad)
      .def("hessian", &Potential::hessian)
      .def("__repr__", [](const Potential& p) { return "Potential('" + p.descriptor() + "')"; });

  py::class_<TestFunction>(m, "TestFunction")
      .def_static("parse", &TestFunction::parse, py::arg("descriptor"), py::arg("dim"), py::arg("phase_space") = false)
      .def_property_readonly("dim", &TestFunction::dim)
      .def("value", &TestFunction::value);

  py::class_<RegimeReport>(m, "RegimeReport")
      .def_property_readonly("setting", [](const RegimeReport& r) { return to_string(r.setting); })
      .def_property_readonly("regime", [](const RegimeReport& r) { return to_string(r.regime); })
      .def_readonly("value", &RegimeReport::value)
      .def_readonly("rate_exponent", &RegimeReport::rate_exponent)
      .def_readonly("rate_descriptor", &RegimeReport::rate_descriptor)
      .def_property_readonly("label", &RegimeReport::label)
      .def("__repr__", [](const RegimeReport& r) { return "RegimeReport(" + r.label() + ")"; });

  py::class_<Schedule>(m, "Schedule")
      .def(py::init(&Schedule::parse), py::arg("descriptor"))
      .def("next_gamma", &Schedule::next_gamma)
      .def("gamma_at", &Schedule::gamma_at, py::arg("k"))
      .def("gamma_sum", &Schedule::gamma_sum, py::arg("ell") = 1)
      .def("reset", &Schedule::reset)
      .def_property_readonly("n", &Schedule::n)
      .def_property_readonly("descriptor", &Schedule::descriptor);

  m.def("classify_overdamped", &classify_overdamped, py::arg("alpha"));
  m.def("classify_underdamped", &classify_underdamped, py::arg("alpha"));
  m.def("rlmc_fast_default_lambda", &rlmc_fast_default_lambda, py::arg("m"), py::arg("M"));

  m.def(
      "noise_gram",
      [](const std::string& sampler, double alpha, double gamma) {
        const SamplerKind k = parse_sampler_kind(sampler);
        if (k == SamplerKind::Rlmc) return rlmc_gram(alpha).matrix();
        if (k == SamplerKind::Rulmc) return rulmc_gram(alpha, gamma).matrix();
        if (k == SamplerKind::Klmc) return klmc_gram(gamma).matrix();
        throw std::invalid_argument("noise_gram: lmc has no Gram matrix");
      },
      py::arg("sampler"), py::arg("alpha") = 0.5, py::arg("gamma") = 0.1);

  m.def(
      "sample_chain",
      [](const std::string& sampler, const Potential& p, const std::string& schedule, std::uint64_t n_steps,
         std::uint64_t seed, std::uint64_t stream, std::uint64_t burn_in, std::uint64_t thin, std::optional<double> u,
         std::optional<Vec> x0, std::optional<Vec> v0) {
        const SamplerConfig cfg = make_config(sampler, u, std::move(x0), std::move(v0));
        Schedule s = Schedule::parse(schedule);
        RngStream rng(seed, stream);
        TraceObserver trace(burn_in, thin == 0 ? 1 : thin);
        {
          py::gil_scoped_release release;
          run_chain(cfg, p, s, n_steps, {&trace}, rng);
        }
        Mat out(static_cast<Eigen::Index>(trace.samples()), p.dim());
        for (int i = 0; i < p.dim(); ++i) {
          const std::vector<double> c = trace.coordinate(i);
          out.col(i) = Eigen::Map<const Vec>(c.data(), static_cast<Eigen::Index>(c.size()));
        }
        return out;
      },
      py::arg("sampler"), py::arg("potential"), py::arg("schedule"), py::arg("n_steps"), py::arg("seed"),
      py::arg("stream") = 0, py::arg("burn_in") = 0, py::arg("thin") = 1, py::arg("u") = py::none(),
      py::arg("x0") = py::none(), py::arg("v0") = py::none());

  m.def(
      "estimate_expectation",
      [](const std::string& sampler, const Potential& p, const std::string& schedule, const TestFunction& phi,
         std::uint64_t n_steps, std::uint64_t seed, std::uint64_t stream, bool generator, std::optional<double> u) {
        const SamplerConfig cfg = make_config(sampler, u, std::nullopt, std::nullopt);
        Observable obs = Observable::raw(phi);
        if (generator) {
          obs = cfg.kind == SamplerKind::Lmc || cfg.kind == SamplerKind::Rlmc
                    ? Observable::overdamped_generator(phi, p)
                    : Observable::underdamped_generator(phi, p, resolve_inverse_mass(cfg, p));
        }
        Schedule s = Schedule::parse(schedule);
        RngStream rng(seed, stream);
        RunningAverage a;
        {
          py::gil_scoped_release release;
          a = estimate_expectation(cfg, p, s, obs, n_steps, rng);
        }
        py::dict d;
        d["estimate"] = a.value();
        d["gamma_sum"] = a.gamma_sum();
        d["gamma_sums"] = std::array<double, 4>{s.gamma_sum(1), s.gamma_sum(2), s.gamma_sum(3), s.gamma_sum(4)};
        return d;
      },
      py::arg("sampler"), py::arg("potential"), py::arg("schedule"), py::arg("phi"), py::arg("n_steps"),
      py::arg("seed"), py::arg("stream") = 0, py::arg("generator") = true, py::arg("u") = py::none());

  m.def(
      "asymptotic_variance",
      [](const TestFunction& phi, const Potential& p, const std::string& rule, int nodes, std::uint64_t samples,
         std::uint64_t seed) { return estimate_dict(asym_variance_overdamped(phi, p, make_oracle(rule, nodes, samples, seed))); },
      py::arg("phi"), py::arg("potential"), py::arg("oracle") = "gauss-hermite", py::arg("nodes") = 20,
      py::arg("samples") = 100000, py::arg("seed") = 0);

  m.def(
      "asymptotic_bias",
      [](const TestFunction& phi, const Potential& p, const std::string& rule, int nodes, std::uint64_t samples,
         std::uint64_t seed) {
        const BiasTerms b = asym_bias_rho_overdamped(phi, p, make_oracle(rule, nodes, samples, seed));
        py::dict d = estimate_dict(b.total);
        py::list terms;
        for (const Estimate& e : b.terms) terms.append(estimate_dict(e));
        d["terms"] = terms;
        return d;
      },
      py::arg("phi"), py::arg("potential"), py::arg("oracle") = "gauss-hermite", py::arg("nodes") = 20,
      py::arg("samples") = 100000, py::arg("seed") = 0);

  m.def("normal_cdf", &normal_cdf);
  m.def("inverse_normal_cdf", &inverse_normal_cdf);

  m.def(
      "rlmc_bias_bound",
      [](double h, double m_, double M, int d) {
        BiasBoundInput in;
        in.h = h;
        in.m = m_;
        in.M = M;
        in.d = d;
        return rlmc_bias_bound(in);
      },
      py::arg("h"), py::arg("m") = 1.0, py::arg("M") = 1.0, py::arg("d") = 1);
  m.def(
      "rulmc_bias_bound",
      [](double h, double m_, double M, int d, double C1, double C2) {
        BiasBoundInput in;
        in.h = h;
        in.m = m_;
        in.M = M;
        in.d = d;
        in.C1 = C1;
        in.C2 = C2;
        return rulmc_bias_bound(in);
      },
      py::arg("h"), py::arg("m") = 1.0, py::arg("M") = 1.0, py::arg("d") = 1, py::arg("C1") = 82500.0,
      py::arg("C2") = 99000.0);
  m.def("rlmc_stationary_variance_quadratic", &rlmc_stationary_variance_quadratic, py::arg("h"));
  m.def("lmc_stationary_variance_quadratic", &lmc_stationary_variance_quadratic, py::arg("h"));
  m.def("w2_empirical_1d", &w2_empirical_1d, py::arg("a"), py::arg("b"));

  m.def(
      "run_experiment",
      [](const std::string& config_text, const std::string& out, std::optional<std::uint64_t> seed, unsigned workers,
         const std::string& format) {
        RunOptions o;
        o.out = out;
        o.seed = seed;
        o.workers = workers;
        o.format = format;
        o.quiet = true;
        ExperimentConfig cfg = parse_config(config_text);
        RunResult r;
        {
          py::gil_scoped_release release;
          r = run_experiment(std::move(cfg), o);
        }
        py::dict d;
        d["exit_code"] = r.exit_code;
        d["error"] = r.error;
        d["files"] = r.files;
        d["summary_json"] = r.summary.dump();
        return d;
      },
      py::arg("config"), py::arg("out"), py::arg("seed") = py::none(), py::arg("workers") = 1,
      py::arg("format") = "csv");

  m.def("registry_json", [] { return Registry::builtin().to_json().dump(); });
}
