#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <unistd.h>

#include "rml/experiment.hpp"
#include "rml/schedule.hpp"

using namespace rml;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("rml_test_config_" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t count_lines(const std::string& s) {
  std::size_t n = 0;
  for (char c : s) n += c == '\n';
  return n;
}

RunResult run_text(const std::string& text, const fs::path& out, unsigned workers = 1) {
  RunOptions o;
  o.out = out.string();
  o.workers = workers;
  o.quiet = true;
  return run_experiment(parse_config(text), o);
}

ConfigError parse_error(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e;
  }
  FAIL("expected a ConfigError");
  return ConfigError("unreachable");
}

int shell(const std::string& cmd) {
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

const char* kCltTiny =
    "[experiment]\nkind = clt-replicates\nseed = 42\nreplicates = 2\nn_steps = 200\n"
    "[model]\nsampler = rlmc\nschedule = poly:alpha=0.4\n";

}  // namespace

TEST_CASE("defaults are filled in") {
  const ExperimentConfig c = parse_config("[experiment]\nseed = 1\n");
  CHECK(c.kind == "single-run");
  CHECK(c.level == 0.95);
  CHECK(c.replicates == 1);
  CHECK(c.seed.value() == 1);
  const json j = c.to_json();
  CHECK(j["experiment"]["level"] == 0.95);
  CHECK(j["model"]["schedule"] == "poly:alpha=0.4");
}

TEST_CASE("unknown key gets a suggestion") {
  const ConfigError e = parse_error("[experiment]\nseed = 1\n[model]\nstepsize = 0.1\n");
  CHECK(e.line() == 4);
  CHECK(e.field() == "stepsize");
  const std::string what = e.what();
  CHECK(what.find("stepsize") != std::string::npos);
  CHECK(what.find("schedule") != std::string::npos);
  CHECK(suggest_key("experiment", "replicate") == "replicates");
  CHECK(suggest_key("model", "zzzzzzzz").empty());
}

TEST_CASE("underdamped samplers default u to 1/M") {
  const ExperimentConfig c =
      parse_config("[experiment]\nseed = 1\n[model]\nsampler = rulmc\npotential = diagonal-quadratic:c=1|4\n");
  CHECK_FALSE(c.u.has_value());
  bool noted = false;
  for (const auto& n : c.notes) noted |= n.find("1/M") != std::string::npos && n.find("0.25") != std::string::npos;
  CHECK(noted);
}

TEST_CASE("parse errors carry line numbers and fields") {
  CHECK(parse_error("[nonsense]\nx = 1\n").line() == 1);
  CHECK(parse_error("seed = 1\n").line() == 1);
  CHECK(parse_error("[experiment]\nseed = 1\nseed = 2\n").line() == 3);
  CHECK(parse_error("[experiment]\n\n# comment\nseed =\n").line() == 4);
  CHECK(parse_error("[experiment]\nseed 1\n").line() == 2);
  CHECK(parse_error("[experiment]\nseed = 1\n[model]\nsampler = hmc\n").field() == "sampler");
  CHECK(parse_error("[experiment]\nseed = 1\n[model]\nschedule = poly:alpha=2\n").field() == "schedule");
  CHECK(parse_error("[experiment]\nseed = 1\n[model]\npotential = cubic\n").field() == "potential");
  CHECK(parse_error("[experiment]\nseed = 1\nn_steps = 100\ncheckpoints = 50|20\n").field() == "checkpoints");
  CHECK(parse_error("[experiment]\nseed = 1\nn_steps = 100\ncheckpoints = 500\n").field() == "checkpoints");
  CHECK(parse_error("[experiment]\nseed = x\n").field() == "seed");
  CHECK(parse_error("[experiment]\nkind = everything\n").field() == "kind");
  CHECK(parse_error("[experiment]\nlevel = 1.5\n").field() == "level");
  CHECK(parse_error("[model]\nobservable = mean\n").field() == "observable");
}

TEST_CASE("comments, synonyms and lists") {
  const ExperimentConfig c = parse_config(
      "; leading comment\n[experiment]\nseed = 3   # trailing\nn_steps = 500\n[bias]\nh_grid = 0.05 | 0.1\n");
  CHECK(c.n_steps == 500);
  CHECK(c.h_grid == std::vector<double>{0.05, 0.1});
  const std::string what = parse_error("[experiment]\nsteps = 500\n").what();
  CHECK(what.find("n_steps") != std::string::npos);
  CHECK(std::string(parse_error("[experiment]\nthreads = 2\n").what()).find("workers") != std::string::npos);
}

TEST_CASE("missing seed is a validation failure") {
  const fs::path out = scratch("noseed");
  RunOptions o;
  o.out = out.string();
  o.quiet = true;
  const RunResult r = run_experiment(parse_config("[experiment]\nn_steps = 10\n"), o);
  CHECK(r.exit_code == kExitValidation);
  CHECK(r.error.find("seed") != std::string::npos);
  o.seed = 5;
  CHECK(run_experiment(parse_config("[experiment]\nn_steps = 10\n"), o).exit_code == kExitOk);
  o.format = "xml";
  CHECK(run_experiment(parse_config("[experiment]\nn_steps = 10\n"), o).exit_code == kExitValidation);
}

TEST_CASE("clt replicates: rows, determinism, worker independence") {
  const fs::path a = scratch("clt_a"), b = scratch("clt_b"), c = scratch("clt_c");
  const RunResult ra = run_text(kCltTiny, a, 1);
  REQUIRE(ra.exit_code == kExitOk);
  const std::string csv = slurp(a / "results.csv");
  CHECK(count_lines(csv) == 3);
  CHECK(csv.rfind("replicate,", 0) == 0);
  REQUIRE(run_text(kCltTiny, b, 1).exit_code == kExitOk);
  CHECK(slurp(b / "results.csv") == csv);
  REQUIRE(run_text(kCltTiny, c, 2).exit_code == kExitOk);
  CHECK(slurp(c / "results.csv") == csv);

  const json manifest = json::parse(slurp(a / "manifest.json"));
  for (const char* k : {"config", "seed", "streams", "library_version", "workers", "wall_time_seconds", "partial", "files"}) {
    CHECK(manifest.contains(k));
  }
  CHECK(manifest["seed"] == 42);
  CHECK(manifest["partial"] == false);
  const json summary = json::parse(slurp(a / "summary.json"));
  CHECK(summary["replicates"] == 2);
  CHECK(summary["law"]["variance"].get<double>() == doctest::Approx(8.0));

  RunOptions json_out;
  json_out.out = (a / "as_json").string();
  json_out.format = "json";
  json_out.quiet = true;
  REQUIRE(run_experiment(parse_config(kCltTiny), json_out).exit_code == kExitOk);
  CHECK(json::parse(slurp(a / "as_json" / "results.json")).size() == 2);
}

TEST_CASE("bias sweep writes one row per (h, seed)") {
  const fs::path out = scratch("bias");
  const RunResult r = run_text(
      "[experiment]\nkind = bias-sweep\nseed = 9\n[model]\nsampler = rlmc\n"
      "[bias]\nh_grid = 0.05|0.1|0.2\nseeds = 2\nsamples = 2000\nthin = 2\n",
      out);
  REQUIRE(r.exit_code == kExitOk);
  const std::string csv = slurp(out / "results.csv");
  CHECK(count_lines(csv) == 1 + 3 * 2);
  for (const char* col : {"h", "sampler", "empirical_w2", "oracle_value", "paper_bound", "valid_window"}) {
    CHECK(csv.substr(0, csv.find('\n')).find(col) != std::string::npos);
  }
}

TEST_CASE("regime table matches classify") {
  const fs::path out = scratch("regime");
  const RunResult r = run_text(
      "[experiment]\nkind = regime-table\nseed = 1\nn_steps = 1000\n[regime]\nalpha_grid = 0.1|0.2|0.25|1/3|0.4|0.5\n", out);
  REQUIRE(r.exit_code == kExitOk);
  const json s = json::parse(slurp(out / "summary.json"));
  bool saw_sqrt10 = false;
  for (const json& row : s["rows"]) {
    const double alpha = row["alpha"].get<double>();
    const std::string setting = row["setting"].get<std::string>();
    if (setting == "overdamped") {
      CHECK(row["label"].get<std::string>() == classify_overdamped(alpha).label());
    } else if (alpha <= 0.25 + 1e-12) {
      const RegimeReport ref = classify_underdamped(alpha);
      CHECK(row["label"].get<std::string>() == ref.label());
      if (std::abs(alpha - 0.2) < 1e-12) {
        saw_sqrt10 = true;
        CHECK(row["value"].get<double>() == doctest::Approx(std::sqrt(10.0)).epsilon(1e-15));
      }
    } else {
      CHECK(row["label"].get<std::string>() == "not-applicable");
    }
  }
  CHECK(saw_sqrt10);
}

TEST_CASE("divergence exits with code 2") {
  const fs::path out = scratch("diverge");
  const RunResult r = run_text(
      "[experiment]\nseed = 1\nn_steps = 100000\n[model]\nsampler = lmc\nschedule = const:h=3\n"
      "init = explicit\nx0 = 1\n",
      out);
  CHECK(r.exit_code == kExitDivergence);
  const json manifest = json::parse(slurp(out / "manifest.json"));
  CHECK(manifest["divergent_runs"].get<std::size_t>() == 1);
}

TEST_CASE("registry") {
  const Registry r = Registry::builtin();
  CHECK(r.count("potential") >= 3);
  CHECK(r.count("sampler") >= 4);
  CHECK(r.count("schedule") >= 4);
  CHECK(r.to_json().is_object());
  CHECK(r.to_text().find("rulmc") != std::string::npos);
  const Registry empty;
  CHECK(empty.to_text().empty());
  CHECK(empty.entries().empty());
}

TEST_CASE("command line") {
  const char* cli = std::getenv("RML_CLI");
  if (cli == nullptr) {
    MESSAGE("RML_CLI not set; skipping command-line checks");
    return;
  }
  const fs::path dir = scratch("cli");
  const std::string exe = std::string("\"") + cli + "\"";
  CHECK(shell(exe + " list > " + (dir / "list.txt").string()) == 0);
  CHECK(shell(exe + " list --json > " + (dir / "list.json").string()) == 0);
  CHECK(json::parse(slurp(dir / "list.json")).is_object());
  CHECK(shell(exe + " list --empty > " + (dir / "empty.txt").string()) == 0);
  CHECK(slurp(dir / "empty.txt").empty());

  std::ofstream(dir / "ok.ini") << kCltTiny;
  CHECK(shell(exe + " run " + (dir / "ok.ini").string() + " --out " + (dir / "run").string() + " -q") == 0);
  CHECK(fs::exists(dir / "run" / "results.csv"));
  std::ofstream(dir / "bad.ini") << "[model]\nstepsize = 0.1\n";
  CHECK(shell(exe + " run " + (dir / "bad.ini").string() + " --seed 1 -q 2> " + (dir / "err.txt").string()) == 3);
  CHECK(slurp(dir / "err.txt").find("schedule") != std::string::npos);
  CHECK(shell(exe + " run " + (dir / "missing.ini").string() + " --seed 1 -q 2> /dev/null") == 3);
}
