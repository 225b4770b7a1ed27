#include <iostream>

#include <CLI11.hpp>

#include "rml/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Langevin sampler experiments"};
  app.set_version_flag("--version", std::string(RML_VERSION));
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> workers;
  std::optional<std::string> out;
  std::string format = "csv";
  bool quiet = false;
  auto* run = app.add_subcommand("run", "Run the experiment described by a config file");
  run->add_option("config", config_path, "Config file")->required();
  run->add_option("--seed", seed, "Override the config seed");
  run->add_option("--workers", workers, "Worker threads (default: available cores)");
  run->add_option("--out", out, "Output directory");
  run->add_option("--format", format, "Per-row results format")->check(CLI::IsMember({"csv", "json"}));
  run->add_flag("-q,--quiet", quiet, "Only print errors");

  bool as_json = false;
  bool empty = false;
  auto* list = app.add_subcommand("list", "List registered potentials, samplers, schedules and test functions");
  list->add_flag("--json", as_json, "Machine-readable output");
  list->add_flag("--empty", empty, "Use an empty registry")->group("");

  CLI11_PARSE(app, argc, argv);

  if (*list) {
    const rml::Registry reg = empty ? rml::Registry{} : rml::Registry::builtin();
    if (as_json) {
      std::cout << reg.to_json().dump(2) << "\n";
    } else {
      std::cout << reg.to_text();
    }
    return 0;
  }

  rml::ExperimentConfig cfg;
  try {
    cfg = rml::load_config(config_path);
  } catch (const rml::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return rml::kExitValidation;
  }
  rml::RunOptions opts;
  opts.seed = seed;
  opts.workers = workers;
  opts.out = out;
  opts.format = format;
  opts.quiet = quiet;
  if (!quiet) {
    for (const std::string& n : cfg.notes) std::cerr << "note: " << n << "\n";
  }
  rml::RunResult r;
  try {
    r = rml::run_experiment(cfg, opts);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  if (r.exit_code == rml::kExitValidation) {
    std::cerr << "validation error: " << r.error << "\n";
    return r.exit_code;
  }
  if (!r.error.empty()) std::cerr << "warning: " << r.error << "\n";
  if (!quiet) {
    for (const std::string& f : r.files) std::cout << f << "\n";
  }
  return r.exit_code;
}
