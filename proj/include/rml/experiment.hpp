#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace rml {

/// Thrown for malformed or invalid configuration; `line` is 0 when not tied to a line.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& what, int line = 0, std::string field = {})
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line),
        field_(std::move(field)) {}
  int line() const noexcept { return line_; }
  const std::string& field() const noexcept { return field_; }

 private:
  int line_;
  std::string field_;
};

// Plain-text configuration:
//
//   [experiment]   kind, seed, n_steps, replicates, level, workers, out, checkpoints, ks_coefficient
//   [model]        potential, sampler, u, schedule, test_function, observable, init, x0, v0
//   [bias]         h_grid, seeds, samples, burn_in_fraction, thin, C1, C2
//   [regime]       alpha_grid
//   [oracle]       nodes
//
// One "key = value" per line, '#' or ';' start a comment, lists use '|'.
struct ExperimentConfig {
  std::string kind = "single-run";
  std::optional<std::uint64_t> seed;
  std::uint64_t n_steps = 10000;
  std::size_t replicates = 1;
  double level = 0.95;
  unsigned workers = 0;  // 0: available cores
  std::string out = "out";
  std::vector<std::uint64_t> checkpoints;
  double ks_coefficient = 1.36;

  std::string potential = "isotropic-quadratic:d=1,c=1";
  std::string sampler = "rlmc";
  std::optional<double> u;
  std::string schedule = "poly:alpha=0.4";
  std::string test_function = "quadratic";
  std::string observable = "generator";
  std::string init = "argmin";
  std::vector<double> x0;
  std::vector<double> v0;

  std::vector<double> h_grid = {0.02, 0.05, 0.1, 0.2};
  std::size_t bias_seeds = 10;
  std::uint64_t samples = 100000;
  double burn_in_fraction = 0.2;
  std::uint64_t thin = 10;
  double C1 = 82500.0;
  double C2 = 99000.0;

  std::vector<double> alpha_grid = {0.1, 0.2, 0.25, 1.0 / 3.0, 0.4, 0.5};

  int oracle_nodes = 20;

  std::vector<std::string> notes;  // defaults applied during validation

  nlohmann::json to_json() const;
};

/// Parses and validates; throws ConfigError.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

/// Closest known key by edit distance or synonym; empty when nothing is close.
std::string suggest_key(const std::string& section, const std::string& key);

struct RunOptions {
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> workers;
  std::optional<std::string> out;
  std::string format = "csv";  // csv | json
  bool quiet = false;
};

enum ExitCode : int { kExitOk = 0, kExitDivergence = 2, kExitValidation = 3 };

struct RunResult {
  int exit_code = kExitOk;
  std::string error;
  std::vector<std::string> files;
  nlohmann::json summary;
};

/// Runs the experiment and writes results.{csv,json}, summary.json and manifest.json.
RunResult run_experiment(ExperimentConfig cfg, const RunOptions& opts);

// ---------------------------------------------------------------- registry

struct RegistryEntry {
  std::string category;  // potential | sampler | schedule | test-function | experiment
  std::string name;
  std::string description;
  std::vector<std::pair<std::string, std::string>> params;  // name, meaning
};

class Registry {
 public:
  Registry() = default;
  static Registry builtin();

  void add(RegistryEntry e) { entries_.push_back(std::move(e)); }
  const std::vector<RegistryEntry>& entries() const noexcept { return entries_; }
  std::size_t count(const std::string& category) const;

  std::string to_text() const;
  nlohmann::json to_json() const;

 private:
  std::vector<RegistryEntry> entries_;
};

}  // namespace rml
