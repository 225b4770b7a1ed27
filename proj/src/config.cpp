#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "rml/descriptor.hpp"
#include "rml/experiment.hpp"
#include "rml/noise.hpp"
#include "rml/potential.hpp"
#include "rml/schedule.hpp"
#include "rml/test_function.hpp"

namespace rml {

namespace {

const std::map<std::string, std::vector<std::string>>& known_keys() {
  static const std::map<std::string, std::vector<std::string>> keys = {
      {"experiment",
       {"kind", "seed", "n_steps", "replicates", "level", "workers", "out", "checkpoints", "ks_coefficient"}},
      {"model", {"potential", "sampler", "u", "schedule", "test_function", "observable", "init", "x0", "v0"}},
      {"bias", {"h_grid", "seeds", "samples", "burn_in_fraction", "thin", "C1", "C2"}},
      {"regime", {"alpha_grid"}},
      {"oracle", {"nodes"}},
  };
  return keys;
}

const std::map<std::string, std::string>& synonyms() {
  static const std::map<std::string, std::string> s = {
      {"stepsize", "schedule"},      {"step_size", "schedule"},   {"step", "schedule"},
      {"gamma", "schedule"},         {"steps", "n_steps"},        {"iterations", "n_steps"},
      {"n", "n_steps"},              {"reps", "replicates"},      {"r", "replicates"},
      {"confidence", "level"},       {"threads", "workers"},      {"jobs", "workers"},
      {"output", "out"},             {"outdir", "out"},           {"target", "potential"},
      {"algorithm", "sampler"},      {"method", "sampler"},       {"phi", "test_function"},
      {"test", "test_function"},     {"mass", "u"},               {"inverse_mass", "u"},
      {"h", "h_grid"},               {"alpha", "alpha_grid"},     {"burnin", "burn_in_fraction"},
      {"burn_in", "burn_in_fraction"}, {"stride", "thin"},        {"thinning", "thin"},
  };
  return s;
}

std::size_t edit_distance(const std::string& a, const std::string& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

struct Entry {
  std::string value;
  int line = 0;
};

using Sections = std::map<std::string, std::map<std::string, Entry>>;

Sections tokenize(const std::string& text) {
  Sections out;
  std::istringstream in(text);
  std::string raw;
  std::string section;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto cut = raw.find_first_of("#;");
    const std::string s = trim(cut == std::string::npos ? raw : raw.substr(0, cut));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw ConfigError("unterminated section header", line);
      section = trim(s.substr(1, s.size() - 2));
      if (known_keys().count(section) == 0) throw ConfigError("unknown section [" + section + "]", line, section);
      out[section];
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("expected 'key = value'", line);
    if (section.empty()) throw ConfigError("key outside of any section", line);
    const std::string key = trim(s.substr(0, eq));
    const std::string value = trim(s.substr(eq + 1));
    const auto& allowed = known_keys().at(section);
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      std::string msg = "unknown key '" + key + "' in [" + section + "]";
      const std::string hint = suggest_key(section, key);
      if (!hint.empty()) msg += "; did you mean '" + hint + "'?";
      throw ConfigError(msg, line, key);
    }
    if (out[section].count(key)) throw ConfigError("duplicate key '" + key + "'", line, key);
    if (value.empty()) throw ConfigError("empty value for '" + key + "'", line, key);
    out[section][key] = {value, line};
  }
  return out;
}

class Reader {
 public:
  explicit Reader(const Sections& s) : s_(s) {}

  const Entry* find(const std::string& section, const std::string& key) const {
    const auto it = s_.find(section);
    if (it == s_.end()) return nullptr;
    const auto jt = it->second.find(key);
    return jt == it->second.end() ? nullptr : &jt->second;
  }

  void str(const std::string& sec, const std::string& key, std::string& out) const {
    if (const Entry* e = find(sec, key)) out = e->value;
  }

  void num(const std::string& sec, const std::string& key, double& out) const {
    if (const Entry* e = find(sec, key)) out = to_number(*e, key);
  }

  template <class T>
  void integer(const std::string& sec, const std::string& key, T& out) const {
    if (const Entry* e = find(sec, key)) out = static_cast<T>(to_integer(*e, key));
  }

  void nums(const std::string& sec, const std::string& key, std::vector<double>& out) const {
    if (const Entry* e = find(sec, key)) {
      out.clear();
      for (const std::string& part : split(e->value, '|')) out.push_back(to_number({trim(part), e->line}, key));
    }
  }

  void integers(const std::string& sec, const std::string& key, std::vector<std::uint64_t>& out) const {
    if (const Entry* e = find(sec, key)) {
      out.clear();
      for (const std::string& part : split(e->value, '|')) out.push_back(to_integer({trim(part), e->line}, key));
    }
  }

  int line_of(const std::string& sec, const std::string& key) const {
    const Entry* e = find(sec, key);
    return e ? e->line : 0;
  }

 private:
  static double to_number(const Entry& e, const std::string& key) {
    try {
      return parse_number(e.value);
    } catch (const std::exception&) {
      throw ConfigError("'" + key + "' expects a number, got '" + e.value + "'", e.line, key);
    }
  }

  static std::uint64_t to_integer(const Entry& e, const std::string& key) {
    const double v = to_number(e, key);
    if (!(v >= 0.0) || v != std::floor(v) || v > 1.8e19) {
      throw ConfigError("'" + key + "' expects a non-negative integer, got '" + e.value + "'", e.line, key);
    }
    return static_cast<std::uint64_t>(v);
  }

  const Sections& s_;
};

const std::set<std::string>& experiment_kinds() {
  static const std::set<std::string> k = {"single-run", "clt-replicates", "bias-sweep", "w2-rate", "regime-table"};
  return k;
}

}  // namespace

std::string suggest_key(const std::string& section, const std::string& key) {
  const std::string k = lower(key);
  if (const auto it = synonyms().find(k); it != synonyms().end()) return it->second;
  std::string best;
  std::size_t best_d = 3;
  auto consider = [&](const std::string& cand) {
    const std::size_t d = edit_distance(k, lower(cand));
    if (d < best_d) {
      best_d = d;
      best = cand;
    }
  };
  if (const auto it = known_keys().find(section); it != known_keys().end()) {
    for (const auto& cand : it->second) consider(cand);
  }
  if (best.empty()) {
    for (const auto& [sec, keys] : known_keys()) {
      for (const auto& cand : keys) consider(cand);
    }
  }
  return best;
}

ExperimentConfig parse_config(const std::string& text) {
  const Sections sections = tokenize(text);
  const Reader r(sections);
  ExperimentConfig c;

  r.str("experiment", "kind", c.kind);
  if (const auto* e = r.find("experiment", "seed")) {
    std::uint64_t seed = 0;
    r.integer("experiment", "seed", seed);
    c.seed = seed;
    (void)e;
  }
  r.integer("experiment", "n_steps", c.n_steps);
  r.integer("experiment", "replicates", c.replicates);
  r.num("experiment", "level", c.level);
  r.integer("experiment", "workers", c.workers);
  r.str("experiment", "out", c.out);
  r.integers("experiment", "checkpoints", c.checkpoints);
  r.num("experiment", "ks_coefficient", c.ks_coefficient);

  r.str("model", "potential", c.potential);
  r.str("model", "sampler", c.sampler);
  if (r.find("model", "u")) {
    double u = 0.0;
    r.num("model", "u", u);
    c.u = u;
  }
  r.str("model", "schedule", c.schedule);
  r.str("model", "test_function", c.test_function);
  r.str("model", "observable", c.observable);
  r.str("model", "init", c.init);
  r.nums("model", "x0", c.x0);
  r.nums("model", "v0", c.v0);

  r.nums("bias", "h_grid", c.h_grid);
  r.integer("bias", "seeds", c.bias_seeds);
  r.integer("bias", "samples", c.samples);
  r.num("bias", "burn_in_fraction", c.burn_in_fraction);
  r.integer("bias", "thin", c.thin);
  r.num("bias", "C1", c.C1);
  r.num("bias", "C2", c.C2);

  r.nums("regime", "alpha_grid", c.alpha_grid);
  r.integer("oracle", "nodes", c.oracle_nodes);

  auto fail = [&](const std::string& sec, const std::string& key, const std::string& msg) {
    throw ConfigError(key + ": " + msg, r.line_of(sec, key), key);
  };

  if (!experiment_kinds().count(c.kind)) fail("experiment", "kind", "unknown experiment kind '" + c.kind + "'");
  if (c.n_steps == 0) fail("experiment", "n_steps", "must be at least 1");
  if (c.replicates == 0) fail("experiment", "replicates", "must be at least 1");
  if (!(c.level >= 0.0 && c.level < 1.0)) fail("experiment", "level", "must lie in [0, 1)");
  if (!(c.ks_coefficient > 0.0)) fail("experiment", "ks_coefficient", "must be positive");
  for (std::size_t i = 0; i < c.checkpoints.size(); ++i) {
    if (c.checkpoints[i] == 0 || c.checkpoints[i] > c.n_steps || (i > 0 && c.checkpoints[i] <= c.checkpoints[i - 1])) {
      fail("experiment", "checkpoints", "must be strictly increasing values in [1, n_steps]");
    }
  }

  int dim = 0;
  double M = 0.0;
  try {
    const Potential p = Potential::parse(c.potential);
    dim = p.dim();
    M = p.M();
  } catch (const std::exception& e) {
    fail("model", "potential", e.what());
  }
  SamplerKind kind = SamplerKind::Rlmc;
  try {
    kind = parse_sampler_kind(c.sampler);
  } catch (const std::exception& e) {
    fail("model", "sampler", e.what());
  }
  if (c.kind != "bias-sweep" && c.kind != "regime-table") {
    try {
      Schedule::parse(c.schedule);
    } catch (const std::exception& e) {
      fail("model", "schedule", e.what());
    }
  }
  try {
    TestFunction::parse(c.test_function, dim, is_underdamped(kind));
  } catch (const std::exception& e) {
    fail("model", "test_function", e.what());
  }
  if (c.observable != "generator" && c.observable != "raw" && c.observable != "zero") {
    fail("model", "observable", "must be 'generator', 'raw' or 'zero'");
  }
  if (c.init != "argmin" && c.init != "explicit") fail("model", "init", "must be 'argmin' or 'explicit'");
  if (c.init == "explicit") {
    if (static_cast<int>(c.x0.size()) != dim) fail("model", "x0", "needs " + std::to_string(dim) + " entries");
    if (!c.v0.empty() && static_cast<int>(c.v0.size()) != dim) {
      fail("model", "v0", "needs " + std::to_string(dim) + " entries");
    }
  }
  if (c.u && !(*c.u > 0.0)) fail("model", "u", "must be positive");
  if (is_underdamped(kind) && !c.u) {
    c.notes.push_back("u not set: using u = 1/M = " + format_double(1.0 / M) +
                      ", the inverse mass assumed by the constant-step bias bound and the rulmc-fast schedule");
  }

  if (c.h_grid.empty()) fail("bias", "h_grid", "must not be empty");
  for (double h : c.h_grid) {
    if (!(h > 0.0)) fail("bias", "h_grid", "step sizes must be positive");
  }
  if (c.bias_seeds == 0) fail("bias", "seeds", "must be at least 1");
  if (c.samples < 2) fail("bias", "samples", "must be at least 2");
  if (!(c.burn_in_fraction >= 0.0 && c.burn_in_fraction < 1.0)) fail("bias", "burn_in_fraction", "must lie in [0, 1)");
  if (c.thin == 0) fail("bias", "thin", "must be at least 1");
  if (!(c.C1 > 0.0)) fail("bias", "C1", "must be positive");
  if (!(c.C2 > 0.0)) fail("bias", "C2", "must be positive");
  for (double a : c.alpha_grid) {
    if (!(a > 0.0 && a <= 1.0)) fail("regime", "alpha_grid", "exponents must lie in (0, 1]");
  }
  if (c.oracle_nodes < 2 || c.oracle_nodes > 200) fail("oracle", "nodes", "must lie in [2, 200]");
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json j;
  j["experiment"] = {{"kind", kind},
                     {"seed", seed ? nlohmann::json(*seed) : nlohmann::json()},
                     {"n_steps", n_steps},
                     {"replicates", replicates},
                     {"level", level},
                     {"workers", workers},
                     {"out", out},
                     {"checkpoints", checkpoints},
                     {"ks_coefficient", ks_coefficient}};
  j["model"] = {{"potential", potential},
                {"sampler", sampler},
                {"u", u ? nlohmann::json(*u) : nlohmann::json()},
                {"schedule", schedule},
                {"test_function", test_function},
                {"observable", observable},
                {"init", init},
                {"x0", x0},
                {"v0", v0}};
  j["bias"] = {{"h_grid", h_grid}, {"seeds", bias_seeds}, {"samples", samples},
               {"burn_in_fraction", burn_in_fraction}, {"thin", thin}, {"C1", C1}, {"C2", C2}};
  j["regime"] = {{"alpha_grid", alpha_grid}};
  j["oracle"] = {{"nodes", oracle_nodes}};
  return j;
}

// ---------------------------------------------------------------- registry

std::size_t Registry::count(const std::string& category) const {
  return static_cast<std::size_t>(
      std::count_if(entries_.begin(), entries_.end(), [&](const RegistryEntry& e) { return e.category == category; }));
}

Registry Registry::builtin() {
  Registry r;
  r.add({"potential", "isotropic-quadratic", "f(x) = c/2 |x|^2", {{"d", "dimension"}, {"c", "curvature (default 1)"}}});
  r.add({"potential", "diagonal-quadratic", "f(x) = sum c_i/2 x_i^2", {{"c", "curvatures, '|'-separated"}}});
  r.add({"potential",
         "quadratic-plus-logcosh",
         "f(x) = sum c/2 x_i^2 + eps log cosh x_i",
         {{"d", "dimension"}, {"c", "base curvature"}, {"eps", "log-cosh amplitude >= 0"}}});
  r.add({"sampler", "lmc", "Euler discretization of the overdamped diffusion", {}});
  r.add({"sampler", "rlmc", "randomized midpoint, overdamped", {}});
  r.add({"sampler", "klmc", "exponential integrator, underdamped (friction 2)", {{"u", "inverse mass"}}});
  r.add({"sampler", "rulmc", "randomized midpoint, underdamped (friction 2)", {{"u", "inverse mass"}}});
  r.add({"schedule", "const", "gamma_k = h", {{"h", "step size"}}});
  r.add({"schedule", "poly", "gamma_k = k^-alpha", {{"alpha", "exponent in (0, 1]"}}});
  r.add({"schedule",
         "rlmc-fast",
         "gamma_{n+1} = 1/(m + 34M + lambda (n - K1)^+)",
         {{"m", "strong convexity"}, {"M", "gradient Lipschitz constant"}, {"lambda", "decay (default by bisection)"},
          {"K1", "warm-up steps (default 0)"}}});
  r.add({"schedule",
         "rulmc-fast",
         "gamma_n = 16 kappa / (32 kappa^(5/3) + (n - K1)^+)",
         {{"kappa", "condition number"}, {"K1", "warm-up steps (default 0)"}}});
  r.add({"test-function", "linear", "sum c_i x_i", {{"c", "coefficients (default 1)"}}});
  r.add({"test-function", "quadratic", "sum c_i x_i^2", {{"c", "coefficients (default 1)"}}});
  r.add({"test-function", "poly", "polynomial of degree <= 4", {{"expr", "e.g. 2*x0^2*v0-x1"}}});
  for (const char* k : {"single-run", "clt-replicates", "bias-sweep", "w2-rate", "regime-table"}) {
    r.add({"experiment", k, "", {}});
  }
  return r;
}

std::string Registry::to_text() const {
  std::string out;
  std::string current;
  for (const RegistryEntry& e : entries_) {
    if (e.category != current) {
      current = e.category;
      out += current + ":\n";
    }
    out += "  " + e.name;
    if (!e.description.empty()) out += "  " + e.description;
    out += "\n";
    for (const auto& [k, v] : e.params) out += "      " + k + ": " + v + "\n";
  }
  return out;
}

nlohmann::json Registry::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  for (const RegistryEntry& e : entries_) {
    nlohmann::json params = nlohmann::json::object();
    for (const auto& [k, v] : e.params) params[k] = v;
    j[e.category].push_back({{"name", e.name}, {"description", e.description}, {"params", params}});
  }
  return j;
}

}  // namespace rml
