#pragma once

#include <openssl/sha.h>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "acmdp/envs/carbon.hpp"
#include "acmdp/envs/sustainable.hpp"
#include "acmdp/envs/trace.hpp"
#include "acmdp/learner/acrl.hpp"
#include "acmdp/learner/grid_planner.hpp"
#include "acmdp/oracle/tiny_mdp.hpp"
#include "json.hpp"

namespace acmdp::harness {

using Json = nlohmann::json;

enum class EnvKind { carbon, sustainable, tiny };

inline std::string to_string(EnvKind k) {
  switch (k) {
    case EnvKind::carbon:
      return "carbon";
    case EnvKind::sustainable:
      return "sustainable";
    case EnvKind::tiny:
      return "tiny";
  }
  return "?";
}

/// Roster entries: learned policies, ACD-wrapped baselines, and the prior itself.
enum class PolicyKind { acrl, rl, crl, random_acd, rl_acd, prior };

inline std::string to_string(PolicyKind k) {
  switch (k) {
    case PolicyKind::acrl:
      return "acrl";
    case PolicyKind::rl:
      return "rl";
    case PolicyKind::crl:
      return "crl";
    case PolicyKind::random_acd:
      return "random+acd";
    case PolicyKind::rl_acd:
      return "rl+acd";
    case PolicyKind::prior:
      return "prior";
  }
  return "?";
}

inline PolicyKind parse_policy(const std::string& s) {
  for (auto k : {PolicyKind::acrl, PolicyKind::rl, PolicyKind::crl, PolicyKind::random_acd, PolicyKind::rl_acd,
                 PolicyKind::prior})
    if (to_string(k) == s) return k;
  throw ConfigError("unknown roster policy '" + s + "'");
}

inline bool acd_wrapped(PolicyKind k) {
  return k == PolicyKind::acrl || k == PolicyKind::random_acd || k == PolicyKind::rl_acd;
}

struct TraceSource {
  std::string file;  // empty selects the synthetic generator
  double scale = 1.0;
  std::string kind = "sinusoidal";
  int length = 24 * 60;
  std::uint64_t seed = 1;
  double level = 2.0;

  Trace load(int horizon) const {
    if (!file.empty()) return load_trace(file, scale, horizon);
    return synth_trace(parse_synth_kind(kind), length, seed, level);
  }
};

struct SeedRange {
  std::uint64_t first = 1;
  std::uint64_t last = 1;

  std::vector<std::uint64_t> list() const {
    std::vector<std::uint64_t> out;
    for (std::uint64_t s = first; s <= last; ++s) out.push_back(s);
    return out;
  }
};

/// Parses "a..b" or a single integer.
inline SeedRange parse_seed_range(const std::string& s) {
  const auto dots = s.find("..");
  try {
    std::size_t used = 0;
    if (dots == std::string::npos) {
      const auto v = std::stoull(s, &used);
      if (used != s.size()) throw ConfigError("");
      return {v, v};
    }
    const auto a = std::stoull(s.substr(0, dots), &used);
    if (used != dots) throw ConfigError("");
    const auto rest = s.substr(dots + 2);
    const auto b = std::stoull(rest, &used);
    if (used != rest.size()) throw ConfigError("");
    if (b < a) throw ConfigError("");
    return {a, b};
  } catch (const std::exception&) {
    throw ConfigError("seed range must look like 'a..b' with a <= b, got '" + s + "'");
  }
}

struct ExperimentConfig {
  EnvKind env = EnvKind::carbon;
  std::string fixture;  // tiny environments only
  CarbonConfig carbon{};
  SustainableConfig sustainable{};
  TraceSource first_trace{};
  TraceSource second_trace{"", 1.0, "spiky", 24 * 60, 2, 1.5};
  int stride = 24;
  double jitter = 0.2;

  CompetitiveSpec spec{2.0, 2.0};
  std::vector<PolicyKind> roster{PolicyKind::acrl, PolicyKind::rl};
  int episodes = 30;
  int reference_episodes = 30;
  int eval_episodes = 200;
  SeedRange seeds{};
  BetaSchedule beta{};
  bool optimistic = true;
  GridConfig grid{};
  double dual_step = 0.001;
  int dual_window = 10;
  std::optional<double> cost_budget;  // unset selects (1 + lambda) E[J-dagger_H] + H b
  double initial_multiplier = 0.0;
  double random_scale = 2.0;
  int window = 10;
  std::optional<double> lq;  // per-round Q Lipschitz constant for the regret-bound diagnostic
  bool trained_references = true;  // false pins both references to the prior
  std::string output;

  int horizon() const {
    switch (env) {
      case EnvKind::carbon:
        return carbon.horizon;
      case EnvKind::sustainable:
        return sustainable.horizon;
      case EnvKind::tiny:
        break;
    }
    return 0;
  }

  void validate() const {
    spec.validate();
    if (env == EnvKind::tiny && fixture.empty()) throw ConfigError("tiny environment needs a fixture path");
    if (roster.empty()) throw ConfigError("roster must name at least one policy");
    if (std::set<PolicyKind>(roster.begin(), roster.end()).size() != roster.size())
      throw ConfigError("roster lists a policy twice");
    if (episodes < 1) throw ConfigError("episodes must be positive");
    if (reference_episodes < 1) throw ConfigError("reference policies must be trained (reference_episodes >= 1)");
    if (eval_episodes < 1) throw ConfigError("eval_episodes must be positive");
    if (window < 1) throw ConfigError("window must be positive");
    if (stride < 1) throw ConfigError("stride must be positive");
    if (!(jitter >= 0.0 && jitter < 1.0)) throw ConfigError("jitter must lie in [0, 1)");
    if (!(beta.beta0 >= 0.0) || !(beta.c1 >= 0.0)) throw ConfigError("beta constants must be nonnegative");
    if (dual_window < 1 || !(dual_step >= 0.0) || !(initial_multiplier >= 0.0))
      throw ConfigError("dual parameters must be nonnegative with a positive window");
    if (lq && !(*lq >= 0.0)) throw ConfigError("lq must be nonnegative");
    grid.validate();
  }
};

/// Walks a JSON object, remembering which keys were read so leftovers can be rejected.
class ObjectReader {
 public:
  ObjectReader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + " must be an object");
  }

  template <class T>
  void get(const std::string& key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const Json::exception&) {
      throw ConfigError(where(key) + " has the wrong type");
    }
  }

  void get(const std::string& key, std::optional<double>& out) {
    seen_.insert(key);
    if (!j_.contains(key) || j_.at(key).is_null()) return;
    if (!j_.at(key).is_number()) throw ConfigError(where(key) + " must be a number");
    out = j_.at(key).get<double>();
  }

  std::optional<ObjectReader> child(const std::string& key) {
    seen_.insert(key);
    if (!j_.contains(key)) return std::nullopt;
    return ObjectReader(j_.at(key), path_ + "." + key);
  }

  bool has(const std::string& key) const { return j_.contains(key); }
  const Json& raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) throw ConfigError("unknown key '" + path_ + "." + k + "'");
  }

 private:
  std::string where(const std::string& key = {}) const { return "'" + path_ + (key.empty() ? "" : "." + key) + "'"; }
  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

inline void read_trace(ObjectReader r, TraceSource& t) {
  r.get("file", t.file);
  r.get("scale", t.scale);
  r.get("kind", t.kind);
  r.get("length", t.length);
  r.get("seed", t.seed);
  r.get("level", t.level);
  r.finish();
  if (t.file.empty()) parse_synth_kind(t.kind);
}

inline void read_carbon(ObjectReader r, CarbonConfig& c) {
  r.get("horizon", c.horizon);
  r.get("backlog_max", c.backlog_max);
  r.get("action_max", c.action_max);
  r.get("initial_backlog", c.initial_backlog);
  r.get("gamma1", c.gamma1);
  r.get("gamma2", c.gamma2);
  r.get("revenue", c.revenue);
  r.get("alpha", c.alpha);
  r.get("q1", c.q1);
  r.get("q2", c.q2);
  r.get("q3", c.q3);
  r.get("prior_decay", c.prior_decay);
  r.get("prior_efficiency", c.prior_efficiency);
  r.get("rho", c.rho);
  r.finish();
}

inline void read_sustainable(ObjectReader r, SustainableConfig& c) {
  r.get("horizon", c.horizon);
  r.get("battery_max", c.battery_max);
  r.get("action_max", c.action_max);
  r.get("initial_charge", c.initial_charge);
  r.get("gamma1", c.gamma1);
  r.get("gamma2", c.gamma2);
  r.get("gamma3", c.gamma3);
  r.get("q1", c.q1);
  r.get("demand_weight", c.demand_weight);
  r.get("utility_scale", c.utility_scale);
  r.get("prior_slack", c.prior_slack);
  r.get("prior_renewable", c.prior_renewable);
  r.get("prior_efficiency", c.prior_efficiency);
  r.get("rho", c.rho);
  std::string mode = c.prior_mode == CarbonBMode::literal ? "literal" : "lipschitz";
  r.get("prior_mode", mode);
  if (mode == "literal")
    c.prior_mode = CarbonBMode::literal;
  else if (mode == "lipschitz")
    c.prior_mode = CarbonBMode::lipschitz;
  else
    throw ConfigError("prior_mode must be 'literal' or 'lipschitz'");
  r.finish();
}

inline std::string resolve(const std::string& path, const std::string& base) {
  if (path.empty() || base.empty() || std::filesystem::path(path).is_absolute()) return path;
  return (std::filesystem::path(base) / path).lexically_normal().string();
}

/// Builds a config from JSON; every key at every level must be known. Relative file paths resolve
/// against base. A tiny environment takes lambda and b from its fixture unless the config sets them.
inline ExperimentConfig config_from_json(const Json& j, const std::string& base = {}) {
  ExperimentConfig c;
  ObjectReader r(j, "config");
  std::string env = "carbon";
  r.get("env", env);
  if (env == "carbon")
    c.env = EnvKind::carbon;
  else if (env == "sustainable")
    c.env = EnvKind::sustainable;
  else if (env == "tiny")
    c.env = EnvKind::tiny;
  else
    throw ConfigError("env must be carbon, sustainable or tiny");
  r.get("fixture", c.fixture);
  if (auto p = r.child("env_params")) {
    if (c.env == EnvKind::carbon)
      read_carbon(*p, c.carbon);
    else if (c.env == EnvKind::sustainable)
      read_sustainable(*p, c.sustainable);
    else
      p->finish();
  }
  if (auto t = r.child("traces")) {
    if (auto f = t->child("first")) read_trace(*f, c.first_trace);
    if (auto s = t->child("second")) read_trace(*s, c.second_trace);
    t->get("stride", c.stride);
    t->get("jitter", c.jitter);
    t->finish();
  }
  c.fixture = resolve(c.fixture, base);
  c.first_trace.file = resolve(c.first_trace.file, base);
  c.second_trace.file = resolve(c.second_trace.file, base);
  if (c.env == EnvKind::tiny) {
    if (c.fixture.empty()) throw ConfigError("tiny environment needs a fixture path");
    c.spec = load_tiny(c.fixture).spec;
  }
  r.get("lambda", c.spec.lambda);
  r.get("b", c.spec.b);
  if (r.has("roster")) {
    std::vector<std::string> names;
    r.get("roster", names);
    c.roster.clear();
    for (const auto& n : names) c.roster.push_back(parse_policy(n));
  }
  r.get("episodes", c.episodes);
  r.get("reference_episodes", c.reference_episodes);
  r.get("eval_episodes", c.eval_episodes);
  if (r.has("seeds")) {
    const Json& s = r.raw("seeds");
    if (s.is_string())
      c.seeds = parse_seed_range(s.get<std::string>());
    else if (s.is_array() && s.size() == 2 && s[0].is_number_unsigned() && s[1].is_number_unsigned())
      c.seeds = {s[0].get<std::uint64_t>(), s[1].get<std::uint64_t>()};
    else
      throw ConfigError("seeds must be 'a..b' or [a, b]");
    if (c.seeds.last < c.seeds.first) throw ConfigError("seed range is empty");
  }
  if (auto b = r.child("beta")) {
    std::string mode = "log";
    b->get("mode", mode);
    c.beta.mode = parse_beta_mode(mode);
    b->get("beta0", c.beta.beta0);
    b->get("c1", c.beta.c1);
    b->get("c2", c.beta.c2);
    b->get("value_bound", c.beta.value_bound);
    b->finish();
  }
  r.get("optimistic", c.optimistic);
  if (auto g = r.child("grid")) {
    g->get("n_x", c.grid.n_x);
    g->get("n_budget", c.grid.n_budget);
    g->get("n_prev", c.grid.n_prev);
    g->get("n_action", c.grid.n_action);
    g->get("n_quadrature", c.grid.n_quadrature);
    g->get("quadrature_seed", c.grid.quadrature_seed);
    g->finish();
  }
  if (auto d = r.child("crl")) {
    d->get("dual_step", c.dual_step);
    d->get("dual_window", c.dual_window);
    d->get("cost_budget", c.cost_budget);
    d->get("initial_multiplier", c.initial_multiplier);
    d->finish();
  }
  r.get("random_scale", c.random_scale);
  r.get("window", c.window);
  r.get("lq", c.lq);
  std::string refs = "trained";
  r.get("references", refs);
  if (refs != "trained" && refs != "prior") throw ConfigError("references must be 'trained' or 'prior'");
  c.trained_references = refs == "trained";
  r.get("output", c.output);
  r.finish();
  c.validate();
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
  return config_from_json(j, std::filesystem::path(path).parent_path().string());
}

inline Json trace_json(const TraceSource& t) {
  return {{"file", t.file}, {"scale", t.scale}, {"kind", t.kind}, {"length", t.length}, {"seed", t.seed}, {"level", t.level}};
}

/// Normalized config with every default filled in; the output directory is not part of it.
inline Json config_to_json(const ExperimentConfig& c) {
  Json j;
  j["env"] = to_string(c.env);
  j["fixture"] = c.fixture;
  if (c.env == EnvKind::carbon) {
    const auto& e = c.carbon;
    j["env_params"] = {{"horizon", e.horizon},         {"backlog_max", e.backlog_max},
                       {"action_max", e.action_max},   {"initial_backlog", e.initial_backlog},
                       {"gamma1", e.gamma1},           {"gamma2", e.gamma2},
                       {"revenue", e.revenue},         {"alpha", e.alpha},
                       {"q1", e.q1},                   {"q2", e.q2},
                       {"q3", e.q3},                   {"prior_decay", e.prior_decay},
                       {"prior_efficiency", e.prior_efficiency}, {"rho", e.rho}};
  } else if (c.env == EnvKind::sustainable) {
    const auto& e = c.sustainable;
    j["env_params"] = {{"horizon", e.horizon},
                       {"battery_max", e.battery_max},
                       {"action_max", e.action_max},
                       {"initial_charge", e.initial_charge},
                       {"gamma1", e.gamma1},
                       {"gamma2", e.gamma2},
                       {"gamma3", e.gamma3},
                       {"q1", e.q1},
                       {"demand_weight", e.demand_weight},
                       {"utility_scale", e.utility_scale},
                       {"prior_slack", e.prior_slack},
                       {"prior_renewable", e.prior_renewable},
                       {"prior_efficiency", e.prior_efficiency},
                       {"rho", e.rho},
                       {"prior_mode", e.prior_mode == CarbonBMode::literal ? "literal" : "lipschitz"}};
  } else {
    j["env_params"] = Json::object();
  }
  j["traces"] = {{"first", trace_json(c.first_trace)},
                 {"second", trace_json(c.second_trace)},
                 {"stride", c.stride},
                 {"jitter", c.jitter}};
  j["lambda"] = c.spec.lambda;
  j["b"] = c.spec.b;
  std::vector<std::string> roster;
  for (auto k : c.roster) roster.push_back(to_string(k));
  j["roster"] = roster;
  j["episodes"] = c.episodes;
  j["reference_episodes"] = c.reference_episodes;
  j["eval_episodes"] = c.eval_episodes;
  j["seeds"] = std::to_string(c.seeds.first) + ".." + std::to_string(c.seeds.last);
  j["beta"] = {{"mode", c.beta.mode == BetaMode::theory ? "theory" : "log"},
               {"beta0", c.beta.beta0},
               {"c1", c.beta.c1},
               {"c2", c.beta.c2},
               {"value_bound", c.beta.value_bound}};
  j["optimistic"] = c.optimistic;
  j["grid"] = {{"n_x", c.grid.n_x},
               {"n_budget", c.grid.n_budget},
               {"n_prev", c.grid.n_prev},
               {"n_action", c.grid.n_action},
               {"n_quadrature", c.grid.n_quadrature},
               {"quadrature_seed", c.grid.quadrature_seed}};
  j["crl"] = {{"dual_step", c.dual_step},
              {"dual_window", c.dual_window},
              {"cost_budget", c.cost_budget ? Json(*c.cost_budget) : Json(nullptr)},
              {"initial_multiplier", c.initial_multiplier}};
  j["random_scale"] = c.random_scale;
  j["window"] = c.window;
  j["lq"] = c.lq ? Json(*c.lq) : Json(nullptr);
  j["references"] = c.trained_references ? "trained" : "prior";
  return j;
}

/// Canonical serialization: sorted keys, no whitespace.
inline std::string canonical(const ExperimentConfig& c) { return config_to_json(c).dump(); }

/// 64-bit FNV-1a of the canonical config, used to key run directories.
inline std::uint64_t config_hash(const ExperimentConfig& c) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : canonical(c)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

/// Git blob id of a byte string: SHA-1 over "blob <size>\0<bytes>".
inline std::string git_blob_hash(const std::string& bytes) {
  const std::string blob = "blob " + std::to_string(bytes.size()) + std::string(1, '\0') + bytes;
  unsigned char md[SHA_DIGEST_LENGTH];
  SHA1(reinterpret_cast<const unsigned char*>(blob.data()), blob.size(), md);
  std::string out;
  char buf[3];
  for (unsigned char b : md) {
    std::snprintf(buf, sizeof buf, "%02x", b);
    out += buf;
  }
  return out;
}

inline std::string content_hash(const ExperimentConfig& c) { return git_blob_hash(canonical(c)); }

}  // namespace acmdp::harness
