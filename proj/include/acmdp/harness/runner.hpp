#pragma once

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>
#include <vector>

#include "acmdp/harness/checkpoint.hpp"
#include "acmdp/harness/config.hpp"
#include "acmdp/harness/metrics.hpp"
#include "acmdp/learner/acrl.hpp"
#include "acmdp/learner/exact_planner.hpp"
#include "acmdp/learner/grid_planner.hpp"
#include "acmdp/oracle/bound.hpp"
#include "acmdp/oracle/safety_check.hpp"

namespace acmdp::harness {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;  // verification failed
inline constexpr int kExitConfig = 2;
inline constexpr int kExitIo = 3;
inline constexpr int kExitSafetyFault = 4;
inline constexpr int kExitSafetyGate = 5;  // an ACD-wrapped policy reported a violation

// Seed-stream tags; each run seed fans out into disjoint derived streams.
inline constexpr std::uint64_t kTrainStream = 1;
inline constexpr std::uint64_t kStarStream = 2;
inline constexpr std::uint64_t kCircStream = 3;
inline constexpr std::uint64_t kEvalStream = 4;
inline constexpr std::uint64_t kNetStream = 5;
inline constexpr std::uint64_t kPriorCostSeed = 0x5eedc057ULL;

inline std::vector<std::uint64_t> eval_seeds(std::uint64_t run_seed, int n) {
  std::vector<std::uint64_t> out;
  const std::uint64_t base = derive_seed(run_seed, kEvalStream);
  for (int i = 0; i < n; ++i) out.push_back(derive_seed(base, static_cast<std::uint64_t>(i)));
  return out;
}

/// Environment, episode generator, and planner factory for a trace-driven environment.
template <class Env>
class GridSetup {
 public:
  using EnvType = Env;
  using Planner = GridPlanner<Env>;

  GridSetup(Env env, TraceEpisodes episodes, std::vector<typename Env::Model> models, GridConfig grid,
            CompetitiveSpec spec)
      : env_(std::move(env)),
        episodes_(std::move(episodes)),
        models_(std::move(models)),
        grid_(grid),
        spec_(spec),
        profile_(episodes_.mean_profile()) {
    if (episodes_.horizon() != env_.params().horizon) throw ConfigError("trace horizon differs from the environment");
  }
  GridSetup(const GridSetup&) = delete;
  GridSetup& operator=(const GridSetup&) = delete;

  const Env& env() const { return env_; }
  ModelSequence episode(std::uint64_t seed) const { return episodes_.sequence(seed); }

  std::shared_ptr<const Planner> planner(PlanMode mode, double penalty) const {
    const auto make = [&] { return std::make_shared<const Planner>(env_, models_, profile_, spec_, mode, grid_, penalty); };
    if (penalty != 0.0) return make();
    std::lock_guard<std::mutex> lock(mu_);
    auto& slot = cache_[mode];
    if (!slot) slot = make();
    return slot;
  }

  std::optional<std::size_t> truth() const {
    for (std::size_t i = 0; i < models_.size(); ++i)
      if (models_[i] == env_.true_model()) return i;
    return std::nullopt;
  }

  static std::vector<double> table(const GridPlan& p) { return p.values; }

 private:
  Env env_;
  TraceEpisodes episodes_;
  std::vector<typename Env::Model> models_;
  GridConfig grid_;
  CompetitiveSpec spec_;
  std::vector<Exogenous> profile_;
  mutable std::mutex mu_;
  mutable std::map<PlanMode, std::shared_ptr<const Planner>> cache_;
};

/// Fixture-driven setup; each call builds a fresh planner.
class TinySetup {
 public:
  using EnvType = TinyEnv;
  using Planner = ExactPlanner;

  explicit TinySetup(const TinyMDP& t) : env_(t) {}
  TinySetup(const TinySetup&) = delete;
  TinySetup& operator=(const TinySetup&) = delete;

  const TinyEnv& env() const { return env_; }
  ModelSequence episode(std::uint64_t seed) const { return ModelSequence::from_seed(seed, env_.tiny().horizon); }
  std::shared_ptr<const Planner> planner(PlanMode mode, double penalty) const {
    return std::make_shared<const Planner>(env_, ExactPlanner::fixture_models(env_.tiny()), mode, penalty);
  }
  std::optional<std::size_t> truth() const { return env_.tiny().truth; }
  static std::vector<double> table(const ExactPlan& p) { return p.probabilities; }

 private:
  TinyEnv env_;
};

/// A frozen roster or reference policy: greedy on a plan, a fixed random network, or the prior.
template <class Setup>
struct FrozenPolicy {
  using Env = typename Setup::EnvType;
  using Planner = typename Setup::Planner;
  bool projection = false;
  std::shared_ptr<const Planner> planner;
  std::shared_ptr<const typename Planner::Plan> plan;
  std::shared_ptr<const TanhNetPolicy<Env>> net;

  typename Env::Action operator()(const Observation<Env>& obs) const {
    if (planner) return GreedyPolicy<Planner>{planner.get(), plan, nullptr}(obs);
    if (net) return (*net)(obs);
    return obs.prior;
  }

  PairedEpisode<Env> play(const Env& env, const ModelSequence& seq, const CompetitiveSpec& spec,
                          const std::shared_ptr<const SensitivityTable>& table) const {
    return acmdp::play(env, seq, *this, spec, table, projection);
  }
};

struct PolicyOutcome {
  std::vector<MetricsRow> rows;
  std::vector<CurveRow> curve;
  std::optional<Checkpoint> checkpoint;
  double eta_hat = kNaN;
  double theorem_rhs = kNaN;
};

struct RunSummaryRow {
  std::string policy;
  long long episodes = 0;
  long long violations = 0;
  double mean_return = 0.0;
  double mean_regret = 0.0;
  double mean_pseudo_regret = 0.0;
  double eta_hat = kNaN;
  double theorem_rhs = kNaN;
};

struct RunResult {
  std::string directory;
  std::uint64_t config_hash = 0;
  std::string content_hash;
  std::vector<MetricsRow> metrics;
  std::vector<CurveRow> curve;
  std::vector<RunSummaryRow> summary;
  bool gate_passed = true;
  int exit_code() const { return gate_passed ? kExitOk : kExitSafetyGate; }
};

/// Runs independent jobs on up to `jobs` threads; results land in job order.
template <class T>
std::vector<T> run_jobs(std::size_t n, int jobs, const std::function<T(std::size_t)>& job) {
  std::vector<std::optional<T>> slots(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        slots[i] = job(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int threads = std::max(1, std::min<int>(jobs, static_cast<int>(n)));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  std::vector<T> out;
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

template <class Setup>
class Experiment {
 public:
  using Env = typename Setup::EnvType;
  using Planner = typename Setup::Planner;
  using Frozen = FrozenPolicy<Setup>;

  Experiment(const Setup& setup, ExperimentConfig cfg)
      : setup_(setup), cfg_(std::move(cfg)), table_(make_sensitivity(setup.env().params())) {
    cfg_.beta.horizon = setup_.env().params().horizon;
    if (cfg_.cost_budget) {
      cost_budget_ = *cfg_.cost_budget;
    } else {
      PriorController<Env> prior;
      double mean = 0.0;
      const int n = 200;
      for (int i = 0; i < n; ++i)
        mean += rollout(setup_.env(), setup_.episode(derive_seed(kPriorCostSeed, static_cast<std::uint64_t>(i))), prior)
                    .total_cost() /
                n;
      cost_budget_ = (1.0 + cfg_.spec.lambda) * mean + setup_.env().params().horizon * cfg_.spec.b;
    }
  }

  const ExperimentConfig& config() const { return cfg_; }
  double cost_budget() const { return cost_budget_; }

  TrainOptions options(LearnerKind kind, std::uint64_t seed, int episodes) const {
    TrainOptions o;
    o.kind = kind;
    o.episodes = episodes;
    o.seed = seed;
    o.beta = cfg_.beta;
    o.optimistic = cfg_.optimistic;
    o.cost_budget = cost_budget_;
    o.dual_step = cfg_.dual_step;
    o.dual_window = cfg_.dual_window;
    o.initial_multiplier = cfg_.initial_multiplier;
    o.reference_model = setup_.truth();
    return o;
  }

  using Callback = std::function<double(const Planner&, const typename Planner::Plan&, const EpisodeRecord<Env>&)>;

  TrainResult<Planner> train_kind(LearnerKind kind, std::uint64_t seed, int episodes, const Callback& cb = {}) const {
    const PlanMode mode = kind == LearnerKind::acrl ? PlanMode::acd : PlanMode::raw;
    return train<Planner>([&](double nu) { return setup_.planner(mode, nu); },
                          [&](std::uint64_t s) { return setup_.episode(s); }, cfg_.spec, options(kind, seed, episodes),
                          cb);
  }

  static Frozen freeze(const TrainResult<Planner>& r, bool projection) { return {projection, r.planner, r.plan, {}}; }

  /// The frozen unconstrained reference and the frozen ACD-optimal reference of one run seed.
  std::pair<Frozen, Frozen> references(std::uint64_t run_seed) const {
    if (!cfg_.trained_references) return {Frozen{}, Frozen{}};
    return {freeze(train_kind(LearnerKind::rl, derive_seed(run_seed, kStarStream), cfg_.reference_episodes), false),
            freeze(train_kind(LearnerKind::acrl, derive_seed(run_seed, kCircStream), cfg_.reference_episodes), true)};
  }

  Frozen reference(std::uint64_t run_seed, bool acd_optimal, TrainResult<Planner>* out = nullptr) const {
    if (!cfg_.trained_references) return Frozen{};
    const auto r = acd_optimal
                       ? train_kind(LearnerKind::acrl, derive_seed(run_seed, kCircStream), cfg_.reference_episodes)
                       : train_kind(LearnerKind::rl, derive_seed(run_seed, kStarStream), cfg_.reference_episodes);
    if (out) *out = r;
    return freeze(r, acd_optimal);
  }

  Checkpoint checkpoint(const std::string& policy, std::uint64_t seed, const TrainResult<Planner>& r) const {
    Checkpoint c;
    c.config_hash = config_hash(cfg_);
    c.policy = policy;
    c.seed = seed;
    c.episodes = static_cast<std::uint32_t>(r.episodes.size());
    c.losses = r.losses;
    c.membership.assign(r.losses.size(), false);
    for (std::size_t m : r.confidence_set) c.membership[m] = true;
    c.selected = static_cast<std::uint32_t>(r.selected);
    c.multiplier = r.multiplier;
    c.table = Setup::table(*r.plan);
    return c;
  }

  /// Trains (when applicable) and evaluates one roster policy for one run seed.
  PolicyOutcome run_policy(PolicyKind kind, std::uint64_t run_seed, const std::pair<Frozen, Frozen>& refs) const {
    const Env& env = setup_.env();
    const auto& spec = cfg_.spec;
    const std::string name = to_string(kind);
    PolicyOutcome out;
    Frozen policy;
    policy.projection = acd_wrapped(kind);

    std::optional<LearnerKind> learner;
    if (kind == PolicyKind::acrl) learner = LearnerKind::acrl;
    if (kind == PolicyKind::rl || kind == PolicyKind::rl_acd) learner = LearnerKind::rl;
    if (kind == PolicyKind::crl) learner = LearnerKind::crl;

    if (learner) {
      struct Extra {
        double regret, ratio;
      };
      std::vector<Extra> extra;
      const Callback cb = [&](const Planner&, const typename Planner::Plan&, const EpisodeRecord<Env>& rec) {
        const auto seq = setup_.episode(rec.seed);
        const double star = refs.first.play(env, seq, spec, table_).agent.total_reward();
        const double circ = refs.second.play(env, seq, spec, table_).agent.total_reward();
        PriorController<Env> prior_ctl;
        const auto prior = rollout(env, seq, prior_ctl);
        extra.push_back({star - rec.total_reward(), anytime_check(rec, prior, spec).max_violation_ratio});
        return circ - rec.total_reward();
      };
      const auto r = train_kind(*learner, derive_seed(run_seed, kTrainStream), cfg_.episodes, cb);
      policy.planner = r.planner;
      policy.plan = r.plan;
      out.checkpoint = checkpoint(name, run_seed, r);
      double cumulative = 0.0, window = 0.0;
      for (std::size_t i = 0; i < r.episodes.size(); ++i) {
        const auto& e = r.episodes[i];
        cumulative += e.pseudo_regret;
        window += e.pseudo_regret;
        if (i >= static_cast<std::size_t>(cfg_.window)) window -= r.episodes[i - cfg_.window].pseudo_regret;
        const double span = static_cast<double>(std::min<std::size_t>(i + 1, cfg_.window));
        if (kind == PolicyKind::rl_acd) continue;
        out.rows.push_back({run_seed, "train", e.episode, name, e.total_reward, extra[i].regret, e.pseudo_regret,
                            e.violated, e.worst_slack, extra[i].ratio, e.total_cost});
        out.curve.push_back({run_seed, e.episode, name, e.total_reward, e.pseudo_regret,
                             cumulative / static_cast<double>(i + 1), window / span, extra[i].regret, e.violated,
                             e.multiplier, e.selected, e.set_size});
      }
    } else if (kind == PolicyKind::random_acd) {
      policy.net = std::make_shared<const TanhNetPolicy<Env>>(env, derive_seed(run_seed, kNetStream), cfg_.random_scale);
    }

    double eta = 0.0, rhs = 0.0;
    const bool diagnose = policy.projection && cfg_.lq && refs.first.planner;
    const auto seeds = eval_seeds(run_seed, cfg_.eval_episodes);
    for (std::size_t i = 0; i < seeds.size(); ++i) {
      const auto seq = setup_.episode(seeds[i]);
      const auto pair = policy.play(env, seq, spec, table_);
      const auto check = anytime_check(pair.agent, pair.prior, spec);
      const double ret = pair.agent.total_reward();
      const double star = refs.first.play(env, seq, spec, table_).agent.total_reward();
      const double circ = refs.second.play(env, seq, spec, table_).agent.total_reward();
      out.rows.push_back({run_seed, "eval", static_cast<int>(i + 1), name, ret, star - ret, circ - ret,
                          !check.satisfied, check.worst_slack, check.max_violation_ratio, pair.agent.total_cost()});
      if (diagnose) {
        eta = std::max(eta, star_gap(refs.first, pair.agent, seq));
        rhs += bound_eval(pair.agent, spec, env.params().min_cost, *table_,
                          std::vector<double>(pair.agent.rounds.size(), *cfg_.lq), eta) /
               static_cast<double>(seeds.size());
      }
    }
    if (diagnose) {
      out.eta_hat = eta;
      out.theorem_rhs = rhs;
    }
    return out;
  }

  /// Largest gap between the unconstrained reference and the prior over the states an episode visited.
  double star_gap(const Frozen& star, const EpisodeRecord<Env>& rec, const ModelSequence& seq) const {
    double gap = 0.0;
    auto prev = setup_.env().initial_action();
    for (std::size_t i = 0; i < rec.rounds.size(); ++i) {
      Observation<Env> obs;
      obs.round = static_cast<int>(i + 1);
      obs.x = rec.rounds[i].x;
      obs.prev = prev;
      obs.inputs = seq.inputs(obs.round);
      obs.prior = rec.rounds[i].prior_action;
      gap = std::max(gap, distance(star(obs), obs.prior));
      prev = rec.rounds[i].action;
    }
    return gap;
  }

  /// Every roster policy on every seed; references are trained once per seed.
  RunResult run(int jobs) const {
    const auto seeds = cfg_.seeds.list();
    const auto refs = run_jobs<std::pair<Frozen, Frozen>>(seeds.size(), jobs,
                                                          [&](std::size_t i) { return references(seeds[i]); });
    const std::size_t P = cfg_.roster.size();
    const auto outcomes = run_jobs<PolicyOutcome>(seeds.size() * P, jobs, [&](std::size_t j) {
      return run_policy(cfg_.roster[j % P], seeds[j / P], refs[j / P]);
    });
    RunResult res;
    res.config_hash = config_hash(cfg_);
    res.content_hash = content_hash(cfg_);
    for (std::size_t p = 0; p < P; ++p) {
      RunSummaryRow s;
      s.policy = to_string(cfg_.roster[p]);
      double eta = 0.0, rhs = 0.0;
      for (std::size_t k = 0; k < seeds.size(); ++k) {
        const auto& o = outcomes[k * P + p];
        if (!std::isnan(o.eta_hat)) eta = std::max(eta, o.eta_hat);
        if (!std::isnan(o.theorem_rhs)) rhs += o.theorem_rhs / static_cast<double>(seeds.size());
        for (const auto& r : o.rows) {
          if (acd_wrapped(cfg_.roster[p]) && r.violated) res.gate_passed = false;
          if (r.phase != "eval") continue;
          ++s.episodes;
          s.violations += r.violated;
          s.mean_return += r.ret;
          s.mean_regret += r.regret;
          s.mean_pseudo_regret += r.pseudo_regret;
        }
      }
      if (s.episodes) {
        s.mean_return /= static_cast<double>(s.episodes);
        s.mean_regret /= static_cast<double>(s.episodes);
        s.mean_pseudo_regret /= static_cast<double>(s.episodes);
      }
      if (acd_wrapped(cfg_.roster[p]) && cfg_.lq && cfg_.trained_references) {
        s.eta_hat = eta;
        s.theorem_rhs = rhs;
      }
      res.summary.push_back(s);
    }
    for (const auto& o : outcomes) {
      res.metrics.insert(res.metrics.end(), o.rows.begin(), o.rows.end());
      res.curve.insert(res.curve.end(), o.curve.begin(), o.curve.end());
    }
    checkpoints_.clear();
    for (const auto& o : outcomes)
      if (o.checkpoint) checkpoints_.push_back(*o.checkpoint);
    return res;
  }

  const std::vector<Checkpoint>& checkpoints() const { return checkpoints_; }

 private:
  const Setup& setup_;
  ExperimentConfig cfg_;
  std::shared_ptr<const SensitivityTable> table_;
  double cost_budget_ = 0.0;
  mutable std::vector<Checkpoint> checkpoints_;
};

inline std::string summary_csv(const std::vector<RunSummaryRow>& rows) {
  std::string out = header_line("summary");
  out += "policy,episodes,violations,violation_rate,mean_return,mean_regret,mean_pseudo_regret,eta_hat,theorem_rhs\n";
  for (const auto& r : rows)
    out += r.policy + "," + std::to_string(r.episodes) + "," + std::to_string(r.violations) + "," +
           fmt(r.episodes ? static_cast<double>(r.violations) / static_cast<double>(r.episodes) : 0.0) + "," +
           fmt(r.mean_return) + "," + fmt(r.mean_regret) + "," + fmt(r.mean_pseudo_regret) + "," + fmt(r.eta_hat) +
           "," + fmt(r.theorem_rhs) + "\n";
  return out;
}

/// Output root: explicit flag, then the config, then ACMDP_OUTPUT_ROOT, then ./results.
inline std::string output_root(const std::string& flag, const ExperimentConfig& cfg) {
  if (!flag.empty()) return flag;
  if (!cfg.output.empty()) return cfg.output;
  if (const char* env = std::getenv("ACMDP_OUTPUT_ROOT"); env && *env) return env;
  return "results";
}

/// Creates the next free run-NNN directory under root/<config hash>; earlier runs are never touched.
inline std::string fresh_run_directory(const std::string& root, std::uint64_t hash) {
  namespace fs = std::filesystem;
  const fs::path base = fs::path(root) / hex64(hash);
  std::error_code ec;
  fs::create_directories(base, ec);
  if (ec) throw IoError("cannot create '" + base.string() + "': " + ec.message());
  for (int n = 1; n < 100000; ++n) {
    char name[16];
    std::snprintf(name, sizeof name, "run-%03d", n);
    const fs::path dir = base / name;
    if (fs::create_directory(dir, ec)) return dir.string();
    if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
  }
  throw IoError("no free run directory under '" + base.string() + "'");
}

inline Json snapshot(const ExperimentConfig& cfg) {
  Json j;
  j["config"] = config_to_json(cfg);
  j["config_hash"] = hex64(config_hash(cfg));
  j["content_hash"] = content_hash(cfg);
  j["csv_version"] = kCsvVersion;
  return j;
}

/// Calls f with the setup matching the config's environment.
template <class F>
auto with_setup(const ExperimentConfig& cfg, F&& f) {
  const int H = cfg.horizon();
  const auto episodes = [&] {
    return TraceEpisodes(cfg.first_trace.load(H), cfg.second_trace.load(H), H, cfg.stride, cfg.jitter);
  };
  switch (cfg.env) {
    case EnvKind::carbon: {
      const GridSetup<CarbonSchedulingEnv> s(CarbonSchedulingEnv(cfg.carbon), episodes(), carbon_model_class(),
                                             cfg.grid, cfg.spec);
      return f(s);
    }
    case EnvKind::sustainable: {
      const GridSetup<SustainableInferenceEnv> s(SustainableInferenceEnv(cfg.sustainable), episodes(),
                                                 sustainable_model_class(), cfg.grid, cfg.spec);
      return f(s);
    }
    case EnvKind::tiny:
      break;
  }
  auto tiny = load_tiny(cfg.fixture);
  tiny.spec = cfg.spec;
  const TinySetup s(tiny);
  return f(s);
}

/// Runs the experiment and writes config.json, metrics.csv, learning_curve.csv, summary.csv and checkpoints.
inline RunResult run(const ExperimentConfig& cfg, const std::string& root, int jobs) {
  cfg.validate();
  return with_setup(cfg, [&](const auto& setup) {
    using S = std::decay_t<decltype(setup)>;
    const Experiment<S> exp(setup, cfg);
    RunResult res = exp.run(jobs);
    namespace fs = std::filesystem;
    res.directory = fresh_run_directory(root, res.config_hash);
    write_file((fs::path(res.directory) / "config.json").string(), snapshot(cfg).dump(2) + "\n");
    write_file((fs::path(res.directory) / "metrics.csv").string(), metrics_csv(res.metrics));
    write_file((fs::path(res.directory) / "learning_curve.csv").string(), curve_csv(res.curve));
    write_file((fs::path(res.directory) / "summary.csv").string(), summary_csv(res.summary));
    const fs::path ck = fs::path(res.directory) / "checkpoints";
    fs::create_directories(ck);
    for (const auto& c : exp.checkpoints())
      write_file((ck / (c.policy + "-" + std::to_string(c.seed) + ".ckpt")).string(), encode_checkpoint(c));
    return res;
  });
}

enum class SweepParam { lambda, b, beta0 };

inline SweepParam parse_sweep_param(const std::string& s) {
  if (s == "lambda") return SweepParam::lambda;
  if (s == "b") return SweepParam::b;
  if (s == "beta0") return SweepParam::beta0;
  throw ConfigError("sweep parameter must be lambda, b or beta0");
}

inline std::string to_string(SweepParam p) {
  return p == SweepParam::lambda ? "lambda" : p == SweepParam::b ? "b" : "beta0";
}

struct SweepResult {
  std::string directory;
  std::vector<SweepRow> rows;
  std::vector<RunResult> runs;
  bool gate_passed = true;
  int exit_code() const { return gate_passed ? kExitOk : kExitSafetyGate; }
};

/// One run per grid value on shared seed lists, aggregated per (value, policy) over evaluation rows.
inline SweepResult sweep(const ExperimentConfig& cfg, SweepParam param, const std::vector<double>& values,
                         const std::string& root, int jobs) {
  if (values.empty()) throw ConfigError("sweep needs at least one value");
  SweepResult out;
  out.directory = fresh_run_directory((std::filesystem::path(root) / "sweeps").string(), config_hash(cfg));
  for (double v : values) {
    ExperimentConfig c = cfg;
    if (param == SweepParam::lambda) c.spec.lambda = v;
    if (param == SweepParam::b) c.spec.b = v;
    if (param == SweepParam::beta0) c.beta.beta0 = v;
    c.validate();
    auto r = run(c, out.directory, jobs);
    if (!r.gate_passed) out.gate_passed = false;
    for (auto k : c.roster) {
      const std::string name = to_string(k);
      double sum = 0.0, sq = 0.0;
      long long n = 0, viol = 0;
      for (const auto& m : r.metrics)
        if (m.phase == "eval" && m.policy == name) {
          sum += m.regret;
          sq += m.regret * m.regret;
          ++n;
          viol += m.violated;
        }
      const double mean = n ? sum / static_cast<double>(n) : 0.0;
      const double var = n > 1 ? std::max(0.0, (sq - static_cast<double>(n) * mean * mean) / static_cast<double>(n - 1)) : 0.0;
      out.rows.push_back({to_string(param), v, name, mean, n ? 1.96 * std::sqrt(var / static_cast<double>(n)) : 0.0,
                          n ? static_cast<double>(viol) / static_cast<double>(n) : 0.0});
    }
    out.runs.push_back(std::move(r));
  }
  write_file((std::filesystem::path(out.directory) / "sweep.csv").string(), sweep_csv(out.rows));
  return out;
}

struct ReferenceResult {
  std::string directory;
  std::vector<double> returns;  // evaluation returns, seeds in order
  double mean_return = 0.0;
};

/// Trains a reference per seed on its own seed stream, freezes it, and evaluates it on the held-out seeds.
inline ReferenceResult reference(const ExperimentConfig& cfg, bool acd_optimal, const std::string& root) {
  cfg.validate();
  if (!cfg.trained_references) throw ConfigError("reference command needs trained references");
  return with_setup(cfg, [&](const auto& setup) {
    using S = std::decay_t<decltype(setup)>;
    const Experiment<S> exp(setup, cfg);
    const auto table = make_sensitivity(setup.env().params());
    ReferenceResult out;
    out.directory = fresh_run_directory((std::filesystem::path(root) / "references").string(), config_hash(cfg));
    std::string csv = header_line("reference") + "seed,episode,kind,return\n";
    const std::string kind = acd_optimal ? "acd_optimal" : "unconstrained";
    for (std::uint64_t seed : cfg.seeds.list()) {
      TrainResult<typename S::Planner> trained;
      const auto frozen = exp.reference(seed, acd_optimal, &trained);
      write_file((std::filesystem::path(out.directory) / (kind + "-" + std::to_string(seed) + ".ckpt")).string(),
                 encode_checkpoint(exp.checkpoint(kind, seed, trained)));
      const auto seeds = eval_seeds(seed, cfg.eval_episodes);
      for (std::size_t i = 0; i < seeds.size(); ++i) {
        const double r = frozen.play(setup.env(), setup.episode(seeds[i]), cfg.spec, table).agent.total_reward();
        out.returns.push_back(r);
        csv += std::to_string(seed) + "," + std::to_string(i + 1) + "," + kind + "," + fmt(r) + "\n";
      }
    }
    for (double r : out.returns) out.mean_return += r / static_cast<double>(out.returns.size());
    write_file((std::filesystem::path(out.directory) / "reference.csv").string(), csv);
    return out;
  });
}

struct FixtureVerdict {
  std::string fixture;
  oracle::SafetyReport safety;
  double dp_gap_acd = 0.0;
  double dp_gap_raw = 0.0;
  oracle::TheoremCheck theorem;
  bool passed = false;
  std::string reason;
};

struct VerifyReport {
  std::vector<FixtureVerdict> fixtures;
  std::vector<std::string> warnings;
  bool passed() const {
    for (const auto& f : fixtures)
      if (!f.passed) return false;
    return true;
  }
  int exit_code() const { return passed() ? kExitOk : kExitFailure; }
};

inline constexpr double kDpTolerance = 1e-9;

/// Exhaustive safety, production planner against the oracle DP, and the regret bound, per fixture.
inline FixtureVerdict verify_fixture(const std::string& path) {
  FixtureVerdict v;
  const auto t = load_tiny(path);
  v.fixture = t.name.empty() ? path : t.name;
  v.safety = oracle::exhaustive_safety_check(t);
  const TinyEnv env(t);
  const ExactPlanner acd(env, ExactPlanner::fixture_models(t), PlanMode::acd);
  const ExactPlanner raw(env, ExactPlanner::fixture_models(t), PlanMode::raw);
  v.dp_gap_acd = std::abs(acd.root(*acd.plan(t.truth)) - oracle::exact_dp(t, t.projection));
  v.dp_gap_raw = std::abs(raw.root(*raw.plan(t.truth)) - oracle::exact_dp(t, false));
  v.theorem = oracle::theorem_bound(t);
  v.passed = true;
  if (!v.safety.passed()) {
    v.passed = false;
    v.reason = "anytime violation: " + v.safety.counterexample;
  } else if (t.projection && v.dp_gap_acd > kDpTolerance) {
    v.passed = false;
    v.reason = "ACD planner differs from the oracle by " + fmt(v.dp_gap_acd);
  } else if (v.dp_gap_raw > kDpTolerance) {
    v.passed = false;
    v.reason = "unconstrained planner differs from the oracle by " + fmt(v.dp_gap_raw);
  } else if (v.theorem.regret > v.theorem.rhs + 1e-9) {
    v.passed = false;
    v.reason = "regret " + fmt(v.theorem.regret) + " exceeds the bound " + fmt(v.theorem.rhs);
  }
  return v;
}

/// Fixture paths may be files or directories (non-recursive *.tiny).
inline VerifyReport verify(const std::vector<std::string>& paths) {
  namespace fs = std::filesystem;
  std::vector<std::string> files;
  for (const auto& p : paths) {
    if (fs::is_directory(p)) {
      std::vector<std::string> found;
      for (const auto& e : fs::directory_iterator(p))
        if (e.is_regular_file() && e.path().extension() == ".tiny") found.push_back(e.path().string());
      std::sort(found.begin(), found.end());
      files.insert(files.end(), found.begin(), found.end());
    } else if (fs::exists(p)) {
      files.push_back(p);
    } else {
      throw IoError("fixture path '" + p + "' does not exist");
    }
  }
  VerifyReport rep;
  if (files.empty()) rep.warnings.push_back("no fixtures to verify");
  for (const auto& f : files) rep.fixtures.push_back(verify_fixture(f));
  return rep;
}

struct TraceInfo {
  std::string name;
  int length = 0;
  double min = 0.0, max = 0.0, mean = 0.0;
  int windows = 0;
};

inline TraceInfo trace_info(const std::string& path, double scale, int horizon, int stride) {
  const Trace t = load_trace(path, scale, 1);
  TraceInfo out{t.name, t.size(), t.values.front(), t.values.front(), 0.0, window_count(t.size(), horizon, stride)};
  for (double v : t.values) {
    out.min = std::min(out.min, v);
    out.max = std::max(out.max, v);
    out.mean += v / t.size();
  }
  return out;
}

}  // namespace acmdp::harness
