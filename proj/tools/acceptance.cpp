#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "acmdp/harness/runner.hpp"
#include "acmdp/oracle/bound.hpp"
#include "acmdp/oracle/exact_dp.hpp"
#include "acmdp/oracle/safety_check.hpp"
#include "acmdp/safety/lemmas.hpp"

using namespace acmdp;
using namespace acmdp::harness;
namespace fs = std::filesystem;

namespace {

constexpr double kExhaustiveSeconds = 30.0;
constexpr double kStatisticalSeconds = 300.0;
constexpr int kStatisticalEpisodes = 10000;
constexpr double kContrastMinRate = 0.01;
constexpr int kContrastEpisodes = 1000;
constexpr int kBudgetTrajectories = 100000;
constexpr double kBudgetRelTol = 1e-12;
constexpr double kDpTol = 1e-9;
constexpr double kSigmas = 3.0;
constexpr int kDpSamples = 20000;
constexpr double kBoundTol = 1e-12;
constexpr int kTradeoffEpisodes = 500;
constexpr int kTradeoffSeeds = 5;
constexpr double kTradeoffSeconds = 1800.0;
constexpr int kLearningEpisodes = 2000;
constexpr int kLearningSeeds = 5;
constexpr int kLearningMinSeeds = 4;
constexpr double kLearningDrop = 0.5;
constexpr int kLemmaRollouts = 100000;

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmtd(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::vector<std::string> fixtures() {
  std::vector<std::string> out;
  for (const auto& e : fs::directory_iterator(ACMDP_FIXTURE_DIR))
    if (e.is_regular_file() && e.path().extension() == ".tiny") out.push_back(e.path().string());
  std::sort(out.begin(), out.end());
  return out;
}

Json desk_json(const std::string& env) {
  return {{"env", env},
          {"traces",
           {{"first", {{"kind", "spiky"}, {"length", 1440}, {"seed", 1}, {"level", 2.0}}},
            {"second", {{"kind", "sinusoidal"}, {"length", 1440}, {"seed", 2}, {"level", 1.5}}},
            {"stride", 24},
            {"jitter", 0.2}}},
          {"lambda", 2},
          {"b", 2},
          {"episodes", 30},
          {"reference_episodes", 30},
          {"eval_episodes", 1000},
          {"seeds", "1..1"}};
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Verdict exhaustive_safety() {
  const auto t0 = std::chrono::steady_clock::now();
  long long sequences = 0, violations = 0;
  int checked = 0;
  std::string first;
  for (const auto& path : fixtures()) {
    const auto rep = oracle::exhaustive_safety_check(load_tiny(path));
    ++checked;
    sequences += rep.sequences;
    violations += rep.violations + rep.oracle_violations + rep.disagreements;
    if (!rep.passed() && first.empty()) first = fs::path(path).stem().string() + " " + rep.counterexample;
  }
  const double s = seconds_since(t0);
  return {checked >= 3 && violations == 0 && s < kExhaustiveSeconds,
          std::to_string(checked) + " fixtures, " + std::to_string(sequences) + " sequence/action paths, " +
              std::to_string(violations) + " violations" + (first.empty() ? "" : " (" + first + ")") + ", " +
              fmtd("%.1f s", s)};
}

template <class Setup>
long long statistical_one(const Setup& setup, const ExperimentConfig& cfg, const FrozenPolicy<Setup>& trained,
                          long long& episodes) {
  using Env = typename Setup::EnvType;
  const Env& env = setup.env();
  const auto table = make_sensitivity(env.params());
  const auto seeds = eval_seeds(0xacce97, kStatisticalEpisodes);
  long long violations = 0;
  const auto tally = [&](const PairedEpisode<Env>& pair) {
    ++episodes;
    violations += !anytime_check(pair.agent, pair.prior, cfg.spec).satisfied;
  };
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    const auto seq = setup.episode(seeds[i]);
    const AdversarialPolicy<Env> adv{&env, static_cast<AdversaryMode>(i % 3)};
    tally(acd_paired_rollout(env, seq, adv, cfg.spec, table));
    const TanhNetPolicy<Env> net(env, seeds[i]);
    tally(acd_paired_rollout(env, seq, net, cfg.spec, table));
    tally(trained.play(env, seq, cfg.spec, table));
  }
  return violations;
}

Verdict statistical_safety() {
  const auto t0 = std::chrono::steady_clock::now();
  long long episodes = 0, violations = 0;
  for (const std::string name : {"carbon", "sustainable"}) {
    auto j = desk_json(name);
    j["grid"] = {{"n_x", 16}, {"n_budget", 8}, {"n_prev", 4}, {"n_action", 9}, {"n_quadrature", 4}};
    const auto base = config_from_json(j);
    // One RL policy per environment, trained without the safety layer, then wrapped by ACD under every spec.
    with_setup(base, [&](const auto& setup) {
      using S = std::decay_t<decltype(setup)>;
      const Experiment<S> exp(setup, base);
      auto trained = Experiment<S>::freeze(exp.train_kind(LearnerKind::rl, 7, base.episodes), true);
      for (double lambda : {0.0, 2.0, 6.0})
        for (double b : {2.0, 6.0}) {
          auto cfg = base;
          cfg.spec = {lambda, b};
          violations += statistical_one(setup, cfg, trained, episodes);
        }
      return 0;
    });
  }
  const double s = seconds_since(t0);
  return {violations == 0 && episodes == 2LL * 6 * 3 * kStatisticalEpisodes && s < kStatisticalSeconds,
          std::to_string(episodes) + " episodes (2 envs x 6 specs x {adversarial, random, trained RL}), " +
              std::to_string(violations) + " violations, " + fmtd("%.1f s", s)};
}

Verdict violation_contrast() {
  const auto cfg = config_from_json(desk_json("carbon"));
  std::string detail;
  bool pass = true;
  with_setup(cfg, [&](const auto& setup) {
    using S = std::decay_t<decltype(setup)>;
    const Experiment<S> exp(setup, cfg);
    for (LearnerKind kind : {LearnerKind::rl, LearnerKind::crl}) {
      const auto r = exp.train_kind(kind, derive_seed(1, kTrainStream), cfg.episodes);
      const auto policy = Experiment<S>::freeze(r, false);
      const auto s = evaluate(setup.env(), [&](std::uint64_t seed) { return setup.episode(seed); },
                              eval_seeds(1, kContrastEpisodes), policy, cfg.spec, false);
      pass = pass && s.violation_rate() >= kContrastMinRate;
      detail += to_string(kind) + " " + fmtd("%.3f", s.violation_rate()) + " ";
    }
    return 0;
  });
  return {pass, "violation rate over " + std::to_string(kContrastEpisodes) + " held-out episodes: " + detail +
                    "(lambda 2, b 2, need >= " + fmtd("%.2f", kContrastMinRate) + ")"};
}

Verdict budget_equivalence() {
  CounterStream rng(0xb0d6e7);
  double worst = 0.0;
  long long checks = 0;
  for (int trial = 0; trial < kBudgetTrajectories; ++trial) {
    const int H = 1 + static_cast<int>(rng.below(24));
    oracle::ScratchConstants k;
    k.horizon = H;
    k.lc = rng.uniform(0.1, 4.0);
    k.lf = rng.uniform(0.0, 1.5);
    k.lprior = rng.uniform(0.0, 2.0);
    k.rho = rng.uniform(0.0, 1.0);
    k.eps = rng.uniform(0.0, 2.0);
    k.lambda = rng.uniform(0.0, 6.0);
    k.b = rng.uniform(0.0, 6.0);
    EnvParams p;
    p.horizon = H;
    p.state_bounds = {{0.0, 1.0}};
    p.action_bounds = {{0.0, 10.0}};
    p.lipschitz = {k.lc, k.lf, k.lprior};
    p.min_cost = k.eps;
    p.perturbation = Perturbation::geometric(k.rho, H);
    auto ledger = init_ledger({k.lambda, k.b}, make_sensitivity(p), p.min_cost);
    std::vector<double> costs, devs;
    for (int h = 1; h <= H; ++h) {
      const double ref = oracle::scratch_budget(k, costs, devs);
      worst = std::max(worst, std::abs(ledger.budget() - ref) / std::max(1.0, std::abs(ref)));
      ++checks;
      const double frac = rng.uniform() < 0.3 ? 1.0 : rng.uniform();
      const double d = rng.uniform() < 0.2 ? 0.0 : frac * ledger.radius();
      const double c = k.eps + rng.uniform(0.0, 5.0);
      ledger.update_budget(d, c);
      costs.push_back(c);
      devs.push_back(d);
    }
  }
  return {worst <= kBudgetRelTol, std::to_string(kBudgetTrajectories) + " trajectories, " + std::to_string(checks) +
                                      " rounds, worst relative gap " + fmtd("%.3g", worst)};
}

Verdict dp_correctness() {
  double worst_exact = 0.0, worst_sigma = 0.0;
  std::string detail;
  for (const auto& path : fixtures()) {
    const auto t = load_tiny(path);
    const TinyEnv env(t);
    const auto table = make_sensitivity(env.params());
    for (PlanMode mode : {PlanMode::acd, PlanMode::raw}) {
      const bool acd = mode == PlanMode::acd;
      const auto planner = std::make_shared<const ExactPlanner>(env, ExactPlanner::fixture_models(t), mode);
      const auto plan = planner->plan(t.truth);
      const double truth = oracle::exact_dp(t, acd);
      worst_exact = std::max({worst_exact, std::abs(planner->root(*plan) - truth),
                              std::abs(planner->policy_value(*plan, t.true_probabilities()) - truth)});
      const GreedyPolicy<ExactPlanner> greedy{planner.get(), plan, nullptr};
      double mean = 0.0, m2 = 0.0;
      for (int i = 0; i < kDpSamples; ++i) {
        const auto seq = ModelSequence::from_seed(derive_seed(0xd9, static_cast<std::uint64_t>(i)), t.horizon);
        const double v = play(env, seq, greedy, t.spec, table, acd).agent.total_reward();
        const double delta = v - mean;
        mean += delta / (i + 1);
        m2 += delta * (v - mean);
      }
      const double se = std::sqrt(m2 / (kDpSamples - 1) / kDpSamples);
      worst_sigma = std::max(worst_sigma, se > 0 ? std::abs(mean - truth) / se : (mean == truth ? 0.0 : 1e300));
    }
  }
  return {worst_exact <= kDpTol && worst_sigma <= kSigmas,
          "worst exact gap " + fmtd("%.3g", worst_exact) + " (tol " + fmtd("%.0e", kDpTol) +
              "), worst Monte-Carlo deviation " + fmtd("%.2f", worst_sigma) + " se over " +
              std::to_string(kDpSamples) + " episodes per fixture and mode"};
}

Verdict theorem_bound() {
  int fixtures_checked = 0, covered = 0;
  bool pass = true;
  std::string detail;
  for (const auto& path : fixtures()) {
    const auto c = oracle::theorem_bound(load_tiny(path));
    ++fixtures_checked;
    const bool ok = c.regret >= -kBoundTol && c.regret <= c.rhs + kBoundTol;
    const bool zero_ok = !c.budget_covers_eta || std::abs(c.regret) <= kBoundTol;
    covered += c.budget_covers_eta;
    pass = pass && ok && zero_ok;
    detail += fs::path(path).stem().string() + " " + fmtd("%.4g", c.regret) + "<=" + fmtd("%.4g", c.rhs) +
              (c.budget_covers_eta ? " (covered, gap 0)" : "") + "; ";
  }
  detail.resize(detail.size() - 2);
  return {pass && covered >= 1, std::to_string(fixtures_checked) + " fixtures: " + detail};
}

Verdict tradeoff_ordering() {
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<double> lambdas = {2.0, 6.0, 10.0};
  std::vector<std::vector<double>> regret(lambdas.size(), std::vector<double>(kTradeoffSeeds));
  const int window = kTradeoffEpisodes / 10;
  for (std::size_t l = 0; l < lambdas.size(); ++l) {
    auto j = desk_json("carbon");
    j["lambda"] = lambdas[l];
    j["reference_episodes"] = 100;
    const auto cfg = config_from_json(j);
    with_setup(cfg, [&](const auto& setup) {
      using S = std::decay_t<decltype(setup)>;
      using Env = typename S::EnvType;
      const Experiment<S> exp(setup, cfg);
      const auto table = make_sensitivity(setup.env().params());
      for (int s = 0; s < kTradeoffSeeds; ++s) {
        const std::uint64_t seed = static_cast<std::uint64_t>(s + 1);
        const auto star = exp.reference(seed, false);
        const typename Experiment<S>::Callback cb = [&](const auto&, const auto&, const EpisodeRecord<Env>& rec) {
          return star.play(setup.env(), setup.episode(rec.seed), cfg.spec, table).agent.total_reward() -
                 rec.total_reward();
        };
        const auto r = exp.train_kind(LearnerKind::acrl, derive_seed(seed, kTrainStream), kTradeoffEpisodes, cb);
        double tail = 0.0;
        for (int k = kTradeoffEpisodes - window; k < kTradeoffEpisodes; ++k) tail += r.episodes[k].pseudo_regret;
        regret[l][s] = tail / window;
      }
      return 0;
    });
  }
  bool pass = true;
  std::string detail;
  for (std::size_t l = 0; l < lambdas.size(); ++l) {
    double m = 0.0;
    for (double r : regret[l]) m += r / kTradeoffSeeds;
    detail += "lambda " + fmtd("%g", lambdas[l]) + " " + fmtd("%.3f", m) + "; ";
  }
  for (std::size_t l = 1; l < lambdas.size(); ++l) {
    double mean = 0.0, var = 0.0;
    std::vector<double> diff(kTradeoffSeeds);
    for (int s = 0; s < kTradeoffSeeds; ++s) mean += (diff[s] = regret[l][s] - regret[l - 1][s]) / kTradeoffSeeds;
    for (double d : diff) var += (d - mean) * (d - mean) / (kTradeoffSeeds - 1);
    const double se = std::sqrt(var / kTradeoffSeeds);
    pass = pass && mean <= se;
    detail += "step " + fmtd("%+.3f", mean) + " (se " + fmtd("%.3f", se) + "); ";
  }
  const double secs = seconds_since(t0);
  return {pass && secs < kTradeoffSeconds,
          "final-window regret, K " + std::to_string(kTradeoffEpisodes) + ", " + std::to_string(kTradeoffSeeds) +
              " seeds: " + detail + fmtd("%.1f s", secs)};
}

Verdict learning() {
  const auto t = load_tiny(std::string(ACMDP_FIXTURE_DIR) + "/learn.tiny");
  const TinyEnv env(t);
  const auto planner = std::make_shared<const ExactPlanner>(env, ExactPlanner::fixture_models(t), PlanMode::acd);
  const double best = planner->root(*planner->plan(t.truth));
  const auto truth = t.true_probabilities();
  const int decile = kLearningEpisodes / 10;
  int good = 0;
  std::string detail;
  for (int s = 1; s <= kLearningSeeds; ++s) {
    TrainOptions o;
    o.episodes = kLearningEpisodes;
    o.seed = static_cast<std::uint64_t>(s);
    const auto r = train<ExactPlanner>(
        [&](double) { return planner; }, [&](std::uint64_t seed) { return ModelSequence::from_seed(seed, t.horizon); },
        t.spec, o,
        [&](const ExactPlanner& p, const ExactPlan& plan, const EpisodeRecord<TinyEnv>&) {
          return best - p.policy_value(plan, truth);
        });
    double cumulative = 0.0, first = 0.0, last = 0.0;
    for (int k = 1; k <= kLearningEpisodes; ++k) {
      cumulative += r.episodes[k - 1].pseudo_regret;
      const double avg = cumulative / k;
      if (k <= decile) first += avg / decile;
      if (k > kLearningEpisodes - decile) last += avg / decile;
    }
    const bool ok = first > 0.0 && last <= (1.0 - kLearningDrop) * first;
    good += ok;
    detail += fmtd("%.4f", first) + "->" + fmtd("%.4f", last) + (ok ? "" : " (no)") + "; ";
  }
  detail.resize(detail.size() - 2);
  return {good >= kLearningMinSeeds,
          std::to_string(good) + "/" + std::to_string(kLearningSeeds) + " seeds drop by >= 50%: " + detail};
}

template <class Env>
LemmaReport lemma_sweep(const Env& env) {
  const TraceEpisodes ep(synth_trace(SynthKind::spiky, 24 * 60, 1, 2.0),
                         synth_trace(SynthKind::sinusoidal, 24 * 60, 2, 1.5), 24, 24, 0.2);
  const auto table = make_sensitivity(env.params());
  LemmaReport total;
  for (int i = 0; i < kLemmaRollouts; ++i) {
    const TanhNetPolicy<Env> net(env, static_cast<std::uint64_t>(i));
    const AdversarialPolicy<Env> adv{&env, static_cast<AdversaryMode>(i % 3)};
    const auto policy = [&](const Observation<Env>& o) { return i % 2 ? net(o) : adv(o); };
    RawController<Env, decltype(policy)> ctl{&env, policy};
    total.merge(check_lemmas(paired_rollout(env, ep.sequence(derive_seed(0x1e33a, i)), ctl, {0, 0}), env.params(),
                             *table));
  }
  return total;
}

Verdict lemma_invariants() {
  const auto c = lemma_sweep(CarbonSchedulingEnv{});
  const auto s = lemma_sweep(SustainableInferenceEnv{});
  const auto line = [](const char* name, const LemmaReport& r) {
    return std::string(name) + " " + std::to_string(r.rollouts) + " rollouts, " +
           std::to_string(r.state_exceptions + r.cost_exceptions) + " exceptions, worst ratios state " +
           fmtd("%.3f", r.worst_state_ratio) + " cost " + fmtd("%.3f", r.worst_cost_ratio);
  };
  return {c.passed() && s.passed() && c.rollouts == kLemmaRollouts && s.rollouts == kLemmaRollouts,
          line("carbon", c) + "; " + line("sustainable", s)};
}

Verdict reproducibility() {
  const auto root = fs::temp_directory_path() / ("acmdp-acceptance-" + std::to_string(::getpid()));
  fs::remove_all(root);
  auto tiny = Json{{"env", "tiny"},
                   {"fixture", std::string(ACMDP_FIXTURE_DIR) + "/learn.tiny"},
                   {"roster", {"acrl", "rl", "crl", "random+acd", "rl+acd", "prior"}},
                   {"episodes", 100},
                   {"reference_episodes", 50},
                   {"eval_episodes", 100},
                   {"seeds", "1..3"}};
  auto carbon = desk_json("carbon");
  carbon["roster"] = {"acrl", "crl", "random+acd"};
  carbon["eval_episodes"] = 50;
  carbon["episodes"] = 10;
  carbon["reference_episodes"] = 10;
  carbon["grid"] = {{"n_x", 12}, {"n_budget", 6}, {"n_prev", 3}, {"n_action", 9}, {"n_quadrature", 4}};
  int compared = 0, differing = 0;
  for (const auto& j : {tiny, carbon}) {
    const auto cfg = config_from_json(j);
    const auto a = run(cfg, root.string(), 1);
    const auto b = run(cfg, root.string(), 1);
    const auto c = run(cfg, root.string(), 3);
    for (const char* f : {"metrics.csv", "learning_curve.csv", "summary.csv"}) {
      const auto ref = read_file((fs::path(a.directory) / f).string());
      for (const auto& other : {b.directory, c.directory}) {
        ++compared;
        differing += read_file((fs::path(other) / f).string()) != ref;
      }
    }
  }
  fs::remove_all(root);
  return {compared == 12 && differing == 0, std::to_string(compared) + " CSV comparisons (repeat and 3 workers), " +
                                                std::to_string(differing) + " differ"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"anytime safety, exhaustive", exhaustive_safety},
      {"anytime safety, statistical", statistical_safety},
      {"violation contrast", violation_contrast},
      {"budget-update equivalence", budget_equivalence},
      {"DP correctness", dp_correctness},
      {"regret bound on fixtures", theorem_bound},
      {"trade-off ordering", tradeoff_ordering},
      {"learning", learning},
      {"perturbation lemma invariants", lemma_invariants},
      {"reproducibility", reproducibility},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int n = static_cast<int>(i + 1);
    if (!only.empty() && !only.count(n)) continue;
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    failed += !v.pass;
    std::printf("%s %2d %s: %s\n", v.pass ? "PASS" : "FAIL", n, criteria[i].first.c_str(), v.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
