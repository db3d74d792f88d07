#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "acmdp/learner/model_class.hpp"
#include "acmdp/safety/acd.hpp"

namespace acmdp {

/// Greedy ML policy of a plan; optionally records the planner state seen at each round.
template <class Planner>
struct GreedyPolicy {
  using Env = typename Planner::EnvType;
  const Planner* planner = nullptr;
  std::shared_ptr<const typename Planner::Plan> plan;
  std::vector<typename Planner::State>* states = nullptr;

  typename Env::Action operator()(const Observation<Env>& obs) const {
    const auto s = planner->observe(obs);
    if (states) states->push_back(s);
    return {planner->greedy(*plan, s, obs.inputs)};
  }
};

/// Runs a policy with ACD or raw, returning the episode paired with the prior.
template <class Env, class Policy>
PairedEpisode<Env> play(const Env& env, const ModelSequence& seq, Policy policy, const CompetitiveSpec& spec,
                        const std::shared_ptr<const SensitivityTable>& table, bool projection) {
  if (projection) return acd_paired_rollout(env, seq, std::move(policy), spec, table);
  RawController<Env, Policy> ctl{&env, std::move(policy)};
  return paired_rollout(env, seq, ctl, spec);
}

enum class LearnerKind { acrl, rl, crl };

inline std::string to_string(LearnerKind k) {
  switch (k) {
    case LearnerKind::acrl:
      return "acrl";
    case LearnerKind::rl:
      return "rl";
    case LearnerKind::crl:
      return "crl";
  }
  return "?";
}

inline LearnerKind parse_learner_kind(const std::string& s) {
  if (s == "acrl") return LearnerKind::acrl;
  if (s == "rl") return LearnerKind::rl;
  if (s == "crl") return LearnerKind::crl;
  throw ConfigError("unknown learner '" + s + "'");
}

struct TrainOptions {
  LearnerKind kind = LearnerKind::acrl;
  int episodes = 100;
  std::uint64_t seed = 1;
  BetaSchedule beta{};
  bool optimistic = true;
  double cost_budget = std::numeric_limits<double>::infinity();  // expected episode cost limit for crl
  double dual_step = 0.01;
  int dual_window = 25;
  double initial_multiplier = 0.0;
  std::optional<std::size_t> reference_model;  // logged for membership in each episode's set

  void validate() const {
    if (episodes < 1) throw ConfigError("episodes must be positive");
    if (dual_window < 1) throw ConfigError("dual window must be positive");
    if (!(dual_step >= 0.0) || !(initial_multiplier >= 0.0)) throw ConfigError("dual parameters must be nonnegative");
  }
};

struct EpisodeLog {
  int episode = 0;
  std::uint64_t seed = 0;
  double total_reward = 0.0;
  double total_cost = 0.0;
  bool violated = false;
  double worst_slack = 0.0;
  std::size_t selected = 0;
  std::size_t fitted = 0;
  std::size_t set_size = 0;
  double optimistic_value = 0.0;
  double multiplier = 0.0;
  double pseudo_regret = kNaN;
  bool reference_in_set = false;
};

template <class Planner>
struct TrainResult {
  std::vector<EpisodeLog> episodes;
  std::vector<double> losses;
  std::vector<std::size_t> confidence_set;
  std::size_t selected = 0;
  double multiplier = 0.0;
  std::shared_ptr<const Planner> planner;
  std::shared_ptr<const typename Planner::Plan> plan;
};

/// Model-based learning over the ACD-augmented MDP (acrl), its unprojected counterpart (rl),
/// and the Lagrangian variant penalizing expected cost (crl).
///
/// make_planner(penalty) builds a planner for the given cost multiplier; episodes(seed) yields the
/// model sequence of an episode; regret(plan, planner, record) optionally scores each episode.
template <class Planner>
TrainResult<Planner> train(
    const std::function<std::shared_ptr<const Planner>(double)>& make_planner,
    const std::function<ModelSequence(std::uint64_t)>& episodes, const CompetitiveSpec& spec, const TrainOptions& opt,
    const std::function<double(const Planner&, const typename Planner::Plan&,
                               const EpisodeRecord<typename Planner::EnvType>&)>& regret = {}) {
  using Env = typename Planner::EnvType;
  opt.validate();
  double nu = opt.kind == LearnerKind::crl ? opt.initial_multiplier : 0.0;
  std::shared_ptr<const Planner> planner = make_planner(nu);
  const Env& env = planner->env();
  const auto table = make_sensitivity(env.params());
  const bool projection = opt.kind == LearnerKind::acrl;
  const std::size_t M = planner->model_count();
  ConfidenceTracker tracker(M);
  TrainResult<Planner> out;
  double window_cost = 0.0;
  int window_n = 0;

  for (int k = 1; k <= opt.episodes; ++k) {
    const std::uint64_t seed = derive_seed(opt.seed, static_cast<std::uint64_t>(k));
    const ModelSequence seq = episodes(seed);
    std::vector<std::size_t> candidates;
    if (k == 1) {
      for (std::size_t m = 0; m < M; ++m) candidates.push_back(m);
    } else {
      candidates = tracker.confidence_set(opt.beta(k));
    }
    EpisodeLog log;
    log.episode = k;
    log.seed = seed;
    log.fitted = tracker.fit();
    log.set_size = candidates.size();
    if (opt.reference_model)
      log.reference_in_set = std::find(candidates.begin(), candidates.end(), *opt.reference_model) != candidates.end();
    log.multiplier = nu;
    std::size_t chosen = log.fitted;
    double best = -std::numeric_limits<double>::infinity();
    if (opt.optimistic) {
      for (std::size_t m : candidates) {
        const double v = planner->root(*planner->plan(m));
        if (v > best) {
          best = v;
          chosen = m;
        }
      }
    } else {
      best = planner->root(*planner->plan(chosen));
    }
    log.selected = chosen;
    log.optimistic_value = best;
    const auto plan = planner->plan(chosen);

    std::vector<typename Planner::State> states;
    GreedyPolicy<Planner> policy{planner.get(), plan, &states};
    const auto pair = play(env, seq, policy, spec, table, projection);
    const auto check = anytime_check(pair.agent, pair.prior, spec);
    log.violated = !check.satisfied;
    log.worst_slack = check.worst_slack;
    log.total_reward = pair.agent.total_reward();
    log.total_cost = pair.agent.total_cost();
    if (regret) log.pseudo_regret = regret(*planner, *plan, pair.agent);

    const auto& rows = pair.agent.rounds;
    std::vector<double> preds(M);
    for (std::size_t i = 0; i + 1 < rows.size(); ++i) {
      const int h = static_cast<int>(i + 1);
      const auto& in = seq.inputs(h);
      const double a = rows[i].action[0];
      for (std::size_t m = 0; m < M; ++m) preds[m] = planner->predict(*plan, m, states[i], a, in);
      const auto next = planner->advance(states[i], a, rows[i].cost, rows[i + 1].x[0], in);
      tracker.add(preds, planner->value(*plan, next));
    }
    out.episodes.push_back(log);

    if (opt.kind == LearnerKind::crl) {
      window_cost += log.total_cost;
      if (++window_n == opt.dual_window) {
        const double gap = window_cost / window_n - opt.cost_budget;
        const double updated = std::max(0.0, nu + opt.dual_step * gap);
        window_cost = 0.0;
        window_n = 0;
        if (updated != nu) {
          nu = updated;
          planner = make_planner(nu);
        }
      }
    }
  }

  out.losses = tracker.losses();
  out.confidence_set = tracker.confidence_set(opt.beta(opt.episodes + 1));
  double best = -std::numeric_limits<double>::infinity();
  out.selected = tracker.fit();
  if (opt.optimistic)
    for (std::size_t m : out.confidence_set) {
      const double v = planner->root(*planner->plan(m));
      if (v > best) {
        best = v;
        out.selected = m;
      }
    }
  out.multiplier = nu;
  out.planner = planner;
  out.plan = planner->plan(out.selected);
  return out;
}

/// ML policy with fixed random tanh-network weights over (x, h / H, inputs).
template <class Env>
struct TanhNetPolicy {
  static constexpr int kHidden = 8;
  const Env* env = nullptr;
  std::vector<double> w1, b1, w2;
  double b2 = 0.0;
  double input_scale = 1.0;

  TanhNetPolicy(const Env& e, std::uint64_t seed, double scale = 2.0) : env(&e) {
    CounterStream rng(seed);
    const auto gen = [&] { return scale * (2.0 * rng.uniform() - 1.0); };
    for (int i = 0; i < kHidden * 5; ++i) w1.push_back(gen());
    for (int i = 0; i < kHidden; ++i) b1.push_back(gen());
    for (int i = 0; i < kHidden; ++i) w2.push_back(gen());
    b2 = gen();
  }

  typename Env::Action operator()(const Observation<Env>& obs) const {
    const auto sb = env->state_box().dims[0];
    const auto ab = env->action_box().dims[0];
    const double f[5] = {(obs.x[0] - sb.lo) / std::max(1e-12, sb.span()),
                         static_cast<double>(obs.round) / env->params().horizon, obs.inputs[0] / 4.0,
                         obs.inputs[1] / 4.0, 1.0};
    double out = b2;
    for (int j = 0; j < kHidden; ++j) {
      double z = b1[static_cast<std::size_t>(j)];
      for (int i = 0; i < 5; ++i) z += w1[static_cast<std::size_t>(j * 5 + i)] * f[i];
      out += w2[static_cast<std::size_t>(j)] * std::tanh(z);
    }
    return {ab.lo + ab.span() * 0.5 * (1.0 + std::tanh(out))};
  }
};

enum class AdversaryMode { low, high, far };

/// ML policy at a corner of the action box: always low, always high, or the corner farthest from the prior.
template <class Env>
struct AdversarialPolicy {
  const Env* env = nullptr;
  AdversaryMode mode = AdversaryMode::far;

  typename Env::Action operator()(const Observation<Env>& obs) const {
    const auto ab = env->action_box().dims[0];
    switch (mode) {
      case AdversaryMode::low:
        return {ab.lo};
      case AdversaryMode::high:
        return {ab.hi};
      case AdversaryMode::far:
        break;
    }
    return {obs.prior[0] - ab.lo >= ab.hi - obs.prior[0] ? ab.lo : ab.hi};
  }
};

struct EvaluationSummary {
  long long episodes = 0;
  long long violations = 0;
  double mean_reward = 0.0;
  double mean_cost = 0.0;
  double worst_slack = std::numeric_limits<double>::infinity();
  double violation_rate() const { return episodes ? static_cast<double>(violations) / episodes : 0.0; }
};

/// Plays a frozen policy on the given seeds and tallies anytime violations.
template <class Env, class Policy>
EvaluationSummary evaluate(const Env& env, const std::function<ModelSequence(std::uint64_t)>& episodes,
                           const std::vector<std::uint64_t>& seeds, const Policy& policy, const CompetitiveSpec& spec,
                           bool projection) {
  const auto table = make_sensitivity(env.params());
  EvaluationSummary s;
  for (std::uint64_t seed : seeds) {
    const auto pair = play(env, episodes(seed), policy, spec, table, projection);
    const auto check = anytime_check(pair.agent, pair.prior, spec);
    ++s.episodes;
    if (!check.satisfied) ++s.violations;
    s.worst_slack = std::min(s.worst_slack, check.worst_slack);
    s.mean_reward += (pair.agent.total_reward() - s.mean_reward) / static_cast<double>(s.episodes);
    s.mean_cost += (pair.agent.total_cost() - s.mean_cost) / static_cast<double>(s.episodes);
  }
  return s;
}

}  // namespace acmdp
