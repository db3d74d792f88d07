#pragma once

#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

#include "acmdp/core/environment.hpp"

namespace acmdp {

class SafetyLedger;

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

template <class Env>
struct Observation {
  int round = 1;
  typename Env::State x{};
  typename Env::Action prev{};
  Exogenous inputs{};
  typename Env::Action prior{};
  const SafetyLedger* ledger = nullptr;
};

template <class Action>
struct Decision {
  Action action{};
  Action ml_action{};
  double budget = kNaN;
  double residual = kNaN;
};

template <class State, class Action>
struct RoundRecord {
  State x{};
  Action action{};
  Action ml_action{};
  Action prior_action{};
  double deviation = 0.0;
  double cost = 0.0;
  double reward = 0.0;
  double budget = kNaN;
  double residual = kNaN;
  double cumulative_cost = 0.0;
  double prior_cumulative_cost = kNaN;
  double slack = kNaN;
};

template <class Env>
struct EpisodeRecord {
  using Row = RoundRecord<typename Env::State, typename Env::Action>;
  std::uint64_t seed = 0;
  std::vector<Row> rounds;
  typename Env::State final_state{};

  double total_reward() const {
    double s = 0.0;
    for (const auto& r : rounds) s += r.reward;
    return s;
  }
  double total_cost() const { return rounds.empty() ? 0.0 : rounds.back().cumulative_cost; }
};

template <class C, class Env>
concept Controller = requires(C& c, const ModelSequence& seq, const Observation<Env>& obs, int h, double v) {
  c.begin(seq);
  { c.decide(obs) } -> std::same_as<Decision<typename Env::Action>>;
  c.observe(h, v, v);
};

/// Plays the prior at every round.
template <class Env>
struct PriorController {
  void begin(const ModelSequence&) {}
  Decision<typename Env::Action> decide(const Observation<Env>& obs) { return {obs.prior, obs.prior}; }
  void observe(int, double, double) {}
};

/// Plays a policy's action clipped to the action box, without any projection.
template <class Env, class Policy>
struct RawController {
  const Env* env;
  Policy policy;

  void begin(const ModelSequence&) {}
  Decision<typename Env::Action> decide(const Observation<Env>& obs) {
    const auto ml = policy(obs);
    return {env->action_box().clamp(ml), ml};
  }
  void observe(int, double, double) {}
};

template <Environment Env, class Ctl>
  requires Controller<Ctl, Env>
EpisodeRecord<Env> rollout(const Env& env, const ModelSequence& seq, Ctl& ctl) {
  const int H = env.params().horizon;
  if (seq.horizon() < H) throw HorizonError("model sequence shorter than horizon");
  EpisodeRecord<Env> rec;
  rec.seed = seq.seed();
  rec.rounds.reserve(static_cast<std::size_t>(H));
  auto x = env.initial_state(seq);
  auto prev = env.initial_action();
  ctl.begin(seq);
  double cumulative = 0.0;
  for (int h = 1; h <= H; ++h) {
    Observation<Env> obs;
    obs.round = h;
    obs.x = x;
    obs.prev = prev;
    obs.inputs = seq.inputs(h);
    obs.prior = env.prior_action(h, x, obs.inputs);
    const auto dec = ctl.decide(obs);
    const auto t = env_step(env, seq, h, x, dec.action, prev);
    const double d = distance(dec.action, obs.prior);
    ctl.observe(h, t.cost, d);
    cumulative += t.cost;
    typename EpisodeRecord<Env>::Row row;
    row.x = x;
    row.action = dec.action;
    row.ml_action = dec.ml_action;
    row.prior_action = obs.prior;
    row.deviation = d;
    row.cost = t.cost;
    row.reward = t.reward;
    row.budget = dec.budget;
    row.residual = dec.residual;
    row.cumulative_cost = cumulative;
    rec.rounds.push_back(row);
    x = t.next;
    prev = dec.action;
  }
  rec.final_state = x;
  return rec;
}

template <class Env>
struct PairedEpisode {
  EpisodeRecord<Env> agent;
  EpisodeRecord<Env> prior;
};

/// Fills J-dagger and slack of the agent record from a prior record on the same sequence.
template <class Env>
void attach_prior(EpisodeRecord<Env>& agent, const EpisodeRecord<Env>& prior, const CompetitiveSpec& spec) {
  if (agent.seed != prior.seed || agent.rounds.size() != prior.rounds.size())
    throw PairingError("records do not come from the same model sequence");
  for (std::size_t i = 0; i < agent.rounds.size(); ++i) {
    auto& r = agent.rounds[i];
    r.prior_cumulative_cost = prior.rounds[i].cumulative_cost;
    r.slack = (1.0 + spec.lambda) * r.prior_cumulative_cost + static_cast<double>(i + 1) * spec.b - r.cumulative_cost;
  }
}

/// Runs the agent and the prior on the same realized sequence.
template <Environment Env, class Ctl>
  requires Controller<Ctl, Env>
PairedEpisode<Env> paired_rollout(const Env& env, const ModelSequence& seq, Ctl& ctl, const CompetitiveSpec& spec) {
  PriorController<Env> prior_ctl;
  PairedEpisode<Env> out{rollout(env, seq, ctl), rollout(env, seq, prior_ctl)};
  attach_prior(out.agent, out.prior, spec);
  attach_prior(out.prior, out.prior, spec);
  return out;
}

}  // namespace acmdp
