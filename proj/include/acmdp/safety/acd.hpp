#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>

#include "acmdp/core/rollout.hpp"
#include "acmdp/safety/projection.hpp"

namespace acmdp {

/// Queries an ML policy, projects its action into the safe set, and keeps the ledger.
template <class Env, class Policy>
class AcdController {
 public:
  AcdController(const Env& env, Policy policy, CompetitiveSpec spec, std::shared_ptr<const SensitivityTable> table)
      : env_(&env), policy_(std::move(policy)), spec_(spec), table_(std::move(table)) {}

  void begin(const ModelSequence&) { ledger_.emplace(spec_, table_, env_->params().min_cost); }

  Decision<typename Env::Action> decide(const Observation<Env>& obs) {
    Observation<Env> with_ledger = obs;
    with_ledger.ledger = &*ledger_;
    const auto ml = policy_(with_ledger);
    Decision<typename Env::Action> d;
    d.ml_action = ml;
    d.action = project(*ledger_, ml, obs.prior, env_->action_box());
    d.budget = ledger_->budget();
    d.residual = ledger_->residual();
    return d;
  }

  void observe(int, double cost, double deviation) { ledger_->update_budget(deviation, cost); }

  const SafetyLedger& ledger() const { return *ledger_; }
  Policy& policy() { return policy_; }

 private:
  const Env* env_;
  Policy policy_;
  CompetitiveSpec spec_;
  std::shared_ptr<const SensitivityTable> table_;
  std::optional<SafetyLedger> ledger_;
};

template <Environment Env, class Policy>
EpisodeRecord<Env> acd_rollout(const Env& env, const ModelSequence& seq, Policy policy, const CompetitiveSpec& spec,
                               std::shared_ptr<const SensitivityTable> table) {
  AcdController<Env, Policy> ctl(env, std::move(policy), spec, std::move(table));
  return rollout(env, seq, ctl);
}

template <Environment Env, class Policy>
PairedEpisode<Env> acd_paired_rollout(const Env& env, const ModelSequence& seq, Policy policy,
                                      const CompetitiveSpec& spec, std::shared_ptr<const SensitivityTable> table) {
  AcdController<Env, Policy> ctl(env, std::move(policy), spec, std::move(table));
  return paired_rollout(env, seq, ctl, spec);
}

struct AnytimeResult {
  bool satisfied = true;
  double worst_slack = std::numeric_limits<double>::infinity();
  std::optional<int> first_violation_round;
  double max_violation_ratio = 0.0;
};

/// Relative slack granted to rounding when comparing cumulative sums against the bound.
inline constexpr double kAnytimeRoundingTolerance = 1e-12;

/// Checks J_h <= (1 + lambda) J-dagger_h + h b at every round, up to rounding of the sums.
template <class Env>
AnytimeResult anytime_check(const EpisodeRecord<Env>& agent, const EpisodeRecord<Env>& prior,
                            const CompetitiveSpec& spec) {
  if (agent.seed != prior.seed || agent.rounds.size() != prior.rounds.size())
    throw PairingError("records do not come from the same model sequence");
  AnytimeResult out;
  for (std::size_t i = 0; i < agent.rounds.size(); ++i) {
    const double J = agent.rounds[i].cumulative_cost;
    const double bound = (1.0 + spec.lambda) * prior.rounds[i].cumulative_cost + static_cast<double>(i + 1) * spec.b;
    const double slack = bound - J;
    out.worst_slack = std::min(out.worst_slack, slack);
    double ratio = 0.0;
    if (bound > 0.0)
      ratio = J / bound;
    else if (J > 0.0)
      ratio = std::numeric_limits<double>::infinity();
    const bool violated = J > bound + kAnytimeRoundingTolerance * std::max(1.0, std::abs(bound));
    if (violated) ratio = std::max(ratio, std::nextafter(1.0, 2.0));
    else ratio = std::min(ratio, 1.0);
    out.max_violation_ratio = std::max(out.max_violation_ratio, ratio);
    if (violated && out.satisfied) {
      out.satisfied = false;
      out.first_violation_round = static_cast<int>(i + 1);
    }
  }
  return out;
}

}  // namespace acmdp
