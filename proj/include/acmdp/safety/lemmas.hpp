#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "acmdp/core/rollout.hpp"
#include "acmdp/safety/sensitivity.hpp"

namespace acmdp {

/// Tallies of the state-perturbation and cost-gap inequalities over paired rollouts.
struct LemmaReport {
  long long rollouts = 0;
  long long rounds = 0;
  long long state_exceptions = 0;
  long long cost_exceptions = 0;
  double worst_state_ratio = 0.0;  // max observed gap / bound over rounds with a positive bound
  double worst_cost_ratio = 0.0;
  std::string first_exception;

  bool passed() const { return state_exceptions == 0 && cost_exceptions == 0; }
  void merge(const LemmaReport& o) {
    rollouts += o.rollouts;
    rounds += o.rounds;
    state_exceptions += o.state_exceptions;
    cost_exceptions += o.cost_exceptions;
    worst_state_ratio = std::max(worst_state_ratio, o.worst_state_ratio);
    worst_cost_ratio = std::max(worst_cost_ratio, o.worst_cost_ratio);
    if (first_exception.empty()) first_exception = o.first_exception;
  }
};

/// Relative rounding allowance for the lemma comparisons.
inline constexpr double kLemmaTolerance = 1e-12;

/// Checks, on one paired episode, that
///   |x_h - x-dagger_h| <= L_f sum_{i<h} p(h-1-i) d_i   and   |c_h - c-dagger_h| <= sum_{j<=h} q(j, h) d_j,
/// where d_i is the agent's deviation from the prior evaluated at its own state.
template <class Env>
LemmaReport check_lemmas(const PairedEpisode<Env>& pair, const EnvParams& params, const SensitivityTable& table) {
  LemmaReport r;
  r.rollouts = 1;
  const auto& a = pair.agent.rounds;
  const auto& p = pair.prior.rounds;
  if (a.size() != p.size() || pair.agent.seed != pair.prior.seed)
    throw PairingError("records do not come from the same model sequence");
  const double Lf = params.lipschitz.transition;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const int h = static_cast<int>(k + 1);
    ++r.rounds;
    double state_bound = 0.0;
    for (int i = 1; i < h; ++i)
      state_bound += Lf * params.perturbation(h - 1 - i) * a[static_cast<std::size_t>(i - 1)].deviation;
    double cost_bound = 0.0;
    for (int j = 1; j <= h; ++j) cost_bound += table.q(j, h) * a[static_cast<std::size_t>(j - 1)].deviation;
    const double dx = distance(a[k].x, p[k].x);
    const double dc = std::abs(a[k].cost - p[k].cost);
    if (state_bound > 0.0) r.worst_state_ratio = std::max(r.worst_state_ratio, dx / state_bound);
    if (cost_bound > 0.0) r.worst_cost_ratio = std::max(r.worst_cost_ratio, dc / cost_bound);
    const bool state_bad = dx > state_bound + kLemmaTolerance * std::max(1.0, state_bound);
    const bool cost_bad = dc > cost_bound + kLemmaTolerance * std::max(1.0, cost_bound);
    r.state_exceptions += state_bad;
    r.cost_exceptions += cost_bad;
    if ((state_bad || cost_bad) && r.first_exception.empty())
      r.first_exception = "seed " + std::to_string(pair.agent.seed) + " round " + std::to_string(h) +
                          (state_bad ? " state gap " + std::to_string(dx) + " > " + std::to_string(state_bound)
                                     : " cost gap " + std::to_string(dc) + " > " + std::to_string(cost_bound));
  }
  return r;
}

}  // namespace acmdp
