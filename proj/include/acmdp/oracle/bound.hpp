#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <utility>
#include <vector>

#include "acmdp/oracle/exact_dp.hpp"
#include "acmdp/safety/acd.hpp"

namespace acmdp {

/// Regret bound of one ACD episode whose ML policy is the unconstrained optimum:
/// sum over rounds of L_Q(h) [eta - (lambda eps + b + [R_{h-1}]^+) / Gamma(h, h)]^+.
template <class Env>
double bound_eval(const EpisodeRecord<Env>& rec, const CompetitiveSpec& spec, double min_cost,
                  const SensitivityTable& table, const std::vector<double>& lq, double eta_hat) {
  double total = 0.0;
  for (std::size_t i = 0; i < rec.rounds.size(); ++i) {
    const int h = static_cast<int>(i + 1);
    const double gain = std::max(0.0, rec.rounds[i].residual);
    const double slack = (spec.lambda * min_cost + spec.b + gain) / table.gamma(h, h);
    total += lq.at(i) * std::max(0.0, eta_hat - slack);
  }
  return total;
}

namespace oracle {

struct TheoremCheck {
  double optimal_value = 0.0;      // unconstrained optimum over the grid
  double acd_optimal_value = 0.0;  // optimal ACD policy
  double regret = 0.0;
  double rhs = 0.0;
  double eta_hat = 0.0;
  std::vector<double> lq;
  bool budget_covers_eta = false;  // lambda eps + b >= Gamma(h, h) eta_hat for every h
};

/// Evaluates both sides of the regret bound by full enumeration on a fixture.
inline TheoremCheck theorem_bound(const TinyMDP& tiny, int dense_points = 21) {
  TheoremCheck out;
  const auto truth = tiny.true_probabilities();
  ExactDp star(tiny, truth, false);
  ExactDp best_acd(tiny, truth, true);
  out.optimal_value = star.value();
  out.acd_optimal_value = best_acd.value();
  out.regret = out.optimal_value - out.acd_optimal_value;

  const TinyEnv env(tiny);
  const auto table = make_sensitivity(env.params());
  const auto pi_star = [&](int h, double x) { return star.ml_action(Node{h, x, {}, {}}); };
  struct StarPolicy {
    decltype(pi_star)* f;
    TinyEnv::Action operator()(const Observation<TinyEnv>& o) const { return {(*f)(o.round, o.x[0])}; }
  };

  const auto seqs = enumerate_sequences(tiny, truth);
  std::vector<EpisodeRecord<TinyEnv>> records;
  std::set<std::pair<int, double>> visited;
  for (const auto& e : seqs) {
    records.push_back(acd_rollout(env, e.sequence, StarPolicy{&pi_star}, tiny.spec, table));
    for (std::size_t i = 0; i < records.back().rounds.size(); ++i)
      visited.emplace(static_cast<int>(i + 1), records.back().rounds[i].x[0]);
  }
  for (const auto& [h, x] : visited) out.eta_hat = std::max(out.eta_hat, std::abs(pi_star(h, x) - tiny.prior(x)));

  out.lq.assign(static_cast<std::size_t>(tiny.horizon), 0.0);
  std::map<std::pair<int, double>, std::set<double>> executed;
  for (std::size_t s = 0; s < records.size(); ++s)
    for (std::size_t i = 0; i < records[s].rounds.size(); ++i)
      executed[{static_cast<int>(i + 1), records[s].rounds[i].x[0]}].insert(records[s].rounds[i].action[0]);
  for (const auto& [h, x] : visited) {
    std::vector<double> actions;
    for (int i = 0; i < dense_points; ++i)
      actions.push_back(tiny.action_box.lo + tiny.action_box.span() * i / std::max(1, dense_points - 1));
    actions.push_back(pi_star(h, x));
    for (double a : executed.at({h, x})) actions.push_back(a);
    std::vector<double> q;
    for (double a : actions) q.push_back(star.q_executed(Node{h, x, {}, {}}, a));
    double& l = out.lq[static_cast<std::size_t>(h - 1)];
    for (std::size_t i = 0; i < actions.size(); ++i)
      for (std::size_t j = i + 1; j < actions.size(); ++j)
        if (actions[i] != actions[j]) l = std::max(l, std::abs(q[i] - q[j]) / std::abs(actions[i] - actions[j]));
  }

  const double eps = env.params().min_cost;
  for (std::size_t s = 0; s < records.size(); ++s)
    out.rhs += seqs[s].probability * bound_eval(records[s], tiny.spec, eps, *table, out.lq, out.eta_hat);
  out.budget_covers_eta = true;
  for (int h = 1; h <= tiny.horizon; ++h)
    if (tiny.spec.lambda * eps + tiny.spec.b < table->gamma(h, h) * out.eta_hat) out.budget_covers_eta = false;
  return out;
}

}  // namespace oracle
}  // namespace acmdp
