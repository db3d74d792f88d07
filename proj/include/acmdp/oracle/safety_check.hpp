#pragma once

#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "acmdp/oracle/exact_dp.hpp"
#include "acmdp/safety/acd.hpp"

namespace acmdp::oracle {

struct SafetyReport {
  std::string fixture;
  bool projection = true;
  long long sequences = 0;
  long long violations = 0;
  long long oracle_violations = 0;
  long long disagreements = 0;
  double min_slack = std::numeric_limits<double>::infinity();
  std::string counterexample;

  bool passed() const { return violations == 0 && oracle_violations == 0 && disagreements == 0; }
};

/// Replays a fixed sequence of ML actions regardless of the state.
struct OpenLoopPolicy {
  const std::vector<double>* actions;
  TinyEnv::Action operator()(const Observation<TinyEnv>& obs) const {
    return {(*actions)[static_cast<std::size_t>(obs.round - 1)]};
  }
};

namespace detail {
struct OracleTrace {
  std::vector<double> actions;
  std::vector<double> cumulative;
};

/// Independent simulation of the fixture with the scratch budget and scalar projection.
inline OracleTrace oracle_run(const TinyMDP& t, const ScratchConstants& k, const std::vector<std::size_t>& fs,
                              const std::vector<double>* ml, bool projection) {
  OracleTrace out;
  double x = t.initial_state;
  double J = 0.0;
  std::vector<double> costs, devs;
  for (int h = 1; h <= t.horizon; ++h) {
    const double prior = t.prior(x);
    double a = prior;
    if (ml) {
      a = (*ml)[static_cast<std::size_t>(h - 1)];
      if (projection) {
        const double g = k.gamma(h, h);
        const double budget = scratch_budget(k, costs, devs);
        a = scratch_project(a, prior, g > 0.0 ? std::max(0.0, budget) / g : std::numeric_limits<double>::infinity(),
                            t.action_box);
      }
    }
    const double c = t.cost(x, a);
    J += c;
    costs.push_back(c);
    devs.push_back(std::abs(a - prior));
    out.actions.push_back(a);
    out.cumulative.push_back(J);
    x = t.step(fs[static_cast<std::size_t>(h - 1)], x, a);
  }
  return out;
}

inline std::string describe(const std::vector<std::size_t>& fs, const std::vector<double>& ml, int round) {
  std::ostringstream s;
  s << describe_functions(fs) << " ml=[";
  for (std::size_t i = 0; i < ml.size(); ++i) s << (i ? "," : "") << ml[i];
  s << "] round=" << round;
  return s.str();
}
}  // namespace detail

/// Runs ACD for every model sequence and every open-loop sequence of grid actions, checking the
/// anytime constraint through both the production path and the independent scratch path.
inline SafetyReport exhaustive_safety_check(const TinyMDP& tiny, std::optional<bool> projection_override = {}) {
  SafetyReport rep;
  rep.fixture = tiny.name;
  rep.projection = projection_override.value_or(tiny.projection);
  const TinyEnv env(tiny);
  const auto table = make_sensitivity(env.params());
  const ScratchConstants k = ScratchConstants::from(tiny);
  const auto& spec = tiny.spec;
  const std::size_t A = tiny.ml_grid.size();
  const auto H = static_cast<std::size_t>(tiny.horizon);
  std::size_t total = 1;
  for (std::size_t i = 0; i < H; ++i) total *= A;
  std::vector<double> ml(H);
  for (const auto& e : enumerate_sequences(tiny, tiny.true_probabilities())) {
    PriorController<TinyEnv> prior_ctl;
    const auto prior_rec = rollout(env, e.sequence, prior_ctl);
    const auto oracle_prior = detail::oracle_run(tiny, k, e.functions, nullptr, false);
    for (std::size_t idx = 0; idx < total; ++idx) {
      std::size_t rest = idx;
      for (std::size_t h = 0; h < H; ++h) {
        ml[h] = tiny.ml_grid[rest % A];
        rest /= A;
      }
      ++rep.sequences;
      EpisodeRecord<TinyEnv> rec;
      if (rep.projection) {
        AcdController<TinyEnv, OpenLoopPolicy> ctl(env, OpenLoopPolicy{&ml}, spec, table);
        rec = rollout(env, e.sequence, ctl);
      } else {
        RawController<TinyEnv, OpenLoopPolicy> ctl{&env, OpenLoopPolicy{&ml}};
        rec = rollout(env, e.sequence, ctl);
      }
      const auto check = anytime_check(rec, prior_rec, spec);
      rep.min_slack = std::min(rep.min_slack, check.worst_slack);
      if (!check.satisfied) {
        ++rep.violations;
        if (rep.counterexample.empty())
          rep.counterexample = detail::describe(e.functions, ml, check.first_violation_round.value_or(0));
      }
      const auto mine = detail::oracle_run(tiny, k, e.functions, &ml, rep.projection);
      for (std::size_t h = 0; h < H; ++h) {
        const double bound = (1.0 + spec.lambda) * oracle_prior.cumulative[h] + static_cast<double>(h + 1) * spec.b;
        if (mine.cumulative[h] > bound + 1e-9 * std::max(1.0, bound)) {
          ++rep.oracle_violations;
          if (rep.counterexample.empty())
            rep.counterexample = detail::describe(e.functions, ml, static_cast<int>(h + 1));
          break;
        }
      }
      for (std::size_t h = 0; h < H; ++h)
        if (std::abs(mine.actions[h] - rec.rounds[h].action[0]) > 1e-9) {
          ++rep.disagreements;
          break;
        }
    }
  }
  return rep;
}

}  // namespace acmdp::oracle
