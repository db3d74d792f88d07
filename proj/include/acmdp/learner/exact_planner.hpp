#pragma once

#include <cstring>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "acmdp/learner/grid_planner.hpp"
#include "acmdp/oracle/tiny_mdp.hpp"
#include "acmdp/safety/projection.hpp"

namespace acmdp {

/// Value function of one model on a tiny fixture, filled lazily by memoized recursion.
struct ExactPlan {
  std::size_t model = 0;
  double penalty = 0.0;
  std::vector<double> probabilities;
  mutable std::map<std::string, double> memo;
  mutable std::mutex memo_mu;
};

/// Planner for enumerable fixtures whose augmented state carries the full safety ledger,
/// so expectations and budgets are exact.
class ExactPlanner {
 public:
  using EnvType = TinyEnv;
  using Plan = ExactPlan;
  using Model = std::vector<double>;

  struct State {
    int round = 1;
    double x = 0.0;
    std::optional<SafetyLedger> ledger;
  };

  ExactPlanner(const TinyEnv& env, std::vector<Model> models, PlanMode mode, double penalty = 0.0)
      : env_(&env),
        tiny_(&env.tiny()),
        models_(std::move(models)),
        mode_(mode),
        penalty_(penalty),
        table_(make_sensitivity(env.params())) {
    if (models_.empty()) throw ConfigError("planner needs at least one model");
    for (const auto& m : models_)
      if (m.size() != tiny_->functions.size()) throw ConfigError("model width differs from the fixture");
  }

  /// One model per probability vector declared in the fixture.
  static std::vector<Model> fixture_models(const TinyMDP& t) {
    std::vector<Model> out;
    for (std::size_t m = 0; m < t.models.size(); ++m) out.push_back(t.probabilities(m));
    return out;
  }

  const TinyEnv& env() const { return *env_; }
  std::size_t model_count() const { return models_.size(); }
  const std::vector<Model>& models() const { return models_; }
  PlanMode mode() const { return mode_; }
  const std::vector<double>& action_grid() const { return tiny_->ml_grid; }

  std::shared_ptr<const Plan> plan(std::size_t m) const {
    std::lock_guard<std::mutex> lock(mu_);
    if (auto it = cache_.find(m); it != cache_.end()) return it->second;
    if (m >= models_.size()) throw ConfigError("model index outside the class");
    auto p = std::make_shared<Plan>();
    p->model = m;
    p->penalty = penalty_;
    p->probabilities = models_[m];
    cache_.emplace(m, p);
    return p;
  }

  State initial() const {
    State s{1, tiny_->initial_state, {}};
    if (mode_ == PlanMode::acd) s.ledger.emplace(tiny_->spec, table_, env_->params().min_cost);
    return s;
  }

  State observe(const Observation<TinyEnv>& obs) const {
    State s{obs.round, obs.x[0], {}};
    if (mode_ == PlanMode::acd) {
      if (!obs.ledger) throw ConfigError("exact planner in ACD mode needs the ledger");
      s.ledger = *obs.ledger;
    }
    return s;
  }

  State advance(const State& s, double a, double cost, double x_next, const Exogenous& = {}) const {
    State n{s.round + 1, x_next, s.ledger};
    if (n.ledger) n.ledger->update_budget(std::abs(a - tiny_->prior(s.x)), cost);
    return n;
  }

  double execute(const State& s, double ml) const {
    if (!s.ledger) return ml;
    const double prior = tiny_->prior(s.x);
    return project(*s.ledger, Vec<1>{ml}, Vec<1>{prior}, env_->action_box())[0];
  }

  double value(const Plan& p, const State& s) const {
    if (s.round > tiny_->horizon) return 0.0;
    const auto key = encode(s);
    {
      std::lock_guard<std::mutex> lock(p.memo_mu);
      if (auto it = p.memo.find(key); it != p.memo.end()) return it->second;
    }
    double best = -std::numeric_limits<double>::infinity();
    for (double ml : tiny_->ml_grid) best = std::max(best, q_value(p, s, ml));
    std::lock_guard<std::mutex> lock(p.memo_mu);
    p.memo.emplace(key, best);
    return best;
  }

  double root(const Plan& p) const { return value(p, initial()); }

  double q_value(const Plan& p, const State& s, double ml, const Exogenous& = {}) const {
    const double a = execute(s, ml);
    return tiny_->reward(s.x, a) - p.penalty * tiny_->cost(s.x, a) + expected_next(p, p.probabilities, s, a);
  }

  double greedy(const Plan& p, const State& s, const Exogenous& = {}) const {
    double best = -std::numeric_limits<double>::infinity();
    double arg = tiny_->ml_grid.front();
    for (double ml : tiny_->ml_grid) {
      const double q = q_value(p, s, ml);
      if (q > best) {
        best = q;
        arg = ml;
      }
    }
    return arg;
  }

  double predict(const Plan& p, std::size_t m, const State& s, double a, const Exogenous& = {}) const {
    return expected_next(p, models_.at(m), s, a);
  }

  /// Expected return of the greedy policy of plan when the world follows probs.
  double policy_value(const Plan& plan, const Model& probs) const {
    std::map<std::string, double> memo;
    return policy_value(plan, probs, initial(), memo);
  }

 private:
  double policy_value(const Plan& plan, const Model& probs, const State& s, std::map<std::string, double>& memo) const {
    if (s.round > tiny_->horizon) return 0.0;
    const auto key = encode(s);
    if (auto it = memo.find(key); it != memo.end()) return it->second;
    const double a = execute(s, greedy(plan, s));
    const double c = tiny_->cost(s.x, a);
    double v = tiny_->reward(s.x, a);
    for (std::size_t k = 0; k < probs.size(); ++k)
      if (probs[k] != 0.0) v += probs[k] * policy_value(plan, probs, advance(s, a, c, tiny_->step(k, s.x, a)), memo);
    memo.emplace(key, v);
    return v;
  }

  double expected_next(const Plan& p, const Model& probs, const State& s, double a) const {
    if (s.round >= tiny_->horizon) return 0.0;
    const double c = tiny_->cost(s.x, a);
    double v = 0.0;
    for (std::size_t k = 0; k < probs.size(); ++k) {
      if (probs[k] == 0.0) continue;
      v += probs[k] * value(p, advance(s, a, c, tiny_->step(k, s.x, a)));
    }
    return v;
  }

  static std::string encode(const State& s) {
    std::string key(sizeof(int) + sizeof(double), '\0');
    std::memcpy(key.data(), &s.round, sizeof(int));
    std::memcpy(key.data() + sizeof(int), &s.x, sizeof(double));
    if (s.ledger)
      for (const auto& row : s.ledger->history()) {
        key.append(reinterpret_cast<const char*>(&row.cost), sizeof(double));
        key.append(reinterpret_cast<const char*>(&row.deviation), sizeof(double));
      }
    return key;
  }

  const TinyEnv* env_;
  const TinyMDP* tiny_;
  std::vector<Model> models_;
  PlanMode mode_;
  double penalty_;
  std::shared_ptr<const SensitivityTable> table_;
  mutable std::mutex mu_;
  mutable std::map<std::size_t, std::shared_ptr<const Plan>> cache_;
};

}  // namespace acmdp
