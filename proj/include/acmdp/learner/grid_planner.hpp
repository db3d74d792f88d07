#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <vector>

#include "acmdp/core/random.hpp"
#include "acmdp/core/rollout.hpp"
#include "acmdp/safety/ledger.hpp"
#include "acmdp/safety/sensitivity.hpp"

namespace acmdp {

enum class PlanMode { acd, raw };

struct GridConfig {
  int n_x = 32;
  int n_budget = 16;
  int n_prev = 8;
  int n_action = 16;
  int n_quadrature = 8;
  std::uint64_t quadrature_seed = 0x5eedULL;

  void validate() const {
    if (n_x < 2 || n_budget < 2 || n_prev < 1 || n_action < 1 || n_quadrature < 1)
      throw ConfigError("grid sizes must be n_x >= 2, n_budget >= 2, n_prev >= 1, n_action >= 1, n_quadrature >= 1");
  }
};

/// Latin-hypercube points in [0, 1)^4 from a fixed seed.
inline std::vector<RoundDraw> latin_hypercube(int n, std::uint64_t seed) {
  CounterStream rng(seed);
  std::vector<RoundDraw> out(static_cast<std::size_t>(n));
  for (std::size_t c = 0; c < kDrawsPerRound; ++c) {
    std::vector<int> perm(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
    for (int i = n - 1; i > 0; --i)
      std::swap(perm[static_cast<std::size_t>(i)], perm[rng.below(static_cast<std::uint64_t>(i + 1))]);
    for (int i = 0; i < n; ++i)
      out[static_cast<std::size_t>(i)][c] = (perm[static_cast<std::size_t>(i)] + rng.uniform()) / n;
  }
  return out;
}

/// Value tables of one model: V[h][x][D][prev] for h = 1..H+1.
struct GridPlan {
  std::size_t model = 0;
  double penalty = 0.0;
  std::vector<double> values;
};

/// Backward induction on the budget-augmented state (x, D, previous action) with
/// multilinear interpolation and a fixed quadrature for the model's randomness.
/// Inside the backup the budget advances by the first branch of its update. Tables store
/// V + kappa * prev^2, which is convex in prev when the reward carries a -kappa (a - prev)^2 term.
template <class Env>
class GridPlanner {
  static_assert(Env::kStateDim == 1 && Env::kActionDim == 1, "grid planner handles scalar state and action");

 public:
  using EnvType = Env;
  using Model = typename Env::Model;
  using Plan = GridPlan;

  struct State {
    int round = 1;
    double x = 0.0;
    double budget = 0.0;
    double prev = 0.0;
  };

  GridPlanner(const Env& env, std::vector<Model> models, std::vector<Exogenous> profile, CompetitiveSpec spec,
              PlanMode mode, GridConfig cfg, double penalty = 0.0)
      : env_(&env),
        models_(std::move(models)),
        profile_(std::move(profile)),
        spec_(spec),
        mode_(mode),
        cfg_(cfg),
        penalty_(penalty),
        table_(make_sensitivity(env.params())) {
    cfg_.validate();
    spec_.validate();
    if (models_.empty()) throw ConfigError("planner needs at least one model");
    H_ = env.params().horizon;
    if (static_cast<int>(profile_.size()) != H_) throw ConfigError("planning profile length must equal the horizon");
    if (mode_ == PlanMode::raw) cfg_.n_budget = 2;
    quad_ = latin_hypercube(cfg_.n_quadrature, cfg_.quadrature_seed);
    const auto sb = env.state_box().dims[0];
    const auto ab = env.action_box().dims[0];
    xs_ = linspace(sb.lo, sb.hi, cfg_.n_x);
    ps_ = cfg_.n_prev == 1 ? std::vector<double>{env.initial_action()[0]} : linspace(ab.lo, ab.hi, cfg_.n_prev);
    if constexpr (requires { env.switching_curvature(); })
      if (cfg_.n_prev > 1) kappa_ = env.switching_curvature();
    as_ = cfg_.n_action == 1 ? std::vector<double>{ab.lo} : linspace(ab.lo, ab.hi, cfg_.n_action);
    allowance_ = spec_.lambda * env.params().min_cost + spec_.b;
    caps_.assign(static_cast<std::size_t>(H_ + 2), 0.0);
    for (int h = 1; h <= H_; ++h) caps_[static_cast<std::size_t>(h)] = std::max(allowance_, table_->gamma(h, h) * ab.span());
    caps_[static_cast<std::size_t>(H_ + 1)] = caps_[static_cast<std::size_t>(H_)];
  }

  const Env& env() const { return *env_; }
  const std::vector<Model>& models() const { return models_; }
  std::size_t model_count() const { return models_.size(); }
  PlanMode mode() const { return mode_; }
  double penalty() const { return penalty_; }
  const GridConfig& config() const { return cfg_; }
  const std::vector<double>& action_grid() const { return as_; }
  const CompetitiveSpec& spec() const { return spec_; }

  /// Tables for model m, computed once and cached.
  std::shared_ptr<const Plan> plan(std::size_t m) const {
    std::lock_guard<std::mutex> lock(mu_);
    if (auto it = cache_.find(m); it != cache_.end()) return it->second;
    auto p = std::make_shared<Plan>(solve(m));
    cache_.emplace(m, p);
    return p;
  }

  State initial() const {
    return {1, env_->initial_state(ModelSequence::from_draws(0, {}))[0], allowance_, env_->initial_action()[0]};
  }

  State observe(const Observation<Env>& obs) const {
    return {obs.round, obs.x[0], obs.ledger ? obs.ledger->budget() : 0.0, obs.prev[0]};
  }

  /// Successor state after executing a; the budget follows the first branch of its update.
  State advance(const State& s, double a, double, double x_next, const Exogenous& in) const {
    const double prior = env_->prior_action(s.round, {s.x}, in)[0];
    return {s.round + 1, x_next, next_budget(s.round, s.budget, std::abs(a - prior)), a};
  }

  double value(const Plan& p, const State& s) const {
    if (s.round > H_) return 0.0;
    return interpolate(p, s.round, s.x, s.budget, s.prev);
  }

  double root(const Plan& p) const { return value(p, initial()); }

  /// Action the planner would execute for ML action ml at state s.
  double execute(const State& s, double ml, double prior) const {
    if (mode_ == PlanMode::raw) return ml;
    const double g = table_->gamma(s.round, s.round);
    const double r = g > 0.0 ? std::max(0.0, s.budget) / g : std::numeric_limits<double>::infinity();
    const auto box = env_->action_box().dims[0];
    return std::clamp(ml, std::max(box.lo, prior - r), std::min(box.hi, prior + r));
  }

  /// Q value of ML action ml at s under the plan's model, with the given inputs.
  double q_value(const Plan& p, const State& s, double ml, const Exogenous& in) const {
    const double prior = env_->prior_action(s.round, {s.x}, in)[0];
    const double a = execute(s, ml, prior);
    const double Dn = next_budget(s.round, s.budget, std::abs(a - prior));
    return backup(p, models_[p.model], s.round, s.x, s.prev, a, Dn, in);
  }

  /// Greedy ML action on the action grid; ties resolve to the lowest grid point.
  double greedy(const Plan& p, const State& s, const Exogenous& in) const {
    double best = -std::numeric_limits<double>::infinity();
    double arg = as_.front();
    for (double ml : as_) {
      const double q = q_value(p, s, ml, in);
      if (q > best) {
        best = q;
        arg = ml;
      }
    }
    return arg;
  }

  /// Expected next-round value under model m of the plan's tables after executing a.
  double predict(const Plan& p, std::size_t m, const State& s, double a, const Exogenous& in) const {
    const double prior = env_->prior_action(s.round, {s.x}, in)[0];
    const double Dn = next_budget(s.round, s.budget, std::abs(a - prior));
    if (s.round >= H_) return 0.0;
    double v = 0.0;
    for (const auto& u : quad_) {
      const double xn = env_->transition(models_[m], s.round, {s.x}, {a}, {s.prev}, in, u).next[0];
      v += interpolate(p, s.round + 1, xn, Dn, a);
    }
    return v / static_cast<double>(quad_.size());
  }

 private:
  static std::vector<double> linspace(double lo, double hi, int n) {
    std::vector<double> v(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (n - 1);
    v.back() = hi;
    return v;
  }

  double next_budget(int h, double D, double d) const {
    if (mode_ == PlanMode::raw) return 0.0;
    const double next = D + allowance_ - table_->gamma(h, h) * d;
    return std::clamp(next, 0.0, caps_[static_cast<std::size_t>(std::min(h + 1, H_ + 1))]);
  }

  double budget_point(int h, int i) const {
    const double t = static_cast<double>(i) / (cfg_.n_budget - 1);
    return caps_[static_cast<std::size_t>(h)] * t * t;
  }

  std::size_t slice() const {
    return static_cast<std::size_t>(cfg_.n_x) * static_cast<std::size_t>(cfg_.n_budget) *
           static_cast<std::size_t>(ps_.size());
  }
  std::size_t index(int h, int ix, int iD, int ip) const {
    return static_cast<std::size_t>(h - 1) * slice() +
           (static_cast<std::size_t>(ix) * static_cast<std::size_t>(cfg_.n_budget) + static_cast<std::size_t>(iD)) *
               ps_.size() +
           static_cast<std::size_t>(ip);
  }

  static void bracket_uniform(const std::vector<double>& grid, double v, int& i, double& w) {
    const int n = static_cast<int>(grid.size());
    if (n == 1) {
      i = 0;
      w = 0.0;
      return;
    }
    const double t = std::clamp((v - grid.front()) / (grid.back() - grid.front()), 0.0, 1.0) * (n - 1);
    i = std::min(static_cast<int>(t), n - 2);
    w = t - i;
  }

  double interpolate(const Plan& p, int h, double x, double D, double prev) const {
    int ix, ip, iD;
    double wx, wp, wD;
    bracket_uniform(xs_, x, ix, wx);
    bracket_uniform(ps_, prev, ip, wp);
    const double cap = caps_[static_cast<std::size_t>(h)];
    const double tD = std::sqrt(std::clamp(D / cap, 0.0, 1.0)) * (cfg_.n_budget - 1);
    iD = std::min(static_cast<int>(tD), cfg_.n_budget - 2);
    const double lo = budget_point(h, iD), hi = budget_point(h, iD + 1);
    wD = hi > lo ? std::clamp((std::min(D, cap) - lo) / (hi - lo), 0.0, 1.0) : 0.0;
    const int np = static_cast<int>(ps_.size());
    double v = 0.0;
    for (int a = 0; a < 2; ++a) {
      const double fa = a ? wx : 1.0 - wx;
      if (fa == 0.0) continue;
      for (int b = 0; b < 2; ++b) {
        const double fb = fa * (b ? wD : 1.0 - wD);
        if (fb == 0.0) continue;
        for (int c = 0; c < (np > 1 ? 2 : 1); ++c) {
          const double fc = np > 1 ? fb * (c ? wp : 1.0 - wp) : fb;
          if (fc == 0.0) continue;
          v += fc * p.values[index(h, ix + a, iD + b, ip + c)];
        }
      }
    }
    return v - kappa_ * prev * prev;
  }

  double backup(const Plan& p, const Model& g, int h, double x, double prev, double a, double Dn,
                const Exogenous& in) const {
    double v = 0.0;
    for (const auto& u : quad_) {
      const auto t = env_->transition(g, h, {x}, {a}, {prev}, in, u);
      v += t.reward - p.penalty * t.cost;
      if (h < H_) v += interpolate(p, h + 1, t.next[0], Dn, a);
    }
    return v / static_cast<double>(quad_.size());
  }

  Plan solve(std::size_t m) const {
    if (m >= models_.size()) throw ConfigError("model index outside the class");
    Plan p{m, penalty_, std::vector<double>(slice() * static_cast<std::size_t>(H_), 0.0)};
    const Model& g = models_[m];
    for (int h = H_; h >= 1; --h) {
      const Exogenous& in = profile_[static_cast<std::size_t>(h - 1)];
      for (int ix = 0; ix < cfg_.n_x; ++ix) {
        const double x = xs_[static_cast<std::size_t>(ix)];
        const double prior = env_->prior_action(h, {x}, in)[0];
        for (int ip = 0; ip < static_cast<int>(ps_.size()); ++ip) {
          const double prev = ps_[static_cast<std::size_t>(ip)];
          for (int iD = 0; iD < cfg_.n_budget; ++iD) {
            const State s{h, x, budget_point(h, iD), prev};
            double best = -std::numeric_limits<double>::infinity();
            double last_a = std::numeric_limits<double>::quiet_NaN();
            double last_q = 0.0;
            for (double ml : as_) {
              const double a = execute(s, ml, prior);
              if (a != last_a) {
                last_q = backup(p, g, h, x, prev, a, next_budget(h, s.budget, std::abs(a - prior)), in);
                last_a = a;
              }
              best = std::max(best, last_q);
            }
            p.values[index(h, ix, iD, ip)] = best + kappa_ * prev * prev;
          }
        }
      }
    }
    return p;
  }

  const Env* env_;
  std::vector<Model> models_;
  std::vector<Exogenous> profile_;
  CompetitiveSpec spec_;
  PlanMode mode_;
  GridConfig cfg_;
  double penalty_;
  std::shared_ptr<const SensitivityTable> table_;
  int H_ = 1;
  double allowance_ = 0.0;
  std::vector<RoundDraw> quad_;
  double kappa_ = 0.0;
  std::vector<double> xs_, ps_, as_, caps_;
  mutable std::mutex mu_;
  mutable std::map<std::size_t, std::shared_ptr<const Plan>> cache_;
};

}  // namespace acmdp
