#pragma once

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "acmdp/oracle/tiny_mdp.hpp"

namespace acmdp::oracle {

/// Constants of the safety condition, recomputed here from the fixture without the safety module.
struct ScratchConstants {
  int horizon = 1;
  double lc = 0.0, lf = 0.0, lprior = 0.0, rho = 0.0, eps = 0.0, lambda = 0.0, b = 0.0;

  static ScratchConstants from(const TinyMDP& t) {
    const EnvParams p = t.params();
    return {t.horizon, p.lipschitz.cost, p.lipschitz.transition, p.lipschitz.prior,
            p.perturbation.size() > 1 ? p.perturbation(1) : 0.0, p.min_cost, t.spec.lambda, t.spec.b};
  }

  double q(int j, int i) const {
    if (i < j) return 0.0;
    if (i == j) return lc;
    return lc * (1.0 + lprior) * lf * std::pow(rho, i - 1 - j);
  }
  double gamma(int j, int n) const {
    double s = 0.0;
    for (int i = n; i <= horizon; ++i) s += q(j, i);
    return s;
  }
};

/// Budget at round h recomputed from the per-anchor sufficient conditions: the largest
/// G(k, h) minus the deviation already charged against it since round k.
inline double scratch_budget(const ScratchConstants& k, const std::vector<double>& costs,
                             const std::vector<double>& devs) {
  const int h = static_cast<int>(costs.size()) + 1;
  std::vector<double> lower(costs.size());
  for (int i = 1; i < h; ++i) {
    double spill = 0.0;
    for (int j = 1; j <= i; ++j) spill += k.q(j, i) * devs[static_cast<std::size_t>(j - 1)];
    lower[static_cast<std::size_t>(i - 1)] = std::max(k.eps, costs[static_cast<std::size_t>(i - 1)] - spill);
  }
  double best = -std::numeric_limits<double>::infinity();
  for (int anchor = 1; anchor <= h; ++anchor) {
    double g = static_cast<double>(h - anchor + 1) * (k.lambda * k.eps + k.b);
    for (int i = 1; i < anchor; ++i)
      g += (1.0 + k.lambda) * lower[static_cast<std::size_t>(i - 1)] - costs[static_cast<std::size_t>(i - 1)] -
           k.gamma(i, anchor) * devs[static_cast<std::size_t>(i - 1)];
    for (int j = anchor; j < h; ++j) g -= k.gamma(j, j) * devs[static_cast<std::size_t>(j - 1)];
    best = std::max(best, g);
  }
  return best;
}

inline double scratch_project(double ml, double prior, double radius, const Interval& box) {
  const double moved = prior + std::clamp(ml - prior, -radius, radius);
  return box.clamp(moved);
}

/// History-carrying node of the enumeration tree.
struct Node {
  int round = 1;
  double x = 0.0;
  std::vector<double> costs;
  std::vector<double> devs;
};

/// Exhaustive finite-horizon dynamic program over the grid of ML actions. With projection the
/// state carries the full cost/deviation history, so the result is the optimal ACD policy.
class ExactDp {
 public:
  ExactDp(const TinyMDP& tiny, std::vector<double> model, bool with_projection)
      : tiny_(tiny), model_(std::move(model)), projection_(with_projection), k_(ScratchConstants::from(tiny)) {
    if (tiny_.leaves() > TinyMDP::kMaxLeaves) throw ConfigError("enumeration exceeds 1e6 leaves; refusing");
  }

  Node root() const { return {1, tiny_.initial_state, {}, {}}; }

  double value() { return value(root()); }

  double value(const Node& n) {
    if (n.round > tiny_.horizon) return 0.0;
    const auto key = encode(n);
    if (auto it = values_.find(key); it != values_.end()) return it->second.first;
    double best = -std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    for (std::size_t i = 0; i < tiny_.ml_grid.size(); ++i) {
      const double q = q_value(n, tiny_.ml_grid[i]);
      if (q > best) {
        best = q;
        arg = i;
      }
    }
    values_.emplace(key, std::make_pair(best, arg));
    return best;
  }

  /// Greedy ML action at a node; ties resolve to the lowest grid index.
  double ml_action(const Node& n) {
    value(n);
    return tiny_.ml_grid[values_.at(encode(n)).second];
  }

  double executed_action(const Node& n, double ml) const {
    if (!projection_) return ml;
    const double prior = tiny_.prior(n.x);
    const double g = k_.gamma(n.round, n.round);
    const double budget = scratch_budget(k_, n.costs, n.devs);
    const double radius = g > 0.0 ? std::max(0.0, budget) / g : std::numeric_limits<double>::infinity();
    return scratch_project(ml, prior, radius, tiny_.action_box);
  }

  /// Expected reward-to-go of playing ML action ml at the node and optimally afterwards.
  double q_value(const Node& n, double ml) {
    const double a = executed_action(n, ml);
    return q_executed(n, a);
  }

  /// Same as q_value with the executed action given directly.
  double q_executed(const Node& n, double a) {
    const double r = tiny_.reward(n.x, a);
    const double c = tiny_.cost(n.x, a);
    const double d = std::abs(a - tiny_.prior(n.x));
    double future = 0.0;
    for (std::size_t k = 0; k < tiny_.functions.size(); ++k) {
      if (model_[k] == 0.0) continue;
      Node child{n.round + 1, tiny_.step(k, n.x, a), n.costs, n.devs};
      if (projection_) {
        child.costs.push_back(c);
        child.devs.push_back(d);
      }
      future += model_[k] * value(child);
    }
    return r + future;
  }

  Node child(const Node& n, double a, std::size_t k) const {
    Node c{n.round + 1, tiny_.step(k, n.x, a), n.costs, n.devs};
    c.costs.push_back(tiny_.cost(n.x, a));
    c.devs.push_back(std::abs(a - tiny_.prior(n.x)));
    if (!projection_) {
      c.costs.clear();
      c.devs.clear();
    }
    return c;
  }

  const TinyMDP& tiny() const { return tiny_; }
  bool with_projection() const { return projection_; }

 private:
  static std::string encode(const Node& n) {
    std::string s(sizeof(int) + sizeof(double) * (1 + n.costs.size() + n.devs.size()), '\0');
    char* p = s.data();
    std::memcpy(p, &n.round, sizeof(int));
    p += sizeof(int);
    std::memcpy(p, &n.x, sizeof(double));
    p += sizeof(double);
    for (double v : n.costs) {
      std::memcpy(p, &v, sizeof(double));
      p += sizeof(double);
    }
    for (double v : n.devs) {
      std::memcpy(p, &v, sizeof(double));
      p += sizeof(double);
    }
    return s;
  }

  const TinyMDP& tiny_;
  std::vector<double> model_;
  bool projection_;
  ScratchConstants k_;
  std::map<std::string, std::pair<double, std::size_t>> values_;
};

/// Convenience wrapper: optimal value at the root.
inline double exact_dp(const TinyMDP& tiny, bool with_projection) {
  ExactDp dp(tiny, tiny.true_probabilities(), with_projection);
  return dp.value();
}

}  // namespace acmdp::oracle
