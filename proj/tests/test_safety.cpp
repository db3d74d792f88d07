#include <gtest/gtest.h>

#include <cmath>

#include "acmdp/envs/carbon.hpp"
#include "acmdp/safety/acd.hpp"

namespace acmdp {
namespace {

EnvParams unit_params(int H, double lc = 1.0, double lf = 1.0, double lp = 0.0, double rho = 1.0, double eps = 0.0) {
  EnvParams p;
  p.horizon = H;
  p.state_bounds = {{0.0, 1.0}};
  p.action_bounds = {{0.0, 10.0}};
  p.lipschitz = {lc, lf, lp};
  p.min_cost = eps;
  p.perturbation = Perturbation::geometric(rho, H);
  return p;
}

// Direct transcription of the sensitivity weights, used as an independent reference.
double ref_q(const EnvParams& p, int j, int i) {
  if (i < j) return 0.0;
  if (i == j) return p.lipschitz.cost;
  return p.lipschitz.cost * (1.0 + p.lipschitz.prior) * p.lipschitz.transition * std::pow(p.perturbation(1), i - 1 - j);
}

double ref_gamma(const EnvParams& p, int j, int n) {
  double s = 0.0;
  for (int i = n; i <= p.horizon; ++i) s += ref_q(p, j, i);
  return s;
}

// Budget recomputed from every anchor round's sufficient condition.
double ref_budget(const EnvParams& p, const CompetitiveSpec& spec, const std::vector<double>& c,
                  const std::vector<double>& d) {
  const int h = static_cast<int>(c.size()) + 1;
  const double eps = p.min_cost;
  std::vector<double> lower;
  for (int i = 1; i < h; ++i) {
    double s = 0.0;
    for (int j = 1; j <= i; ++j) s += ref_q(p, j, i) * d[j - 1];
    lower.push_back(std::max(eps, c[i - 1] - s));
  }
  double best = -1e300;
  for (int k = 1; k <= h; ++k) {
    double g = (h - k + 1) * (spec.lambda * eps + spec.b);
    for (int i = 1; i < k; ++i) g += (1 + spec.lambda) * lower[i - 1] - c[i - 1] - ref_gamma(p, i, k) * d[i - 1];
    for (int j = k; j < h; ++j) g -= ref_gamma(p, j, j) * d[j - 1];
    best = std::max(best, g);
  }
  return best;
}

TEST(Sensitivity, UnitConstants) {
  const auto t = build_sensitivity(unit_params(3), 3);
  for (int j = 1; j <= 3; ++j)
    for (int i = j; i <= 3; ++i) EXPECT_EQ(t.q(j, i), 1.0);
  EXPECT_EQ(t.gamma(1, 1), 3.0);
  EXPECT_EQ(t.gamma(2, 2), 2.0);
  EXPECT_EQ(t.gamma(3, 3), 1.0);
  EXPECT_EQ(t.gamma(1, 2), 2.0);
}

TEST(Sensitivity, NoPropagationWithoutTransitionConstant) {
  const auto t = build_sensitivity(unit_params(4, 2.5, 0.0), 4);
  for (int j = 1; j <= 4; ++j) {
    EXPECT_EQ(t.gamma(j, j), 2.5);
    for (int i = j + 1; i <= 4; ++i) EXPECT_EQ(t.q(j, i), 0.0);
  }
}

TEST(Sensitivity, GeometricPerturbation) {
  const auto t = build_sensitivity(unit_params(4, 2.0, 0.5, 1.0, 0.5), 4);
  EXPECT_DOUBLE_EQ(t.q(1, 2), 2.0);
  EXPECT_DOUBLE_EQ(t.q(1, 3), 1.0);
  EXPECT_DOUBLE_EQ(t.q(1, 4), 0.5);
  EXPECT_DOUBLE_EQ(t.gamma(1, 1), 5.5);
}

TEST(Sensitivity, MatchesReferenceAndIsMonotone) {
  CounterStream rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const int H = 1 + static_cast<int>(rng.below(30));
    const auto p = unit_params(H, rng.uniform(0, 5), rng.uniform(0, 2), rng.uniform(0, 2), rng.uniform(0, 1.2));
    const auto t = build_sensitivity(p, H);
    for (int j = 1; j <= H; ++j) {
      EXPECT_GE(t.gamma(j, j), p.lipschitz.cost);
      EXPECT_DOUBLE_EQ(t.gamma(j, H), t.q(j, H));
      for (int n = j; n <= H; ++n) {
        EXPECT_NEAR(t.gamma(j, n), ref_gamma(p, j, n), 1e-9 * (1 + ref_gamma(p, j, n)));
        if (n > j) EXPECT_LE(t.gamma(j, n), t.gamma(j, n - 1));
      }
    }
  }
}

TEST(Ledger, InitialBudget) {
  const auto table = make_sensitivity(unit_params(4));
  EXPECT_EQ(init_ledger({2.0, 2.0}, table, 1.0).budget(), 4.0);
  EXPECT_EQ(init_ledger({0.0, 0.0}, table, 3.0).budget(), 0.0);
  EXPECT_EQ(init_ledger({5.0, 6.0}, table, 0.0).budget(), 6.0);
}

TEST(Ledger, ResidualAndUpdate) {
  auto ledger = init_ledger({0.0, 1.0}, make_sensitivity(unit_params(2)), 0.0);
  EXPECT_EQ(ledger.residual(), 0.0);
  EXPECT_EQ(ledger.budget(), 1.0);
  EXPECT_EQ(ledger.table().gamma(1, 1), 2.0);
  const double next = ledger.update_budget(0.5, 3.0);
  EXPECT_DOUBLE_EQ(ledger.history()[0].prior_cost_bound, 2.5);
  EXPECT_DOUBLE_EQ(ledger.residual(), -1.0);
  EXPECT_DOUBLE_EQ(next, 1.0);
}

TEST(Ledger, NoDeviationGrowsLinearly) {
  const CompetitiveSpec spec{1.5, 0.5};
  auto ledger = init_ledger(spec, make_sensitivity(unit_params(6, 1, 1, 0, 1, 0.4)), 0.4);
  double previous = ledger.budget();
  double costs = 0.0;
  for (int h = 1; h < 6; ++h) {
    const double c = 0.4 + 0.1 * h;
    costs += c;
    ledger.update_budget(0.0, c);
    EXPECT_NEAR(ledger.residual(), spec.lambda * costs, 1e-12);
    EXPECT_GE(ledger.budget(), previous + spec.lambda * 0.4 + spec.b - 1e-12);
    previous = ledger.budget();
  }
}

TEST(Ledger, SpentBudgetFloorsAtB) {
  auto ledger = init_ledger({0.0, 0.7}, make_sensitivity(unit_params(5)), 0.0);
  for (int h = 1; h < 5; ++h) {
    const double d = ledger.budget() / ledger.table().gamma(h, h);
    ledger.update_budget(d, 1.0);
    EXPECT_GE(ledger.budget(), 0.7 - 1e-12);
  }
}

TEST(Ledger, OverspendIsAFault) {
  auto ledger = init_ledger({0.0, 1.0}, make_sensitivity(unit_params(3)), 0.0);
  EXPECT_THROW(ledger.update_budget(1.0, 1.0), SafetyFault);
}

TEST(Ledger, JsonDump) {
  auto ledger = init_ledger({1.0, 1.0}, make_sensitivity(unit_params(3)), 0.5);
  ledger.update_budget(0.1, 2.0);
  const auto j = to_json(ledger);
  EXPECT_EQ(j["round"], 2);
  EXPECT_DOUBLE_EQ(j["budget"].get<double>(), ledger.budget());
  ASSERT_EQ(j["history"].size(), 1u);
  EXPECT_DOUBLE_EQ(j["history"][0]["cost"].get<double>(), 2.0);
}

struct RandomTrajectory {
  std::vector<double> costs, devs, budgets;
};

RandomTrajectory random_trajectory(const EnvParams& p, const CompetitiveSpec& spec, CounterStream& rng) {
  RandomTrajectory out;
  auto ledger = init_ledger(spec, make_sensitivity(p), p.min_cost);
  for (int h = 1; h <= p.horizon; ++h) {
    out.budgets.push_back(ledger.budget());
    const double frac = rng.uniform() < 0.3 ? 1.0 : rng.uniform();
    const double d = rng.uniform() < 0.2 ? 0.0 : frac * ledger.radius();
    const double c = p.min_cost + rng.uniform(0.0, 5.0);
    out.costs.push_back(c);
    out.devs.push_back(d);
    ledger.update_budget(d, c);
  }
  return out;
}

TEST(Ledger, IncrementalBudgetMatchesReference) {
  CounterStream rng(23);
  for (int trial = 0; trial < 300; ++trial) {
    const int H = 1 + static_cast<int>(rng.below(12));
    const auto p = unit_params(H, rng.uniform(0.1, 4), rng.uniform(0, 1.5), rng.uniform(0, 2), rng.uniform(0, 1),
                               rng.uniform(0, 2));
    const CompetitiveSpec spec{rng.uniform(0, 6), rng.uniform(0, 6)};
    const auto traj = random_trajectory(p, spec, rng);
    for (int h = 1; h <= H; ++h) {
      const std::vector<double> c(traj.costs.begin(), traj.costs.begin() + h - 1);
      const std::vector<double> d(traj.devs.begin(), traj.devs.begin() + h - 1);
      const double ref = ref_budget(p, spec, c, d);
      EXPECT_NEAR(traj.budgets[h - 1], ref, 1e-12 * std::max(1.0, std::abs(ref)));
      EXPECT_GE(traj.budgets[h - 1], spec.lambda * p.min_cost + spec.b - 1e-12);
    }
  }
}

TEST(Ledger, BudgetMonotoneInLambdaAndB) {
  CounterStream rng(29);
  for (int trial = 0; trial < 200; ++trial) {
    const int H = 2 + static_cast<int>(rng.below(10));
    const auto p = unit_params(H, rng.uniform(0.1, 3), rng.uniform(0, 1), rng.uniform(0, 1), 1.0, rng.uniform(0, 1));
    const CompetitiveSpec lo{rng.uniform(0, 3), rng.uniform(0, 3)};
    const CompetitiveSpec hi{lo.lambda + rng.uniform(0, 2), lo.b + rng.uniform(0, 2)};
    const auto traj = random_trajectory(p, lo, rng);
    auto a = init_ledger(lo, make_sensitivity(p), p.min_cost);
    auto b = init_ledger(hi, make_sensitivity(p), p.min_cost);
    for (int h = 1; h <= H; ++h) {
      EXPECT_LE(a.budget(), b.budget() + 1e-12);
      a.update_budget(traj.devs[h - 1], traj.costs[h - 1]);
      b.update_budget(traj.devs[h - 1], traj.costs[h - 1]);
    }
  }
}

TEST(SafeSet, Examples) {
  auto p = unit_params(3);
  auto ledger = init_ledger({0.0, 4.0}, make_sensitivity(p), 0.0);
  EXPECT_DOUBLE_EQ(safe_set(ledger, Vec<1>{3.0}).radius, 4.0 / 3.0);

  p.lipschitz.cost = 2.0;
  p.lipschitz.transition = 0.0;
  auto two = init_ledger({0.0, 2.0}, make_sensitivity(p), 0.0);
  const auto s = safe_set(two, Vec<1>{3.0});
  EXPECT_DOUBLE_EQ(s.center[0] - s.radius, 2.0);
  EXPECT_DOUBLE_EQ(s.center[0] + s.radius, 4.0);

  auto zero = init_ledger({0.0, 0.0}, make_sensitivity(p), 0.0);
  const Box<1> box{{Interval{0.0, 10.0}}};
  EXPECT_EQ(project(zero, Vec<1>{9.0}, Vec<1>{3.0}, box)[0], 3.0);
}

TEST(Projection, Examples) {
  EXPECT_DOUBLE_EQ(project_ball(Vec<1>{5.0}, Vec<1>{3.0}, 1.0)[0], 4.0);
  EXPECT_EQ(project_ball(Vec<1>{3.5}, Vec<1>{3.0}, 1.0)[0], 3.5);
  const auto a = project_ball(Vec<2>{3.0, 4.0}, Vec<2>{0.0, 0.0}, 2.5);
  EXPECT_DOUBLE_EQ(a[0], 1.5);
  EXPECT_DOUBLE_EQ(a[1], 2.0);
}

TEST(Projection, NearestFeasiblePoint) {
  CounterStream rng(31);
  const Box<2> box{{Interval{-2.0, 2.0}, Interval{0.0, 3.0}}};
  auto p = unit_params(3, 1.0, 0.0);
  p.action_dim = 2;
  p.action_bounds = {{-2.0, 2.0}, {0.0, 3.0}};
  for (int c = 0; c < 50; ++c) {
    auto ledger = init_ledger({0.0, rng.uniform(0.0, 3.0)}, make_sensitivity(p), 0.0);
    const Vec<2> prior{rng.uniform(-2, 2), rng.uniform(0, 3)};
    const Vec<2> target{rng.uniform(-4, 4), rng.uniform(-2, 5)};
    const auto a = project(ledger, target, prior, box);
    const double r = ledger.radius();
    EXPECT_LE(distance(a, prior), r * (1 + 1e-12));
    EXPECT_TRUE(box.contains(a));
    for (int k = 0; k < 1000; ++k) {
      const Vec<2> cand{rng.uniform(-2, 2), rng.uniform(0, 3)};
      if (distance(cand, prior) > r) continue;
      EXPECT_LE(distance(a, target), distance(cand, target) + 1e-9);
    }
  }
}

TEST(Anytime, BoundaryIsSatisfied) {
  EpisodeRecord<CarbonSchedulingEnv> agent, prior;
  agent.rounds.resize(1);
  prior.rounds.resize(1);
  agent.rounds[0].cumulative_cost = 5.0;
  prior.rounds[0].cumulative_cost = 2.0;
  const auto r = anytime_check(agent, prior, {1.0, 1.0});
  EXPECT_TRUE(r.satisfied);
  EXPECT_EQ(r.worst_slack, 0.0);
  EXPECT_FALSE(r.first_violation_round.has_value());
  agent.rounds[0].cumulative_cost = 5.5;
  const auto v = anytime_check(agent, prior, {1.0, 1.0});
  EXPECT_FALSE(v.satisfied);
  EXPECT_EQ(v.first_violation_round, 1);
  EXPECT_GT(v.max_violation_ratio, 1.0);
  prior.seed = 3;
  EXPECT_THROW(anytime_check(agent, prior, {1.0, 1.0}), PairingError);
}

std::vector<Exogenous> inputs_for(std::uint64_t seed, int H) {
  CounterStream rng(seed ^ 0xabcdef);
  std::vector<Exogenous> in;
  for (int h = 0; h < H; ++h) in.push_back({rng.uniform(0, 4), rng.uniform(0, 4)});
  return in;
}

TEST(Acd, PriorAsMlPolicyHasNoDeviation) {
  const CarbonSchedulingEnv env;
  const CompetitiveSpec spec{2.0, 2.0};
  const auto table = make_sensitivity(env.params());
  const auto prior = [](const Observation<CarbonSchedulingEnv>& o) { return o.prior; };
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto seq = ModelSequence::from_seed(s, 24, inputs_for(s, 24));
    const auto pair = acd_paired_rollout(env, seq, prior, spec, table);
    for (std::size_t i = 0; i < pair.agent.rounds.size(); ++i) {
      EXPECT_EQ(pair.agent.rounds[i].deviation, 0.0);
      EXPECT_EQ(pair.agent.rounds[i].x, pair.prior.rounds[i].x);
    }
    const auto check = anytime_check(pair.agent, pair.prior, spec);
    EXPECT_TRUE(check.satisfied);
    EXPECT_GE(check.worst_slack, spec.lambda * env.params().min_cost + spec.b - 1e-9);
  }
}

TEST(Acd, AdversarialPolicyNeverViolates) {
  const CarbonSchedulingEnv env;
  for (const CompetitiveSpec spec : {CompetitiveSpec{0, 2}, CompetitiveSpec{2, 2}, CompetitiveSpec{6, 6}}) {
    const auto table = make_sensitivity(env.params());
    for (double corner : {0.0, 8.0}) {
      const auto adversary = [corner](const Observation<CarbonSchedulingEnv>&) {
        return CarbonSchedulingEnv::Action{corner};
      };
      for (std::uint64_t s = 0; s < 200; ++s) {
        const auto seq = ModelSequence::from_seed(s, 24, inputs_for(s, 24));
        const auto pair = acd_paired_rollout(env, seq, adversary, spec, table);
        EXPECT_TRUE(anytime_check(pair.agent, pair.prior, spec).satisfied);
        for (const auto& r : pair.agent.rounds) {
          EXPECT_GE(r.budget, spec.lambda * env.params().min_cost + spec.b - 1e-12);
        }
      }
    }
  }
}

TEST(Acd, InflatedConstantsStaySafeAndShrinkRadius) {
  CarbonConfig cfg;
  const CarbonSchedulingEnv env(cfg);
  const CompetitiveSpec spec{2.0, 2.0};
  const auto table = make_sensitivity(env.params());
  EnvParams inflated = env.params();
  inflated.lipschitz.cost *= 1.5;
  inflated.lipschitz.transition *= 1.2;
  const auto big = make_sensitivity(inflated);
  const auto adversary = [](const Observation<CarbonSchedulingEnv>&) { return CarbonSchedulingEnv::Action{0.0}; };
  for (std::uint64_t s = 0; s < 100; ++s) {
    const auto seq = ModelSequence::from_seed(s, 24, inputs_for(s, 24));
    AcdController<CarbonSchedulingEnv, decltype(adversary)> ctl(env, adversary, spec, big);
    auto rec = rollout(env, seq, ctl);
    PriorController<CarbonSchedulingEnv> pc;
    const auto prior = rollout(env, seq, pc);
    EXPECT_TRUE(anytime_check(rec, prior, spec).satisfied);
    auto small_ledger = init_ledger(spec, table, env.params().min_cost);
    auto big_ledger = init_ledger(spec, big, inflated.min_cost);
    for (const auto& r : rec.rounds) {
      EXPECT_LE(big_ledger.radius(), small_ledger.radius() + 1e-12);
      small_ledger.update_budget(r.deviation, r.cost);
      big_ledger.update_budget(r.deviation, r.cost);
    }
  }
}

}  // namespace
}  // namespace acmdp
