#include <gtest/gtest.h>

#include <cmath>

#include "acmdp/envs/trace.hpp"
#include "acmdp/learner/acrl.hpp"
#include "acmdp/learner/exact_planner.hpp"
#include "acmdp/learner/grid_planner.hpp"
#include "acmdp/oracle/exact_dp.hpp"

namespace acmdp {
namespace {

TinyMDP fixture(const std::string& name) { return load_tiny(std::string(ACMDP_FIXTURE_DIR) + "/" + name + ".tiny"); }

GridConfig coarse_grid() {
  GridConfig g;
  g.n_x = 12;
  g.n_budget = 6;
  g.n_prev = 3;
  g.n_action = 9;
  g.n_quadrature = 4;
  return g;
}

TEST(Beta, Schedules) {
  BetaSchedule log_beta;
  log_beta.beta0 = 2.0;
  EXPECT_DOUBLE_EQ(log_beta(1), 2.0 * std::log(2.0));
  EXPECT_DOUBLE_EQ(log_beta(9), 2.0 * std::log(10.0));
  BetaSchedule theory{BetaMode::theory, 0.0, 0.5, 1.0, 2.0, 3};
  EXPECT_DOUBLE_EQ(theory(1), 0.5 * 36.0);
  EXPECT_THROW(log_beta(0), ConfigError);
  EXPECT_EQ(parse_beta_mode("theory"), BetaMode::theory);
}

TEST(Confidence, EmptyDataFitsFirstModel) {
  ConfidenceTracker t(4);
  EXPECT_EQ(t.fit(), 0u);
  for (double l : t.losses()) EXPECT_EQ(l, 0.0);
  EXPECT_EQ(t.confidence_set(0.0).size(), 4u);
}

TEST(Confidence, BetaLimits) {
  ConfidenceTracker t(3);
  t.add({1.0, 1.0, 3.0}, 1.2);
  t.add({2.0, 2.0, 0.0}, 2.1);
  EXPECT_EQ(t.fit(), 0u);
  EXPECT_EQ(t.confidence_set(std::numeric_limits<double>::infinity()).size(), 3u);
  EXPECT_EQ(t.confidence_set(0.0), (std::vector<std::size_t>{0, 1}));
  EXPECT_THROW(t.confidence_set(-1.0), ConfigError);
}

TEST(Confidence, LossesAreMonotoneAndTiesStable) {
  ConfidenceTracker t(3);
  CounterStream rng(2);
  std::vector<double> last(3, 0.0);
  for (int i = 0; i < 200; ++i) {
    const double a = rng.uniform(), b = rng.uniform();
    t.add({a, a, b}, rng.uniform());
    for (std::size_t m = 0; m < 3; ++m) {
      EXPECT_GE(t.losses()[m], last[m]);
      last[m] = t.losses()[m];
    }
    EXPECT_NE(t.fit(), 1u);
  }
}

TEST(ExactPlanner, MatchesOracleOnFixtures) {
  for (const std::string name : {"backlog", "drift", "two_state", "zero_gap", "learn"}) {
    const auto t = fixture(name);
    const TinyEnv env(t);
    const ExactPlanner acd(env, ExactPlanner::fixture_models(t), PlanMode::acd);
    const ExactPlanner raw(env, ExactPlanner::fixture_models(t), PlanMode::raw);
    EXPECT_NEAR(acd.root(*acd.plan(t.truth)), oracle::exact_dp(t, true), 1e-9) << name;
    EXPECT_NEAR(raw.root(*raw.plan(t.truth)), oracle::exact_dp(t, false), 1e-9) << name;
    const auto plan = acd.plan(t.truth);
    EXPECT_NEAR(acd.policy_value(*plan, t.true_probabilities()), acd.root(*plan), 1e-9) << name;
  }
}

TEST(ExactPlanner, OptimismOverFullClass) {
  const auto t = fixture("learn");
  const TinyEnv env(t);
  const ExactPlanner p(env, ExactPlanner::fixture_models(t), PlanMode::acd);
  const double truth = p.root(*p.plan(t.truth));
  double best = -1e300;
  for (std::size_t m = 0; m < p.model_count(); ++m) best = std::max(best, p.root(*p.plan(m)));
  EXPECT_GE(best, truth);
}

TEST(GridPlanner, SingleRoundIsExact) {
  const auto t = parse_tiny("horizon = 1\nstate_box = 0 2\naction_box = 0 2\ninitial_state = 1\nml_grid = 0 1 2\n"
                            "function = 1 0 0\nmodel = 1\nreward = a:3 a2:-1 x:1\ncost = c:1 a:1\nprior = 0.5 0\n"
                            "lambda = 0\nb = 0.5\n",
                            "single");
  const TinyEnv env(t);
  GridConfig g;
  g.n_x = 3;
  g.n_budget = 3;
  g.n_prev = 1;
  g.n_action = 5;
  const GridPlanner<TinyEnv> planner(env, {t.true_probabilities()}, {Exogenous{}}, t.spec, PlanMode::acd, g);
  const auto plan = planner.plan(0);
  const GridPlanner<TinyEnv>::State s{1, 1.0, 0.5, 0.5};
  for (double ml : planner.action_grid()) {
    const double a = std::clamp(ml, 0.0, 1.0);
    EXPECT_DOUBLE_EQ(planner.q_value(*plan, s, ml, {}), t.reward(1.0, a)) << ml;
  }
  EXPECT_DOUBLE_EQ(planner.root(*plan), t.reward(1.0, 1.0));
}

TEST(GridPlanner, ZeroBudgetPlaysThePrior) {
  const CarbonSchedulingEnv env;
  const std::vector<Exogenous> profile(24, Exogenous{2.0, 1.0});
  const CompetitiveSpec spec{0.0, 0.0};
  GridConfig fine;
  fine.n_x = 128;
  fine.n_budget = 2;
  fine.n_prev = 2;
  fine.n_quadrature = 32;
  const auto planner = std::make_shared<const GridPlanner<CarbonSchedulingEnv>>(
      env, std::vector<CarbonModel>{env.true_model()}, profile, spec, PlanMode::acd, fine);
  const auto plan = planner->plan(0);
  GreedyPolicy<GridPlanner<CarbonSchedulingEnv>> policy{planner.get(), plan, nullptr};
  const auto table = make_sensitivity(env.params());
  double mean = 0.0, sq = 0.0;
  const int n = 2000;
  for (int i = 0; i < n; ++i) {
    const auto pair = acd_paired_rollout(env, ModelSequence::from_seed(i, 24, profile), policy, spec, table);
    for (std::size_t h = 0; h < pair.agent.rounds.size(); ++h)
      ASSERT_EQ(pair.agent.rounds[h].action, pair.prior.rounds[h].action);
    const double r = pair.prior.total_reward();
    mean += r / n;
    sq += r * r / n;
  }
  const double se = std::sqrt(std::max(0.0, sq - mean * mean) / n);
  EXPECT_NEAR(planner->root(*plan), mean, 3.0 * se + 0.01 * std::abs(mean));
}

TEST(GridPlanner, ZeroPenaltyMatchesUnconstrained) {
  const CarbonSchedulingEnv env;
  const std::vector<Exogenous> profile(24, Exogenous{2.0, 1.0});
  const GridPlanner<CarbonSchedulingEnv> rl(env, carbon_model_class(), profile, {2, 2}, PlanMode::raw, coarse_grid());
  const GridPlanner<CarbonSchedulingEnv> crl(env, carbon_model_class(), profile, {2, 2}, PlanMode::raw, coarse_grid(), 0.0);
  EXPECT_EQ(rl.plan(4)->values, crl.plan(4)->values);
  const GridPlanner<CarbonSchedulingEnv> penalized(env, carbon_model_class(), profile, {2, 2}, PlanMode::raw,
                                                   coarse_grid(), 0.5);
  EXPECT_LT(penalized.root(*penalized.plan(4)), rl.root(*rl.plan(4)));
}

TEST(GridPlanner, DeterministicTables) {
  const SustainableInferenceEnv env;
  const std::vector<Exogenous> profile(24, Exogenous{3.0, 2.0});
  const GridPlanner<SustainableInferenceEnv> a(env, sustainable_model_class(), profile, {2, 2}, PlanMode::acd,
                                               coarse_grid());
  const GridPlanner<SustainableInferenceEnv> b(env, sustainable_model_class(), profile, {2, 2}, PlanMode::acd,
                                               coarse_grid());
  EXPECT_EQ(a.plan(3)->values, b.plan(3)->values);
  EXPECT_THROW(GridPlanner<SustainableInferenceEnv>(env, {}, profile, {2, 2}, PlanMode::acd, coarse_grid()),
               ConfigError);
  GridConfig bad = coarse_grid();
  bad.n_x = 1;
  EXPECT_THROW(GridPlanner<SustainableInferenceEnv>(env, sustainable_model_class(), profile, {2, 2}, PlanMode::acd, bad),
               ConfigError);
}

struct ToyRun {
  TinyMDP tiny = fixture("learn");
  TinyEnv env{tiny};
  std::shared_ptr<const ExactPlanner> planner =
      std::make_shared<const ExactPlanner>(env, ExactPlanner::fixture_models(tiny), PlanMode::acd);

  TrainResult<ExactPlanner> run(int episodes, std::uint64_t seed, bool with_regret = true,
                                std::optional<std::size_t> reference = std::nullopt) const {
    TrainOptions o;
    o.episodes = episodes;
    o.seed = seed;
    o.reference_model = reference;
    const double best = planner->root(*planner->plan(tiny.truth));
    const auto truth = tiny.true_probabilities();
    std::function<double(const ExactPlanner&, const ExactPlan&, const EpisodeRecord<TinyEnv>&)> regret;
    if (with_regret)
      regret = [&, best](const ExactPlanner& p, const ExactPlan& plan, const EpisodeRecord<TinyEnv>&) {
        return best - p.policy_value(plan, truth);
      };
    const int H = tiny.horizon;
    return train<ExactPlanner>([this](double) { return planner; },
                               [H](std::uint64_t s) { return ModelSequence::from_seed(s, H); }, tiny.spec, o, regret);
  }
};

TEST(Acrl, SingleEpisodeIsSafe) {
  const ToyRun toy;
  const auto r = toy.run(1, 3);
  ASSERT_EQ(r.episodes.size(), 1u);
  EXPECT_FALSE(r.episodes[0].violated);
  EXPECT_EQ(r.episodes[0].set_size, toy.planner->model_count());
  EXPECT_EQ(r.episodes[0].selected, 0u);
}

TEST(Acrl, FitsTheGeneratingModel) {
  const ToyRun toy;
  const auto r = toy.run(500, 11, false);
  EXPECT_EQ(r.selected, toy.tiny.truth);
  EXPECT_EQ(std::min_element(r.losses.begin(), r.losses.end()) - r.losses.begin(),
            static_cast<std::ptrdiff_t>(toy.tiny.truth));
}

TEST(Acrl, TrueModelStaysInConfidenceSet) {
  const ToyRun toy;
  long long inside = 0, total = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto r = toy.run(200, seed, false, toy.tiny.truth);
    for (const auto& e : r.episodes) {
      ++total;
      inside += e.reference_in_set;
    }
  }
  EXPECT_GE(static_cast<double>(inside) / static_cast<double>(total), 0.95);
}

TEST(Acrl, ToyPseudoRegretVanishes) {
  const ToyRun toy;
  const auto r = toy.run(2000, 5);
  double tail = 0.0;
  int violations = 0;
  for (const auto& e : r.episodes) {
    if (e.episode > 1800) tail += e.pseudo_regret / 200.0;
    violations += e.violated;
  }
  const double vbar = 2.0 * toy.tiny.horizon;
  EXPECT_LE(tail, 0.05 * vbar);
  EXPECT_EQ(violations, 0);
}

TEST(Acrl, ReplayIsIdentical) {
  const ToyRun toy;
  const auto a = toy.run(50, 8);
  const auto b = toy.run(50, 8);
  for (std::size_t i = 0; i < a.episodes.size(); ++i) {
    EXPECT_EQ(a.episodes[i].selected, b.episodes[i].selected);
    EXPECT_EQ(a.episodes[i].total_reward, b.episodes[i].total_reward);
  }
}

TEST(Crl, InfiniteBudgetKeepsMultiplierAtZero) {
  const CarbonSchedulingEnv env;
  const std::vector<Exogenous> profile(24, Exogenous{2.0, 1.0});
  TrainOptions o;
  o.kind = LearnerKind::crl;
  o.episodes = 20;
  o.dual_window = 5;
  o.dual_step = 1.0;
  const auto r = train<GridPlanner<CarbonSchedulingEnv>>(
      [&](double nu) {
        return std::make_shared<const GridPlanner<CarbonSchedulingEnv>>(env, carbon_model_class(), profile,
                                                                          CompetitiveSpec{2, 2}, PlanMode::raw,
                                                                          coarse_grid(), nu);
      },
      [&](std::uint64_t s) { return ModelSequence::from_seed(s, 24, profile); }, {2, 2}, o);
  EXPECT_EQ(r.multiplier, 0.0);
  for (const auto& e : r.episodes) EXPECT_EQ(e.multiplier, 0.0);
}

TEST(Policies, RandomAndAdversarialStayInBox) {
  const SustainableInferenceEnv env;
  const TanhNetPolicy<SustainableInferenceEnv> net(env, 4);
  const AdversarialPolicy<SustainableInferenceEnv> far{&env, AdversaryMode::far};
  CounterStream rng(1);
  for (int i = 0; i < 1000; ++i) {
    Observation<SustainableInferenceEnv> obs;
    obs.round = 1 + static_cast<int>(rng.below(24));
    obs.x = {rng.uniform(0, 10)};
    obs.inputs = {rng.uniform(0, 4), rng.uniform(0, 4)};
    obs.prior = env.prior_action(obs.round, obs.x, obs.inputs);
    EXPECT_TRUE(env.action_box().contains(net(obs)));
    const double a = far(obs)[0];
    EXPECT_TRUE(a == 0.0 || a == 8.0);
    EXPECT_GE(std::abs(a - obs.prior[0]), 4.0);
  }
}

}  // namespace
}  // namespace acmdp
