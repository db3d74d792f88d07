#include <gtest/gtest.h>

#include <string>

#include "acmdp/oracle/bound.hpp"
#include "acmdp/oracle/safety_check.hpp"

namespace acmdp {
namespace {

TinyMDP fixture(const std::string& name) { return load_tiny(std::string(ACMDP_FIXTURE_DIR) + "/" + name + ".tiny"); }

const std::vector<std::string> kSafeFixtures = {"backlog", "drift", "two_state", "zero_gap"};

TEST(TinyFormat, ParsesFixtures) {
  const auto t = fixture("backlog");
  EXPECT_EQ(t.name, "backlog");
  EXPECT_EQ(t.horizon, 4);
  EXPECT_EQ(t.functions.size(), 2u);
  EXPECT_EQ(t.ml_grid.size(), 5u);
  EXPECT_DOUBLE_EQ(t.params().lipschitz.cost, 3.0);
  EXPECT_DOUBLE_EQ(t.params().lipschitz.transition, 0.9);
  EXPECT_DOUBLE_EQ(t.params().perturbation(1), 0.9);
  EXPECT_DOUBLE_EQ(t.params().min_cost, 1.0);
}

TEST(TinyFormat, Rejections) {
  const std::string base = "horizon = 2\nml_grid = 0 1\nfunction = 1 0 0\n";
  try {
    parse_tiny(base + "model = 1\ncolour = red\n", "t");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 5);
  }
  EXPECT_THROW(parse_tiny("horizon = 2\nml_grid = 0 1\nfunction = 1 0 0\nfunction = 1 0 0\nmodel = 1/3 1/3\n", "t"),
               ConfigError);
  EXPECT_THROW(parse_tiny(base + "model = 1\nlipschitz_cost = 0\ncost = a:1\n", "t"), ConfigError);
  EXPECT_THROW(parse_tiny(base + "model = 1\ncost = xa:1\n", "t"), ConfigError);
  EXPECT_THROW(parse_tiny("horizon = 6\nml_grid = 0 1\nfunction = 1 0 0\nmodel = 1\n", "t"), ConfigError);
  EXPECT_THROW(load_tiny("/nonexistent/x.tiny"), IoError);
}

TEST(ExactDp, SingleRoundIsTableLookup) {
  const auto t = parse_tiny("horizon = 1\nml_grid = 0 0.5 1\nfunction = 1 0 0\nmodel = 1\nreward = a:3 a2:-2\n"
                            "lambda = 100\nb = 100\n",
                            "h1");
  double best = -1e300;
  for (double a : t.ml_grid) best = std::max(best, t.reward(t.initial_state, a));
  EXPECT_EQ(oracle::exact_dp(t, false), best);
  EXPECT_EQ(oracle::exact_dp(t, true), best);
}

TEST(ExactDp, LooseConstraintHasNoGap) {
  const auto t = fixture("zero_gap");
  EXPECT_EQ(oracle::exact_dp(t, true), oracle::exact_dp(t, false));
}

TEST(ExactDp, FrozenFixtureValues) {
  // Values computed once by enumeration and frozen.
  EXPECT_NEAR(oracle::exact_dp(fixture("backlog"), false), -1.129625, 1e-12);
  EXPECT_NEAR(oracle::exact_dp(fixture("backlog"), true), -1.93054838299, 1e-9);
  EXPECT_NEAR(oracle::exact_dp(fixture("two_state"), false), 4.5, 1e-12);
  EXPECT_NEAR(oracle::exact_dp(fixture("two_state"), true), 0.72, 1e-12);
}

TEST(ExactDp, ConstrainedNeverBeatsUnconstrained) {
  for (const auto& name : kSafeFixtures) {
    const auto t = fixture(name);
    EXPECT_GE(oracle::exact_dp(t, false), oracle::exact_dp(t, true) - 1e-12) << name;
  }
}

TEST(ExhaustiveSafety, NoViolationsOnAnyFixture) {
  for (const auto& name : kSafeFixtures) {
    const auto rep = oracle::exhaustive_safety_check(fixture(name));
    EXPECT_TRUE(rep.projection) << name;
    EXPECT_GT(rep.sequences, 0) << name;
    EXPECT_EQ(rep.violations, 0) << name << " " << rep.counterexample;
    EXPECT_EQ(rep.oracle_violations, 0) << name << " " << rep.counterexample;
    EXPECT_EQ(rep.disagreements, 0) << name;
  }
}

TEST(ExhaustiveSafety, ProjectionOffFindsCounterexample) {
  const auto t = fixture("negative/counterexample");
  const auto off = oracle::exhaustive_safety_check(t);
  EXPECT_FALSE(off.projection);
  EXPECT_GT(off.violations, 0);
  EXPECT_GT(off.oracle_violations, 0);
  EXPECT_FALSE(off.counterexample.empty());
  const auto on = oracle::exhaustive_safety_check(t, true);
  EXPECT_TRUE(on.passed());
  EXPECT_EQ(on.min_slack, 0.0);
}

TEST(ExhaustiveSafety, PriorAsMlAttainsPriorSlack) {
  const auto t = fixture("drift");
  const TinyEnv env(t);
  const auto table = make_sensitivity(env.params());
  const auto prior = [](const Observation<TinyEnv>& o) { return o.prior; };
  for (const auto& e : enumerate_sequences(t, t.true_probabilities())) {
    const auto pair = acd_paired_rollout(env, e.sequence, prior, t.spec, table);
    double expected = 1e300;
    for (std::size_t h = 0; h < pair.prior.rounds.size(); ++h)
      expected = std::min(expected, t.spec.lambda * pair.prior.rounds[h].cumulative_cost +
                                        static_cast<double>(h + 1) * t.spec.b);
    EXPECT_NEAR(anytime_check(pair.agent, pair.prior, t.spec).worst_slack, expected, 1e-12);
  }
}

TEST(TheoremBound, HoldsOnEveryFixture) {
  for (const auto& name : kSafeFixtures) {
    const auto c = oracle::theorem_bound(fixture(name));
    EXPECT_GE(c.regret, -1e-12) << name;
    EXPECT_LE(c.regret, c.rhs + 1e-12) << name;
  }
}

TEST(TheoremBound, ZeroWhenBudgetCoversDiscrepancy) {
  const auto c = oracle::theorem_bound(fixture("zero_gap"));
  EXPECT_TRUE(c.budget_covers_eta);
  EXPECT_EQ(c.rhs, 0.0);
  EXPECT_EQ(c.regret, 0.0);
}

TEST(BoundEval, Substitutions) {
  EnvParams p;
  p.horizon = 3;
  p.lipschitz = {1.0, 1.0, 0.0};
  p.perturbation = Perturbation::geometric(1.0, 3);
  const auto table = build_sensitivity(p, 3);
  EpisodeRecord<TinyEnv> rec;
  rec.rounds.resize(3);
  const std::vector<double> lq = {2.0, 1.0, 0.5};
  // No residual gain: sum of L_Q [eta - b / Gamma]^+ with Gamma = 3, 2, 1.
  EXPECT_NEAR(bound_eval(rec, {0.0, 1.0}, 0.0, table, lq, 1.0), 2.0 * (2.0 / 3.0) + 1.0 * 0.5 + 0.0, 1e-15);
  EXPECT_EQ(bound_eval(rec, {0.0, 3.0}, 0.0, table, lq, 1.0), 0.0);
  rec.rounds[1].residual = 2.0;
  EXPECT_NEAR(bound_eval(rec, {0.0, 1.0}, 0.0, table, lq, 1.0), 2.0 * (2.0 / 3.0), 1e-15);
  rec.rounds[0].residual = -5.0;
  EXPECT_NEAR(bound_eval(rec, {0.0, 1.0}, 0.0, table, lq, 1.0), 2.0 * (2.0 / 3.0), 1e-15);
}

}  // namespace
}  // namespace acmdp
