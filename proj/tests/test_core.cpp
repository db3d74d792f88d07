#include <gtest/gtest.h>

#include "acmdp/core/rollout.hpp"
#include "acmdp/envs/carbon.hpp"
#include "acmdp/safety/acd.hpp"

namespace acmdp {
namespace {

std::vector<Exogenous> flat_inputs(int H, double arrivals, double renewables) {
  return std::vector<Exogenous>(static_cast<std::size_t>(H), Exogenous{arrivals, renewables});
}

TEST(ModelSequence, SameSeedSameDraws) {
  const auto a = ModelSequence::from_seed(42, 24);
  const auto b = ModelSequence::from_seed(42, 24);
  for (int h = 1; h <= 24; ++h) EXPECT_EQ(a.draw(h), b.draw(h));
  const auto c = ModelSequence::from_seed(43, 24);
  EXPECT_NE(a.draw(1), c.draw(1));
}

TEST(ModelSequence, DrawsDependOnlyOnSeedAndRound) {
  const auto shortseq = ModelSequence::from_seed(7, 3);
  const auto longseq = ModelSequence::from_seed(7, 30);
  for (int h = 1; h <= 3; ++h) EXPECT_EQ(shortseq.draw(h), longseq.draw(h));
  for (int h = 1; h <= 30; ++h)
    for (double u : longseq.draw(h)) {
      EXPECT_GE(u, 0.0);
      EXPECT_LT(u, 1.0);
    }
}

TEST(ModelSequence, RoundOutsideHorizonThrows) {
  const auto s = ModelSequence::from_seed(1, 4);
  EXPECT_THROW(s.draw(0), HorizonError);
  EXPECT_THROW(s.draw(5), HorizonError);
}

TEST(EnvStep, CarbonPinnedDraws) {
  const CarbonSchedulingEnv env;
  // u = 0.5 gives a decay of 0.95; the median of the symmetric truncated normal is 0.8.
  const auto seq = ModelSequence::from_draws(0, std::vector<RoundDraw>(24, RoundDraw{0.5, 0.5, 0.5, 0.5}),
                                             flat_inputs(24, 5.0, 0.0));
  const auto t = env_step(env, seq, 1, {10.0}, {8.0}, {0.0});
  EXPECT_NEAR(t.next[0], 8.1, 1e-12);
  EXPECT_DOUBLE_EQ(t.cost, 10.0 * 10.0 + 10.0 + 1.0);
}

TEST(EnvStep, QosCostAtBacklogTwo) {
  const CarbonSchedulingEnv env;
  const auto seq = ModelSequence::from_seed(3, 24, flat_inputs(24, 1.0, 1.0));
  for (double a : {0.0, 3.0, 8.0}) EXPECT_DOUBLE_EQ(env_step(env, seq, 2, {2.0}, {a}, {0.0}).cost, 7.0);
}

TEST(EnvStep, EmptyingBacklogReachesZero) {
  const CarbonSchedulingEnv env;
  const auto seq = ModelSequence::from_draws(0, std::vector<RoundDraw>(24, RoundDraw{1.0, 0.5, 0.5, 0.5}),
                                             flat_inputs(24, 0.0, 0.0));
  EXPECT_EQ(env_step(env, seq, 1, {4.0}, {5.0}, {0.0}).next[0], 0.0);
}

TEST(EnvStep, RejectsOutOfBoundsActionAndLateRound) {
  const CarbonSchedulingEnv env;
  const auto seq = ModelSequence::from_seed(3, 30, flat_inputs(30, 1.0, 1.0));
  EXPECT_THROW(env_step(env, seq, 1, {1.0}, {8.5}, {0.0}), BoundsError);
  EXPECT_THROW(env_step(env, seq, 1, {1.0}, {-0.1}, {0.0}), BoundsError);
  EXPECT_THROW(env_step(env, seq, 25, {1.0}, {1.0}, {0.0}), HorizonError);
}

TEST(PairedRollout, PriorAgainstItself) {
  const CarbonSchedulingEnv env;
  const CompetitiveSpec spec{2.0, 2.0};
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto seq = ModelSequence::from_seed(s, 24, flat_inputs(24, 2.0, 1.0));
    PriorController<CarbonSchedulingEnv> ctl;
    const auto pair = paired_rollout(env, seq, ctl, spec);
    for (std::size_t i = 0; i < pair.agent.rounds.size(); ++i) {
      const auto& r = pair.agent.rounds[i];
      EXPECT_EQ(r.x, pair.prior.rounds[i].x);
      EXPECT_EQ(r.cost, pair.prior.rounds[i].cost);
      EXPECT_DOUBLE_EQ(r.slack, spec.lambda * r.prior_cumulative_cost + static_cast<double>(i + 1) * spec.b);
      EXPECT_GE(r.slack, 0.0);
    }
  }
}

TEST(PairedRollout, ReplayIsBitIdentical) {
  const CarbonSchedulingEnv env;
  const auto seq = ModelSequence::from_seed(99, 24, flat_inputs(24, 2.5, 1.5));
  const auto policy = [](const Observation<CarbonSchedulingEnv>& o) {
    return CarbonSchedulingEnv::Action{std::fmod(o.x[0] * 1.7 + o.round, 8.0)};
  };
  RawController<CarbonSchedulingEnv, decltype(policy)> c1{&env, policy}, c2{&env, policy};
  const auto a = rollout(env, seq, c1);
  const auto b = rollout(env, seq, c2);
  ASSERT_EQ(a.rounds.size(), b.rounds.size());
  for (std::size_t i = 0; i < a.rounds.size(); ++i) {
    EXPECT_EQ(a.rounds[i].x, b.rounds[i].x);
    EXPECT_EQ(a.rounds[i].reward, b.rounds[i].reward);
  }
}

TEST(PairedRollout, SingleDeviationStaysWithinTransitionConstant) {
  const CarbonSchedulingEnv env;
  const double lf = env.params().lipschitz.transition;
  CounterStream rng(5);
  for (std::uint64_t s = 0; s < 200; ++s) {
    const auto seq = ModelSequence::from_seed(s, 24, flat_inputs(24, rng.uniform(0, 4), rng.uniform(0, 4)));
    const double first = rng.uniform(0.0, 8.0);
    const auto policy = [&](const Observation<CarbonSchedulingEnv>& o) {
      return o.round == 1 ? CarbonSchedulingEnv::Action{first} : o.prior;
    };
    RawController<CarbonSchedulingEnv, decltype(policy)> ctl{&env, policy};
    const auto pair = paired_rollout(env, seq, ctl, CompetitiveSpec{});
    const double d1 = pair.agent.rounds[0].deviation;
    for (std::size_t i = 1; i < pair.agent.rounds.size(); ++i)
      EXPECT_LE(std::abs(pair.agent.rounds[i].x[0] - pair.prior.rounds[i].x[0]), lf * d1 + 1e-12);
  }
}

TEST(PairedRollout, ZeroArrivalsStayAtZero) {
  const CarbonSchedulingEnv env;
  const auto seq = ModelSequence::from_seed(11, 24, flat_inputs(24, 0.0, 0.0));
  PriorController<CarbonSchedulingEnv> ctl;
  const auto pair = paired_rollout(env, seq, ctl, CompetitiveSpec{});
  for (const auto* rec : {&pair.agent, &pair.prior})
    for (const auto& r : rec->rounds) EXPECT_EQ(r.x[0], 0.0);
}

TEST(PairedRollout, MismatchedSeedsRejected) {
  const CarbonSchedulingEnv env;
  PriorController<CarbonSchedulingEnv> ctl;
  auto a = rollout(env, ModelSequence::from_seed(1, 24, flat_inputs(24, 1, 1)), ctl);
  const auto b = rollout(env, ModelSequence::from_seed(2, 24, flat_inputs(24, 1, 1)), ctl);
  EXPECT_THROW(attach_prior(a, b, CompetitiveSpec{}), PairingError);
}

TEST(Perturbation, TableValidation) {
  EXPECT_NO_THROW(Perturbation::geometric(0.5, 4).validate(4));
  EXPECT_THROW(Perturbation::table({0.9, 0.5}).validate(2), ConfigError);
  EXPECT_THROW(Perturbation::table({1.0, -0.1}).validate(2), ConfigError);
  EXPECT_THROW(Perturbation::table({1.0}).validate(3), ConfigError);
}

}  // namespace
}  // namespace acmdp
