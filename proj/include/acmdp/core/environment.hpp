#pragma once

#include <concepts>
#include <cstddef>
#include <string>

#include "acmdp/core/model_sequence.hpp"
#include "acmdp/core/types.hpp"

namespace acmdp {

template <class State>
struct Transition {
  State next{};
  double cost = 0.0;
  double reward = 0.0;
};

/// Episodic environment contract. A model parametrizes the random functions; the
/// environment's true model generates the realized data.
template <class E>
concept Environment = requires(const E& env, const typename E::Model& g, const ModelSequence& seq, int h,
                               const typename E::State& x, const typename E::Action& a, const Exogenous& in,
                               const RoundDraw& u) {
  requires std::same_as<typename E::State, Vec<E::kStateDim>>;
  requires std::same_as<typename E::Action, Vec<E::kActionDim>>;
  { env.params() } -> std::convertible_to<const EnvParams&>;
  { env.true_model() } -> std::convertible_to<const typename E::Model&>;
  { env.state_box() } -> std::same_as<Box<E::kStateDim>>;
  { env.action_box() } -> std::same_as<Box<E::kActionDim>>;
  { env.initial_state(seq) } -> std::same_as<typename E::State>;
  { env.initial_action() } -> std::same_as<typename E::Action>;
  { env.transition(g, h, x, a, a, in, u) } -> std::same_as<Transition<typename E::State>>;
  { env.prior_action(h, x, in) } -> std::same_as<typename E::Action>;
};

/// One validated step of the true dynamics using the round-h draws of seq.
template <Environment Env>
Transition<typename Env::State> env_step(const Env& env, const ModelSequence& seq, int h,
                                         const typename Env::State& x, const typename Env::Action& a,
                                         const typename Env::Action& prev) {
  const EnvParams& p = env.params();
  if (h < 1 || h > p.horizon) throw HorizonError("round " + std::to_string(h) + " beyond horizon");
  if (!env.action_box().contains(a)) throw BoundsError("action outside action bounds");
  if (!env.state_box().contains(x)) throw BoundsError("state outside state bounds");
  auto t = env.transition(env.true_model(), h, x, a, prev, seq.inputs(h), seq.draw(h));
  if (!(t.cost >= p.min_cost)) throw SafetyFault("environment emitted a cost below its declared minimum");
  return t;
}

}  // namespace acmdp
