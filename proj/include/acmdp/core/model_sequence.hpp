#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "acmdp/core/random.hpp"
#include "acmdp/core/types.hpp"

namespace acmdp {

inline constexpr std::size_t kDrawsPerRound = 4;
using RoundDraw = std::array<double, kDrawsPerRound>;

/// Exogenous inputs revealed in a round (e.g. arrivals and renewables).
using Exogenous = std::array<double, 2>;

/// One episode's realized randomness: per-round uniforms plus exogenous inputs.
class ModelSequence {
 public:
  ModelSequence() = default;

  static ModelSequence from_seed(std::uint64_t seed, int horizon, std::vector<Exogenous> inputs = {}) {
    std::vector<RoundDraw> draws(static_cast<std::size_t>(horizon));
    for (int h = 1; h <= horizon; ++h) {
      const std::uint64_t round_seed = derive_seed(seed, static_cast<std::uint64_t>(h));
      for (std::size_t c = 0; c < kDrawsPerRound; ++c)
        draws[static_cast<std::size_t>(h - 1)][c] = to_unit(derive_seed(round_seed, c));
    }
    return ModelSequence(seed, std::move(draws), std::move(inputs));
  }

  static ModelSequence from_draws(std::uint64_t seed, std::vector<RoundDraw> draws,
                                  std::vector<Exogenous> inputs = {}) {
    return ModelSequence(seed, std::move(draws), std::move(inputs));
  }

  std::uint64_t seed() const { return seed_; }
  int horizon() const { return static_cast<int>(draws_.size()); }

  const RoundDraw& draw(int h) const {
    check(h);
    return draws_[static_cast<std::size_t>(h - 1)];
  }

  Exogenous inputs(int h) const {
    check(h);
    if (inputs_.empty()) return Exogenous{};
    return inputs_[static_cast<std::size_t>(h - 1)];
  }

  const std::vector<Exogenous>& all_inputs() const { return inputs_; }

 private:
  ModelSequence(std::uint64_t seed, std::vector<RoundDraw> draws, std::vector<Exogenous> inputs)
      : seed_(seed), draws_(std::move(draws)), inputs_(std::move(inputs)) {
    if (!inputs_.empty() && inputs_.size() != draws_.size())
      throw ConfigError("exogenous inputs must cover every round");
  }

  void check(int h) const {
    if (h < 1 || h > horizon())
      throw HorizonError("round " + std::to_string(h) + " outside 1.." + std::to_string(horizon()));
  }

  std::uint64_t seed_ = 0;
  std::vector<RoundDraw> draws_;
  std::vector<Exogenous> inputs_;
};

}  // namespace acmdp
