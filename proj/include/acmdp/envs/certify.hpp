#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <vector>

#include "acmdp/core/environment.hpp"
#include "acmdp/core/random.hpp"

namespace acmdp {

struct PriorCertificate {
  std::vector<double> p_hat;       // p_hat[k] for k = 0..horizon
  double lipschitz_hat = 0.0;
  std::vector<int> flagged;        // k where p_hat[k] exceeds the configured p(k)
  long long pairs_used = 0;
  long long pairs_skipped = 0;
};

struct CertifyOptions {
  int trials = 1000;
  int horizon = 8;
  double multiplier = 1.5;
  std::uint64_t seed = 1;
};

/// Monte-Carlo estimate of the prior's perturbation function and Lipschitz constant from
/// pairs of random start states driven by common randomness.
template <Environment Env, class Prior>
PriorCertificate certify_prior(const Env& env, Prior prior, const std::function<ModelSequence(std::uint64_t)>& episodes,
                               const CertifyOptions& opt) {
  const int H = env.params().horizon;
  const auto box = env.state_box();
  PriorCertificate out;
  out.p_hat.assign(static_cast<std::size_t>(opt.horizon + 1), 0.0);
  CounterStream rng(opt.seed);
  for (int t = 0; t < opt.trials; ++t) {
    const ModelSequence seq = episodes(derive_seed(opt.seed, static_cast<std::uint64_t>(t)));
    const int start = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(H)));
    typename Env::State x{}, y{};
    for (std::size_t i = 0; i < Env::kStateDim; ++i) {
      x[i] = rng.uniform(box.dims[i].lo, box.dims[i].hi);
      y[i] = rng.uniform(box.dims[i].lo, box.dims[i].hi);
    }
    const double gap0 = distance(x, y);
    if (!(gap0 > 0.0)) {
      ++out.pairs_skipped;
      continue;
    }
    ++out.pairs_used;
    auto px = prior(start, x, seq.inputs(start));
    auto py = prior(start, y, seq.inputs(start));
    out.lipschitz_hat = std::max(out.lipschitz_hat, distance(px, py) / gap0);
    auto prev_x = env.initial_action();
    auto prev_y = env.initial_action();
    for (int k = 0; k <= opt.horizon && start + k <= H; ++k) {
      auto& slot = out.p_hat[static_cast<std::size_t>(k)];
      slot = std::max(slot, distance(x, y) / gap0);
      if (start + k == H) break;
      const int h = start + k;
      const auto ax = prior(h, x, seq.inputs(h));
      const auto ay = prior(h, y, seq.inputs(h));
      x = env.transition(env.true_model(), h, x, ax, prev_x, seq.inputs(h), seq.draw(h)).next;
      y = env.transition(env.true_model(), h, y, ay, prev_y, seq.inputs(h), seq.draw(h)).next;
      prev_x = ax;
      prev_y = ay;
    }
  }
  for (auto& v : out.p_hat) v *= opt.multiplier;
  out.lipschitz_hat *= opt.multiplier;
  const auto& p = env.params().perturbation;
  for (int k = 1; k <= opt.horizon && k < p.size(); ++k)
    if (out.p_hat[static_cast<std::size_t>(k)] > p(k)) out.flagged.push_back(k);
  return out;
}

}  // namespace acmdp
