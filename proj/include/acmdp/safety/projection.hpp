#pragma once

#include <cmath>

#include "acmdp/core/types.hpp"
#include "acmdp/safety/ledger.hpp"

namespace acmdp {

template <std::size_t N>
struct SafeSet {
  Vec<N> center{};
  double radius = 0.0;

  bool contains(const Vec<N>& a) const { return distance(a, center) <= radius; }
};

template <std::size_t N>
SafeSet<N> safe_set(const SafetyLedger& ledger, const Vec<N>& prior_action) {
  return {prior_action, ledger.radius()};
}

/// Euclidean projection of target onto the ball of the given radius around center.
template <std::size_t N>
Vec<N> project_ball(const Vec<N>& target, const Vec<N>& center, double radius) {
  const double dist = distance(target, center);
  if (dist <= radius) return target;
  if (!(radius > 0.0)) return center;
  double scale = radius / dist;
  Vec<N> out{};
  for (int attempt = 0; attempt < 64; ++attempt) {
    for (std::size_t i = 0; i < N; ++i) out[i] = center[i] + scale * (target[i] - center[i]);
    if (distance(out, center) <= radius) return out;
    scale *= 1.0 - 0x1.0p-50;
  }
  return center;
}

/// Euclidean projection of target onto the intersection of the ball around center and the box.
/// The box must contain center. The minimizer has the form clamp((target + mu center) / (1 + mu))
/// for the smallest mu >= 0 that lands inside the ball.
template <std::size_t N>
Vec<N> project_ball_box(const Vec<N>& target, const Vec<N>& center, double radius, const Box<N>& bounds) {
  if (!(radius > 0.0)) return center;
  const auto at = [&](double mu) {
    Vec<N> v{};
    for (std::size_t i = 0; i < N; ++i) v[i] = (target[i] + mu * center[i]) / (1.0 + mu);
    return bounds.clamp(v);
  };
  Vec<N> a = bounds.clamp(target);
  if (distance(a, center) <= radius) return a;
  if constexpr (N == 1) {
    const Interval ball{std::max(center[0] - radius, bounds.dims[0].lo), std::min(center[0] + radius, bounds.dims[0].hi)};
    return {ball.clamp(target[0])};
  } else {
    double lo = 0.0, hi = 1.0;
    while (distance(at(hi), center) > radius && hi < 1e300) hi *= 2.0;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (distance(at(mid), center) > radius) lo = mid;
      else hi = mid;
    }
    return at(hi);
  }
}

/// Projects an ML action into the current safe set and the action box.
template <std::size_t N>
Vec<N> project(const SafetyLedger& ledger, const Vec<N>& ml_action, const Vec<N>& prior_action,
               const Box<N>& bounds) {
  if (!bounds.contains(prior_action)) throw SafetyFault("prior action outside action bounds");
  const double gamma = ledger.table().gamma(ledger.round(), ledger.round());
  const double budget = ledger.budget();
  Vec<N> a = project_ball_box(ml_action, prior_action, ledger.radius(), bounds);
  // Rounding in budget / gamma can leave gamma * distance a few ulps above the budget.
  for (int attempt = 0; attempt < 64 && gamma * distance(a, prior_action) > budget; ++attempt)
    for (std::size_t i = 0; i < N; ++i) a[i] = std::nextafter(a[i], prior_action[i]);
  if (gamma * distance(a, prior_action) > budget) a = prior_action;
  return a;
}

}  // namespace acmdp
