#pragma once

#include <algorithm>
#include <cmath>

#include <boost/math/special_functions/erf.hpp>

#include "acmdp/core/environment.hpp"

namespace acmdp {

/// Random-function parameters of the scheduling environment.
struct CarbonModel {
  double decay_low = 0.9;           // V_x(x) = u x with u ~ U[decay_low, 1]
  double efficiency_center = 0.8;   // V_a(a) = v a with v a truncated normal
  double efficiency_sd = 0.05;
  double efficiency_halfwidth = 0.2;

  bool operator==(const CarbonModel&) const = default;
};

struct CarbonConfig {
  int horizon = 24;
  double backlog_max = 12.0;
  double action_max = 8.0;
  double initial_backlog = 0.0;
  double gamma1 = 4.0;
  double gamma2 = 1.0;
  double revenue = 1.0;
  double alpha = 0.5;
  double q1 = 1.0;
  double q2 = 1.0;
  double q3 = 1.0;
  double prior_decay = 0.95;
  double prior_efficiency = 0.8;
  double rho = 1.0;
  CarbonModel truth{};
};

/// Inverse CDF of a normal truncated to [center - halfwidth, center + halfwidth].
inline double truncated_normal_quantile(double u, double center, double sd, double halfwidth) {
  if (sd <= 0.0 || halfwidth <= 0.0) return center;
  const auto cdf = [](double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); };
  const double lo = cdf(-halfwidth / sd);
  const double hi = cdf(halfwidth / sd);
  const double p = std::clamp(lo + u * (hi - lo), 1e-300, 1.0 - 1e-16);
  const double z = std::sqrt(2.0) * boost::math::erf_inv(2.0 * p - 1.0);
  return std::clamp(center + sd * z, center - halfwidth, center + halfwidth);
}

/// Carbon-aware workload scheduling: the state is the backlog of unprocessed demand.
/// Inputs per round are (arrivals, renewables).
class CarbonSchedulingEnv {
 public:
  static constexpr std::size_t kStateDim = 1;
  static constexpr std::size_t kActionDim = 1;
  using State = Vec<1>;
  using Action = Vec<1>;
  using Model = CarbonModel;

  explicit CarbonSchedulingEnv(CarbonConfig cfg = {}) : cfg_(cfg) {
    if (cfg_.backlog_max <= 0.0 || cfg_.action_max <= 0.0) throw ConfigError("bounds must be positive");
    if (cfg_.truth.efficiency_center + cfg_.truth.efficiency_halfwidth > 1.0 + 1e-12)
      throw ConfigError("efficiency support must stay within [0, 1] for the exported transition constant");
    params_.horizon = cfg_.horizon;
    params_.state_bounds = {{0.0, cfg_.backlog_max}};
    params_.action_bounds = {{0.0, cfg_.action_max}};
    params_.lipschitz.cost = 2.0 * cfg_.q1 * cfg_.backlog_max + std::abs(cfg_.q2);
    params_.lipschitz.transition = 1.0;
    params_.lipschitz.prior = cfg_.prior_decay / cfg_.prior_efficiency;
    params_.min_cost = min_cost_over_box();
    params_.perturbation = Perturbation::geometric(cfg_.rho, cfg_.horizon);
    params_.validate();
  }

  const CarbonConfig& config() const { return cfg_; }
  const EnvParams& params() const { return params_; }
  const Model& true_model() const { return cfg_.truth; }
  Box<1> state_box() const { return {{Interval{0.0, cfg_.backlog_max}}}; }
  Box<1> action_box() const { return {{Interval{0.0, cfg_.action_max}}}; }
  State initial_state(const ModelSequence&) const { return {cfg_.initial_backlog}; }
  Action initial_action() const { return {0.0}; }
  /// Coefficient of the quadratic switching penalty in the reward.
  double switching_curvature() const { return cfg_.gamma2; }

  double decay(const Model& g, const RoundDraw& u) const { return g.decay_low + (1.0 - g.decay_low) * u[0]; }
  double efficiency(const Model& g, const RoundDraw& u) const {
    return truncated_normal_quantile(u[1], g.efficiency_center, g.efficiency_sd, g.efficiency_halfwidth);
  }

  double cost(double x) const { return cfg_.q1 * x * x + cfg_.q2 * x + cfg_.q3; }

  Transition<State> transition(const Model& g, int, const State& x, const Action& a, const Action& prev,
                               const Exogenous& in, const RoundDraw& u) const {
    const double arrivals = in[0];
    const double renewables = in[1];
    const double processed = efficiency(g, u) * a[0];
    const double next = std::clamp(std::max(0.0, decay(g, u) * x[0] + arrivals - processed), 0.0, cfg_.backlog_max);
    const double brown = std::max(0.0, a[0] - renewables);
    const double revenue = cfg_.gamma1 * cfg_.revenue * std::pow(processed, cfg_.alpha);
    const double switching = cfg_.gamma2 * (a[0] - prev[0]) * (a[0] - prev[0]);
    return {{next}, cost(x[0]), -brown * brown + revenue - switching};
  }

  /// OPT-QoS prior: processes the predicted backlog under mean-valued estimates.
  Action prior_action(int, const State& x, const Exogenous& in) const { return {prior_opt_qos(x[0], in[0])}; }

  double prior_opt_qos(double x, double arrival_estimate) const {
    return std::clamp((cfg_.prior_decay * x + arrival_estimate) / cfg_.prior_efficiency, 0.0, cfg_.action_max);
  }

 private:
  double min_cost_over_box() const {
    double best = std::min(cost(0.0), cost(cfg_.backlog_max));
    if (cfg_.q1 > 0.0) {
      const double xs = -cfg_.q2 / (2.0 * cfg_.q1);
      if (xs > 0.0 && xs < cfg_.backlog_max) best = std::min(best, cost(xs));
    }
    return best;
  }

  CarbonConfig cfg_;
  EnvParams params_;
};

}  // namespace acmdp
