#pragma once

#include <algorithm>
#include <cmath>

#include "acmdp/core/environment.hpp"

namespace acmdp {

struct SustainableModel {
  double renewable_low = 0.8;   // V_e(e) ~ U[renewable_low e, e]
  double efficiency_low = 0.7;  // V_a(a) ~ U[efficiency_low a, a]

  bool operator==(const SustainableModel&) const = default;
};

enum class CarbonBMode { lipschitz, literal };

struct SustainableConfig {
  int horizon = 24;
  double battery_max = 10.0;
  double action_max = 8.0;
  double initial_charge = 5.0;
  double gamma1 = 0.5;
  double gamma2 = 2.0;
  double gamma3 = 0.1;
  double q1 = 1.0;
  double demand_weight = 1.0;
  double utility_scale = 1.0;
  double prior_slack = 1.0;
  double prior_renewable = 0.9;
  double prior_efficiency = 0.85;
  CarbonBMode prior_mode = CarbonBMode::lipschitz;
  double rho = 1.0;
  SustainableModel truth{};
};

/// Battery-backed inference serving: the state is the battery charge.
/// Inputs per round are (demand, renewables).
class SustainableInferenceEnv {
 public:
  static constexpr std::size_t kStateDim = 1;
  static constexpr std::size_t kActionDim = 1;
  using State = Vec<1>;
  using Action = Vec<1>;
  using Model = SustainableModel;

  explicit SustainableInferenceEnv(SustainableConfig cfg = {}) : cfg_(cfg) {
    if (cfg_.battery_max <= 0.0 || cfg_.action_max <= 0.0) throw ConfigError("bounds must be positive");
    if (cfg_.prior_efficiency <= 0.0) throw ConfigError("prior efficiency must be positive");
    if (cfg_.initial_charge < 0.0 || cfg_.initial_charge > cfg_.battery_max)
      throw ConfigError("initial charge outside battery bounds");
    params_.horizon = cfg_.horizon;
    params_.state_bounds = {{0.0, cfg_.battery_max}};
    params_.action_bounds = {{0.0, cfg_.action_max}};
    params_.lipschitz.cost = 2.0 * cfg_.q1 * cfg_.action_max;
    params_.lipschitz.transition = 1.0;
    params_.lipschitz.prior = 1.0 / cfg_.prior_efficiency;
    params_.min_cost = 0.0;
    params_.perturbation = Perturbation::geometric(cfg_.rho, cfg_.horizon);
    params_.validate();
  }

  const SustainableConfig& config() const { return cfg_; }
  const EnvParams& params() const { return params_; }
  const Model& true_model() const { return cfg_.truth; }
  Box<1> state_box() const { return {{Interval{0.0, cfg_.battery_max}}}; }
  Box<1> action_box() const { return {{Interval{0.0, cfg_.action_max}}}; }
  State initial_state(const ModelSequence&) const { return {cfg_.initial_charge}; }
  Action initial_action() const { return {0.0}; }
  double switching_curvature() const { return cfg_.gamma1; }

  /// The literal prior has a jump at its branch switch, so its exported constant is not a certificate.
  bool certified() const { return cfg_.prior_mode == CarbonBMode::lipschitz; }

  Transition<State> transition(const Model& g, int, const State& x, const Action& a, const Action& prev,
                               const Exogenous& in, const RoundDraw& u) const {
    const double demand = in[0];
    const double renewable = (g.renewable_low + (1.0 - g.renewable_low) * u[0]) * in[1];
    const double used = (g.efficiency_low + (1.0 - g.efficiency_low) * u[1]) * a[0];
    const double next = std::clamp(std::max(0.0, x[0] + renewable - used), 0.0, cfg_.battery_max);
    const double shortfall = std::max(0.0, used - x[0] - renewable);
    const double cost = cfg_.q1 * shortfall * shortfall;
    const double unmet = std::max(0.0, demand - a[0]);
    const double reward = -cfg_.demand_weight * unmet * unmet + cfg_.gamma2 * std::log1p(cfg_.utility_scale * a[0]) -
                          cfg_.gamma1 * (a[0] - prev[0]) * (a[0] - prev[0]) - cfg_.gamma3 * cost;
    return {{next}, cost, reward};
  }

  Action prior_action(int, const State& x, const Exogenous& in) const {
    return {prior_carbon_b(x[0], in[1], in[0], cfg_.prior_slack)};
  }

  /// Carbon-bounded prior: meet demand when stored plus renewable energy covers it,
  /// otherwise cap the estimated carbon cost at the slack.
  double prior_carbon_b(double x, double renewable, double demand, double slack) const {
    const double expected_renewable = cfg_.prior_renewable * renewable;
    const double capped = (x + expected_renewable + std::sqrt(std::max(0.0, slack) / cfg_.q1)) / cfg_.prior_efficiency;
    double a = 0.0;
    if (cfg_.prior_mode == CarbonBMode::lipschitz)
      a = std::min(demand, capped);
    else
      a = x + expected_renewable + slack >= demand ? demand : capped;
    return std::clamp(a, 0.0, cfg_.action_max);
  }

 private:
  SustainableConfig cfg_;
  EnvParams params_;
};

}  // namespace acmdp
