#pragma once

#include <memory>
#include <string>
#include <vector>

#include "acmdp/core/types.hpp"

namespace acmdp {

/// Sensitivity weights q(j, i) and their tail sums gamma(j, n), with 1-based rounds.
class SensitivityTable {
 public:
  SensitivityTable(int horizon, std::vector<double> weights) : horizon_(horizon), q_(std::move(weights)) {
    const auto H = static_cast<std::size_t>(horizon_);
    gamma_.assign((H + 2) * (H + 2), 0.0);
    for (int j = 1; j <= horizon_; ++j)
      for (int n = horizon_; n >= j; --n) gamma_[index2(j, n)] = gamma_[index2(j, n + 1)] + this->q(j, n);
  }

  int horizon() const { return horizon_; }

  double q(int j, int i) const {
    check(j);
    check(i);
    if (i < j) return 0.0;
    return q_[static_cast<std::size_t>((j - 1) * horizon_ + (i - 1))];
  }

  /// Sum of q(j, i) for i = n..H; zero past the horizon.
  double gamma(int j, int n) const {
    check(j);
    if (n < j) throw HorizonError("gamma(j, n) requires n >= j");
    if (n > horizon_) return 0.0;
    return gamma_[index2(j, n)];
  }

 private:
  std::size_t index2(int j, int n) const {
    return static_cast<std::size_t>(j) * static_cast<std::size_t>(horizon_ + 2) + static_cast<std::size_t>(n);
  }
  void check(int r) const {
    if (r < 1 || r > horizon_) throw HorizonError("round " + std::to_string(r) + " outside table");
  }

  int horizon_;
  std::vector<double> q_;
  std::vector<double> gamma_;
};

inline SensitivityTable build_sensitivity(const EnvParams& params, int horizon) {
  if (horizon < 1) throw ConfigError("horizon must be positive");
  params.perturbation.validate(horizon);
  const auto& L = params.lipschitz;
  const double spread = L.cost * (1.0 + L.prior) * L.transition;
  std::vector<double> q(static_cast<std::size_t>(horizon * horizon), 0.0);
  for (int j = 1; j <= horizon; ++j) {
    q[static_cast<std::size_t>((j - 1) * horizon + (j - 1))] = L.cost;
    for (int i = j + 1; i <= horizon; ++i)
      q[static_cast<std::size_t>((j - 1) * horizon + (i - 1))] = spread * params.perturbation(i - 1 - j);
  }
  return SensitivityTable(horizon, std::move(q));
}

inline std::shared_ptr<const SensitivityTable> make_sensitivity(const EnvParams& params) {
  return std::make_shared<const SensitivityTable>(build_sensitivity(params, params.horizon));
}

}  // namespace acmdp
