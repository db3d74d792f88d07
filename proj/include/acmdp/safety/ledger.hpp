#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "acmdp/safety/sensitivity.hpp"
#include "json.hpp"

namespace acmdp {

struct LedgerRow {
  double cost = 0.0;
  double deviation = 0.0;
  double prior_cost_bound = 0.0;
};

/// Per-episode record of realized costs and deviations together with the
/// deviation budget they imply.
class SafetyLedger {
 public:
  SafetyLedger(CompetitiveSpec spec, std::shared_ptr<const SensitivityTable> table, double min_cost)
      : spec_(spec), table_(std::move(table)), min_cost_(min_cost) {
    spec_.validate();
    if (!table_) throw ConfigError("ledger requires a sensitivity table");
    if (!(min_cost_ >= 0.0)) throw ConfigError("min_cost must be nonnegative");
    budget_ = per_round_allowance();
    history_.reserve(static_cast<std::size_t>(table_->horizon()));
  }

  const CompetitiveSpec& spec() const { return spec_; }
  const SensitivityTable& table() const { return *table_; }
  const std::shared_ptr<const SensitivityTable>& table_ptr() const { return table_; }
  double min_cost() const { return min_cost_; }
  const std::vector<LedgerRow>& history() const { return history_; }

  /// Current round h (1-based); H + 1 once the episode is closed.
  int round() const { return static_cast<int>(history_.size()) + 1; }
  double budget() const { return budget_; }
  double per_round_allowance() const { return spec_.lambda * min_cost_ + spec_.b; }

  /// R_{h-1} for round h, recomputed from the stored history.
  double residual(int h) const {
    if (h < 1 || h > round()) throw HorizonError("residual requested for an unrecorded round");
    double r = 0.0;
    for (int i = 1; i < h; ++i) {
      const auto& row = history_[static_cast<std::size_t>(i - 1)];
      r += (1.0 + spec_.lambda) * row.prior_cost_bound - row.cost - table_->gamma(i, h) * row.deviation;
    }
    return r;
  }
  double residual() const { return residual(round()); }

  /// Radius of the safe ball at the current round.
  double radius() const {
    const double g = table_->gamma(round(), round());
    if (g <= 0.0) return budget_ > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
    return budget_ / g;
  }

  /// Closes the current round with its realized deviation and cost; returns the next budget.
  double update_budget(double deviation, double cost) {
    const int h = round();
    if (h > table_->horizon()) throw HorizonError("ledger already closed");
    if (!(deviation >= 0.0) || !std::isfinite(cost)) throw SafetyFault("invalid deviation or cost");
    const double spent = table_->gamma(h, h) * deviation;
    if (spent > budget_ * (1.0 + 1e-12) + 1e-14)
      throw SafetyFault("deviation exceeds budget at round " + std::to_string(h) + ": " + std::to_string(spent) +
                        " > " + std::to_string(budget_));
    double propagated = 0.0;
    for (int j = 1; j < h; ++j) propagated += table_->q(j, h) * history_[static_cast<std::size_t>(j - 1)].deviation;
    propagated += table_->q(h, h) * deviation;
    history_.push_back({cost, deviation, std::max(min_cost_, cost - propagated)});
    const double allowance = per_round_allowance();
    budget_ = std::max(budget_ + allowance - spent, residual(h + 1) + allowance);
    return budget_;
  }

 private:
  CompetitiveSpec spec_;
  std::shared_ptr<const SensitivityTable> table_;
  double min_cost_;
  double budget_ = 0.0;
  std::vector<LedgerRow> history_;
};

inline SafetyLedger init_ledger(const CompetitiveSpec& spec, std::shared_ptr<const SensitivityTable> table,
                                double min_cost) {
  return SafetyLedger(spec, std::move(table), min_cost);
}

/// Debug dump: round, budget, residual and history rows.
inline nlohmann::json to_json(const SafetyLedger& ledger) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : ledger.history())
    rows.push_back({{"cost", r.cost}, {"deviation", r.deviation}, {"prior_cost_bound", r.prior_cost_bound}});
  return {{"round", ledger.round()},
          {"budget", ledger.budget()},
          {"residual", ledger.residual()},
          {"lambda", ledger.spec().lambda},
          {"b", ledger.spec().b},
          {"min_cost", ledger.min_cost()},
          {"history", rows}};
}

}  // namespace acmdp
