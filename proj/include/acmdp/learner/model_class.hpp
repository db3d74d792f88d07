#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "acmdp/core/types.hpp"
#include "acmdp/envs/carbon.hpp"
#include "acmdp/envs/sustainable.hpp"

namespace acmdp {

enum class BetaMode { logarithmic, theory };

/// Confidence radius schedule for the model set.
struct BetaSchedule {
  BetaMode mode = BetaMode::logarithmic;
  double beta0 = 1.0;
  double c1 = 1e-3;
  double c2 = 1.0;
  double value_bound = 1.0;
  int horizon = 1;

  double operator()(int k) const {
    if (k < 1) throw ConfigError("beta schedule is defined for k >= 1");
    if (mode == BetaMode::logarithmic) return beta0 * std::log(static_cast<double>(k) + 1.0);
    const double scale = value_bound * horizon;
    return c1 * scale * scale * (std::log(static_cast<double>(k)) + c2);
  }
};

inline BetaMode parse_beta_mode(const std::string& s) {
  if (s == "log") return BetaMode::logarithmic;
  if (s == "theory") return BetaMode::theory;
  throw ConfigError("unknown beta mode '" + s + "'");
}

/// Logged value predictions of every model in the class, one row per transition.
class ConfidenceTracker {
 public:
  explicit ConfidenceTracker(std::size_t models) : models_(models), losses_(models, 0.0) {
    if (models == 0) throw ConfigError("model class must be nonempty");
  }

  std::size_t models() const { return models_; }
  std::size_t transitions() const { return targets_.size(); }

  void add(const std::vector<double>& predictions, double target) {
    if (predictions.size() != models_) throw ValidationError("prediction row has the wrong width");
    for (std::size_t m = 0; m < models_; ++m) {
      const double e = predictions[m] - target;
      losses_[m] += e * e;
    }
    predictions_.insert(predictions_.end(), predictions.begin(), predictions.end());
    targets_.push_back(target);
  }

  const std::vector<double>& losses() const { return losses_; }

  /// Least-squares model; ties resolve to the lowest index.
  std::size_t fit() const {
    std::size_t best = 0;
    for (std::size_t m = 1; m < models_; ++m)
      if (losses_[m] < losses_[best]) best = m;
    return best;
  }

  /// Models whose predictions stay within beta (summed squares) of the fitted model's.
  std::vector<std::size_t> confidence_set(double beta) const {
    if (!(beta >= 0.0)) throw ConfigError("beta must be nonnegative");
    const std::size_t fitted = fit();
    std::vector<double> gap(models_, 0.0);
    for (std::size_t t = 0; t < targets_.size(); ++t) {
      const double* row = &predictions_[t * models_];
      for (std::size_t m = 0; m < models_; ++m) {
        const double e = row[m] - row[fitted];
        gap[m] += e * e;
      }
    }
    std::vector<std::size_t> out;
    for (std::size_t m = 0; m < models_; ++m)
      if (m == fitted || gap[m] <= beta) out.push_back(m);
    return out;
  }

 private:
  std::size_t models_;
  std::vector<double> losses_;
  std::vector<double> predictions_;
  std::vector<double> targets_;
};

/// Decay-floor by efficiency-center grid around the default carbon model.
inline std::vector<CarbonModel> carbon_model_class() {
  std::vector<CarbonModel> out;
  for (double decay : {0.8, 0.9, 0.95})
    for (double center : {0.7, 0.75, 0.8}) {
      CarbonModel g;
      g.decay_low = decay;
      g.efficiency_center = center;
      out.push_back(g);
    }
  return out;
}

/// Renewable-floor by efficiency-floor grid around the default sustainable model.
inline std::vector<SustainableModel> sustainable_model_class() {
  std::vector<SustainableModel> out;
  for (double renewable : {0.6, 0.8, 0.9})
    for (double eff : {0.5, 0.7, 0.85}) out.push_back({renewable, eff});
  return out;
}

template <class Model>
std::size_t index_of(const std::vector<Model>& models, const Model& g) {
  for (std::size_t i = 0; i < models.size(); ++i)
    if (models[i] == g) return i;
  throw ConfigError("model is not a member of the class");
}

}  // namespace acmdp
