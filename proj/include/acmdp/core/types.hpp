#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace acmdp {

template <std::size_t N>
using Vec = std::array<double, N>;

template <std::size_t N>
double norm(const Vec<N>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

template <std::size_t N>
double distance(const Vec<N>& a, const Vec<N>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < N; ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

class BoundsError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class HorizonError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

class PairingError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, int line)
      : std::runtime_error(what + " (line " + std::to_string(line) + ")"), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

/// Raised when a ledger precondition fails; signals a defect, never a data condition.
class SafetyFault : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  bool contains(double v) const { return v >= lo && v <= hi; }
  double clamp(double v) const { return std::clamp(v, lo, hi); }
  double span() const { return hi - lo; }
  double max_abs() const { return std::max(std::abs(lo), std::abs(hi)); }
};

template <std::size_t N>
struct Box {
  std::array<Interval, N> dims{};

  bool contains(const Vec<N>& v) const {
    for (std::size_t i = 0; i < N; ++i)
      if (!dims[i].contains(v[i])) return false;
    return true;
  }
  Vec<N> clamp(const Vec<N>& v) const {
    Vec<N> out{};
    for (std::size_t i = 0; i < N; ++i) out[i] = dims[i].clamp(v[i]);
    return out;
  }
  double diameter() const {
    double s = 0.0;
    for (const auto& d : dims) s += d.span() * d.span();
    return std::sqrt(s);
  }
};

struct LipschitzConstants {
  double cost = 0.0;
  double transition = 0.0;
  double prior = 0.0;
};

/// Perturbation function p(h) of the prior, stored as a table over 0..H-1.
class Perturbation {
 public:
  Perturbation() = default;

  static Perturbation geometric(double rho, int horizon) {
    std::vector<double> v(static_cast<std::size_t>(std::max(horizon, 1)));
    double p = 1.0;
    for (auto& e : v) {
      e = p;
      p *= rho;
    }
    return Perturbation(std::move(v));
  }

  static Perturbation table(std::vector<double> values) { return Perturbation(std::move(values)); }

  double operator()(int h) const {
    if (h < 0 || static_cast<std::size_t>(h) >= values_.size())
      throw HorizonError("perturbation index " + std::to_string(h) + " outside table");
    return values_[static_cast<std::size_t>(h)];
  }

  int size() const { return static_cast<int>(values_.size()); }
  const std::vector<double>& values() const { return values_; }

  void validate(int horizon) const {
    if (size() < horizon) throw ConfigError("perturbation table shorter than horizon");
    if (values_.empty() || values_[0] != 1.0) throw ConfigError("perturbation must satisfy p(0) = 1");
    for (double v : values_)
      if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("perturbation values must be finite and >= 0");
  }

 private:
  explicit Perturbation(std::vector<double> v) : values_(std::move(v)) {}
  std::vector<double> values_{1.0};
};

/// Environment certificate consumed by the safety layer.
struct EnvParams {
  int horizon = 1;
  std::size_t state_dim = 1;
  std::size_t action_dim = 1;
  std::vector<Interval> state_bounds;
  std::vector<Interval> action_bounds;
  LipschitzConstants lipschitz;
  double min_cost = 0.0;
  Perturbation perturbation;

  void validate() const {
    if (horizon < 1) throw ConfigError("horizon must be positive");
    if (state_bounds.size() != state_dim || action_bounds.size() != action_dim)
      throw ConfigError("bounds do not match dimensions");
    for (const auto* bounds : {&state_bounds, &action_bounds})
      for (const auto& iv : *bounds)
        if (!std::isfinite(iv.lo) || !std::isfinite(iv.hi) || iv.lo > iv.hi)
          throw ConfigError("bounds must be finite and ordered");
    if (lipschitz.cost < 0 || lipschitz.transition < 0 || lipschitz.prior < 0)
      throw ConfigError("Lipschitz constants must be nonnegative");
    if (!(min_cost >= 0.0)) throw ConfigError("min_cost must be nonnegative");
    perturbation.validate(horizon);
  }
};

struct CompetitiveSpec {
  double lambda = 0.0;
  double b = 0.0;

  void validate() const {
    if (!(lambda >= 0.0) || !(b >= 0.0) || !std::isfinite(lambda) || !std::isfinite(b))
      throw ConfigError("lambda and b must be finite and nonnegative");
  }
};

}  // namespace acmdp
