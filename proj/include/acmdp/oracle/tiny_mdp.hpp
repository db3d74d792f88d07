#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "acmdp/core/environment.hpp"

namespace acmdp {

struct Rational {
  long long num = 0;
  long long den = 1;
  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
};

/// x' = clip(sx x + sa a + offset)
struct TinyFunction {
  double sx = 1.0;
  double sa = 0.0;
  double offset = 0.0;
};

/// c + x1 x + x2 x^2 + a1 a + a2 a^2 + xa x a
struct Quadratic {
  double c = 0.0, x1 = 0.0, x2 = 0.0, a1 = 0.0, a2 = 0.0, xa = 0.0;
  double operator()(double x, double a) const { return c + x1 * x + x2 * x * x + a1 * a + a2 * a * a + xa * x * a; }
};

struct TinyOverrides {
  std::optional<double> lipschitz_cost, lipschitz_transition, lipschitz_prior, rho, min_cost;
};

/// Enumerable scalar episodic MDP used as ground truth for the safety layer and the learner.
struct TinyMDP {
  static constexpr int kMaxHorizon = 5;
  static constexpr std::size_t kMaxFunctions = 4;
  static constexpr std::size_t kMaxGrid = 6;
  static constexpr std::size_t kMaxModels = 4;
  static constexpr double kMaxLeaves = 1e6;

  std::string name;
  int horizon = 1;
  Interval state_box{0.0, 1.0};
  Interval action_box{0.0, 1.0};
  double initial_state = 0.0;
  std::vector<double> ml_grid;
  std::vector<TinyFunction> functions;
  std::vector<std::vector<Rational>> models;
  std::size_t truth = 0;
  Quadratic cost;
  Quadratic reward;
  double prior_k0 = 0.0;
  double prior_k1 = 0.0;
  CompetitiveSpec spec;
  bool projection = true;
  TinyOverrides overrides;

  std::vector<double> probabilities(std::size_t model) const {
    std::vector<double> p;
    for (const auto& r : models.at(model)) p.push_back(r.value());
    return p;
  }
  std::vector<double> true_probabilities() const { return probabilities(truth); }

  double step(std::size_t k, double x, double a) const {
    const auto& f = functions.at(k);
    return state_box.clamp(f.sx * x + f.sa * a + f.offset);
  }
  double prior(double x) const { return action_box.clamp(prior_k0 + prior_k1 * x); }

  double leaves() const {
    return std::pow(static_cast<double>(functions.size() * ml_grid.size()), horizon);
  }

  /// Minimum of the separable convex cost over the boxes.
  double min_cost_over_box() const {
    const auto min1 = [](double q2, double q1, const Interval& iv) {
      double best = std::min(q2 * iv.lo * iv.lo + q1 * iv.lo, q2 * iv.hi * iv.hi + q1 * iv.hi);
      if (q2 > 0.0) {
        const double v = iv.clamp(-q1 / (2.0 * q2));
        best = std::min(best, q2 * v * v + q1 * v);
      }
      return best;
    };
    return cost.c + min1(cost.x2, cost.x1, state_box) + min1(cost.a2, cost.a1, action_box);
  }

  double computed_lipschitz_cost() const {
    const auto slope = [](double q2, double q1, const Interval& iv) {
      return std::max(std::abs(2.0 * q2 * iv.lo + q1), std::abs(2.0 * q2 * iv.hi + q1));
    };
    return std::max(slope(cost.x2, cost.x1, state_box), slope(cost.a2, cost.a1, action_box));
  }
  double computed_lipschitz_transition() const {
    double l = 0.0;
    for (const auto& f : functions) l = std::max({l, std::abs(f.sx), std::abs(f.sa)});
    return l;
  }
  double computed_rho() const {
    double r = 0.0;
    for (const auto& f : functions) r = std::max({r, std::abs(f.sx + f.sa * prior_k1), std::abs(f.sx)});
    return r;
  }

  EnvParams params() const {
    EnvParams p;
    p.horizon = horizon;
    p.state_bounds = {state_box};
    p.action_bounds = {action_box};
    p.lipschitz.cost = overrides.lipschitz_cost.value_or(computed_lipschitz_cost());
    p.lipschitz.transition = overrides.lipschitz_transition.value_or(computed_lipschitz_transition());
    p.lipschitz.prior = overrides.lipschitz_prior.value_or(std::abs(prior_k1));
    p.min_cost = overrides.min_cost.value_or(min_cost_over_box());
    p.perturbation = Perturbation::geometric(overrides.rho.value_or(computed_rho()), horizon);
    return p;
  }

  void validate() const {
    if (horizon < 1 || horizon > kMaxHorizon) throw ConfigError("tiny horizon must lie in 1..5");
    if (functions.empty() || functions.size() > kMaxFunctions) throw ConfigError("tiny needs 1..4 functions");
    if (ml_grid.empty() || ml_grid.size() > kMaxGrid) throw ConfigError("tiny needs 1..6 grid actions");
    if (models.empty() || models.size() > kMaxModels) throw ConfigError("tiny needs 1..4 models");
    if (truth >= models.size()) throw ConfigError("truth index outside model list");
    if (state_box.lo > state_box.hi || action_box.lo > action_box.hi) throw ConfigError("empty box");
    if (!state_box.contains(initial_state)) throw ConfigError("initial state outside state box");
    for (double a : ml_grid)
      if (!action_box.contains(a)) throw ConfigError("grid action outside action box");
    for (const auto& m : models) {
      if (m.size() != functions.size()) throw ConfigError("model length differs from function count");
      long long num = 0, den = 1;
      for (const auto& r : m) {
        if (r.den <= 0 || r.num < 0) throw ConfigError("probabilities must be nonnegative rationals");
        num = num * r.den + r.num * den;
        den *= r.den;
        const long long g = std::gcd(num, den);
        num /= g;
        den /= g;
      }
      if (num != den) throw ConfigError("model probabilities must sum to exactly 1");
    }
    if (cost.xa != 0.0 || cost.x2 < 0.0 || cost.a2 < 0.0)
      throw ConfigError("tiny cost must be separable and convex");
    if (min_cost_over_box() < 0.0) throw ConfigError("tiny cost must be nonnegative");
    spec.validate();
    const auto below = [](const std::optional<double>& v, double computed, const char* what) {
      if (v && *v < computed) throw ConfigError(std::string("override of ") + what + " below its certified value");
    };
    below(overrides.lipschitz_cost, computed_lipschitz_cost(), "lipschitz_cost");
    below(overrides.lipschitz_transition, computed_lipschitz_transition(), "lipschitz_transition");
    below(overrides.lipschitz_prior, std::abs(prior_k1), "lipschitz_prior");
    below(overrides.rho, computed_rho(), "rho");
    if (overrides.min_cost && *overrides.min_cost > min_cost_over_box())
      throw ConfigError("override of min_cost above its certified value");
    if (leaves() > kMaxLeaves) throw ConfigError("tiny enumeration exceeds 1e6 leaves");
  }
};

namespace detail {
inline std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

inline double tiny_number(const std::string& s, int line) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw ParseError("not a number: '" + s + "'", line);
  }
  if (used != s.size() || !std::isfinite(v)) throw ParseError("bad number '" + s + "'", line);
  return v;
}

inline Rational tiny_rational(const std::string& s, int line) {
  const auto slash = s.find('/');
  try {
    std::size_t used = 0;
    if (slash == std::string::npos) {
      const long long n = std::stoll(s, &used);
      if (used != s.size()) throw ParseError("bad rational '" + s + "'", line);
      return {n, 1};
    }
    const std::string a = s.substr(0, slash), b = s.substr(slash + 1);
    const long long n = std::stoll(a, &used);
    if (used != a.size()) throw ParseError("bad rational '" + s + "'", line);
    const long long d = std::stoll(b, &used);
    if (used != b.size() || d <= 0) throw ParseError("bad rational '" + s + "'", line);
    return {n, d};
  } catch (const ParseError&) {
    throw;
  } catch (const std::exception&) {
    throw ParseError("bad rational '" + s + "'", line);
  }
}

inline Quadratic tiny_quadratic(const std::vector<std::string>& toks, int line) {
  Quadratic q;
  for (const auto& t : toks) {
    const auto colon = t.find(':');
    if (colon == std::string::npos) throw ParseError("expected term:coefficient, got '" + t + "'", line);
    const std::string term = t.substr(0, colon);
    const double v = tiny_number(t.substr(colon + 1), line);
    if (term == "c") q.c = v;
    else if (term == "x") q.x1 = v;
    else if (term == "x2") q.x2 = v;
    else if (term == "a") q.a1 = v;
    else if (term == "a2") q.a2 = v;
    else if (term == "xa") q.xa = v;
    else throw ParseError("unknown quadratic term '" + term + "'", line);
  }
  return q;
}
}  // namespace detail

/// Parses the line-based fixture format: `key = values`, `#` starts a comment.
inline TinyMDP parse_tiny(std::istream& in, const std::string& fallback_name = "tiny") {
  TinyMDP t;
  t.name = fallback_name;
  std::string line;
  int lineno = 0;
  bool have_truth = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto toks_all = detail::split_ws(line);
    if (toks_all.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("expected 'key = value'", lineno);
    const auto key_toks = detail::split_ws(line.substr(0, eq));
    if (key_toks.size() != 1) throw ParseError("malformed key", lineno);
    const std::string& key = key_toks[0];
    const auto v = detail::split_ws(line.substr(eq + 1));
    const auto need = [&](std::size_t n) {
      if (v.size() != n) throw ParseError("'" + key + "' expects " + std::to_string(n) + " values", lineno);
    };
    const auto num = [&](std::size_t i) { return detail::tiny_number(v.at(i), lineno); };
    if (key == "name") {
      need(1);
      t.name = v[0];
    } else if (key == "horizon") {
      need(1);
      t.horizon = static_cast<int>(num(0));
    } else if (key == "state_box") {
      need(2);
      t.state_box = {num(0), num(1)};
    } else if (key == "action_box") {
      need(2);
      t.action_box = {num(0), num(1)};
    } else if (key == "initial_state") {
      need(1);
      t.initial_state = num(0);
    } else if (key == "ml_grid") {
      if (v.empty()) throw ParseError("ml_grid needs values", lineno);
      t.ml_grid.clear();
      for (std::size_t i = 0; i < v.size(); ++i) t.ml_grid.push_back(num(i));
    } else if (key == "function") {
      need(3);
      t.functions.push_back({num(0), num(1), num(2)});
    } else if (key == "model") {
      std::vector<Rational> m;
      for (const auto& s : v) m.push_back(detail::tiny_rational(s, lineno));
      t.models.push_back(std::move(m));
    } else if (key == "truth") {
      need(1);
      t.truth = static_cast<std::size_t>(num(0));
      have_truth = true;
    } else if (key == "cost") {
      t.cost = detail::tiny_quadratic(v, lineno);
    } else if (key == "reward") {
      t.reward = detail::tiny_quadratic(v, lineno);
    } else if (key == "prior") {
      need(2);
      t.prior_k0 = num(0);
      t.prior_k1 = num(1);
    } else if (key == "lambda") {
      need(1);
      t.spec.lambda = num(0);
    } else if (key == "b") {
      need(1);
      t.spec.b = num(0);
    } else if (key == "projection") {
      need(1);
      if (v[0] != "on" && v[0] != "off") throw ParseError("projection must be on or off", lineno);
      t.projection = v[0] == "on";
    } else if (key == "lipschitz_cost") {
      need(1);
      t.overrides.lipschitz_cost = num(0);
    } else if (key == "lipschitz_transition") {
      need(1);
      t.overrides.lipschitz_transition = num(0);
    } else if (key == "lipschitz_prior") {
      need(1);
      t.overrides.lipschitz_prior = num(0);
    } else if (key == "rho") {
      need(1);
      t.overrides.rho = num(0);
    } else if (key == "min_cost") {
      need(1);
      t.overrides.min_cost = num(0);
    } else {
      throw ParseError("unknown key '" + key + "'", lineno);
    }
  }
  if (!have_truth) t.truth = 0;
  t.validate();
  return t;
}

inline TinyMDP parse_tiny(const std::string& text, const std::string& fallback_name) {
  std::istringstream in(text);
  return parse_tiny(in, fallback_name);
}

inline TinyMDP load_tiny(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open fixture '" + path + "'");
  return parse_tiny(in, path);
}

/// Adapter exposing a TinyMDP through the environment contract. A model is a
/// probability vector over the fixture's transition functions.
class TinyEnv {
 public:
  static constexpr std::size_t kStateDim = 1;
  static constexpr std::size_t kActionDim = 1;
  using State = Vec<1>;
  using Action = Vec<1>;
  using Model = std::vector<double>;

  explicit TinyEnv(TinyMDP tiny) : tiny_(std::move(tiny)), params_(tiny_.params()), truth_(tiny_.true_probabilities()) {
    params_.validate();
  }

  const TinyMDP& tiny() const { return tiny_; }
  const EnvParams& params() const { return params_; }
  const Model& true_model() const { return truth_; }
  Box<1> state_box() const { return {{tiny_.state_box}}; }
  Box<1> action_box() const { return {{tiny_.action_box}}; }
  State initial_state(const ModelSequence&) const { return {tiny_.initial_state}; }
  Action initial_action() const { return {tiny_.prior(tiny_.initial_state)}; }

  static std::size_t select(const Model& g, double u) {
    double cum = 0.0;
    for (std::size_t k = 0; k < g.size(); ++k) {
      cum += g[k];
      if (u < cum) return k;
    }
    return g.size() - 1;
  }

  /// Uniform draw that selects function k under model g.
  static double draw_for(const Model& g, std::size_t k) {
    double lo = 0.0;
    for (std::size_t i = 0; i < k; ++i) lo += g[i];
    return lo + 0.5 * g[k];
  }

  Transition<State> transition(const Model& g, int, const State& x, const Action& a, const Action&, const Exogenous&,
                               const RoundDraw& u) const {
    const std::size_t k = select(g, u[0]);
    return {{tiny_.step(k, x[0], a[0])}, tiny_.cost(x[0], a[0]), tiny_.reward(x[0], a[0])};
  }

  Action prior_action(int, const State& x, const Exogenous&) const { return {tiny_.prior(x[0])}; }

 private:
  TinyMDP tiny_;
  EnvParams params_;
  Model truth_;
};

/// A model sequence under the true model, identified by its function indices.
struct EnumeratedSequence {
  std::vector<std::size_t> functions;
  double probability = 1.0;
  ModelSequence sequence;
};

/// Every function-index sequence of length H with its probability under the given model.
inline std::vector<EnumeratedSequence> enumerate_sequences(const TinyMDP& tiny, const std::vector<double>& model) {
  const std::size_t F = tiny.functions.size();
  const auto H = static_cast<std::size_t>(tiny.horizon);
  std::size_t total = 1;
  for (std::size_t i = 0; i < H; ++i) total *= F;
  std::vector<EnumeratedSequence> out;
  out.reserve(total);
  for (std::size_t idx = 0; idx < total; ++idx) {
    EnumeratedSequence e;
    std::size_t rest = idx;
    std::vector<RoundDraw> draws(H);
    for (std::size_t h = 0; h < H; ++h) {
      const std::size_t k = rest % F;
      rest /= F;
      e.functions.push_back(k);
      e.probability *= model[k];
      draws[h] = {TinyEnv::draw_for(model, k), 0.5, 0.5, 0.5};
    }
    if (e.probability == 0.0) continue;
    e.sequence = ModelSequence::from_draws(idx, std::move(draws));
    out.push_back(std::move(e));
  }
  return out;
}

inline std::string describe_functions(const std::vector<std::size_t>& fs) {
  std::string s = "f=[";
  for (std::size_t i = 0; i < fs.size(); ++i) s += (i ? "," : "") + std::to_string(fs[i]);
  return s + "]";
}

}  // namespace acmdp
