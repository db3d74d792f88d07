#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "acmdp/core/model_sequence.hpp"
#include "acmdp/core/random.hpp"
#include "acmdp/core/types.hpp"

namespace acmdp {

struct Trace {
  std::string name;
  std::vector<double> values;
  std::string source;
  double scale = 1.0;

  int size() const { return static_cast<int>(values.size()); }
};

enum class SynthKind { constant, sinusoidal, spiky };

inline SynthKind parse_synth_kind(const std::string& s) {
  if (s == "constant") return SynthKind::constant;
  if (s == "sinusoidal") return SynthKind::sinusoidal;
  if (s == "spiky") return SynthKind::spiky;
  throw ConfigError("unknown synthetic trace kind '" + s + "'");
}

namespace detail {
inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& s, int line) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw ParseError("not a number: '" + s + "'", line);
  }
  if (used != s.size()) throw ParseError("trailing characters in '" + s + "'", line);
  return v;
}
}  // namespace detail

/// Reads a `timestamp,value` CSV and multiplies every value by scale.
inline Trace load_trace(const std::string& path, double scale, int min_length = 1) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open trace file '" + path + "'");
  Trace t{path, {}, "file", scale};
  std::string line;
  int lineno = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string row = detail::trim(line);
    if (row.empty()) continue;
    if (!header_seen) {
      if (row != "timestamp,value") throw ParseError("expected header 'timestamp,value'", lineno);
      header_seen = true;
      continue;
    }
    const auto comma = row.find(',');
    if (comma == std::string::npos || row.find(',', comma + 1) != std::string::npos)
      throw ParseError("expected two comma-separated fields", lineno);
    if (detail::trim(row.substr(0, comma)).empty()) throw ParseError("missing timestamp", lineno);
    const double v = detail::parse_double(detail::trim(row.substr(comma + 1)), lineno) * scale;
    if (!std::isfinite(v)) throw ValidationError("non-finite value at line " + std::to_string(lineno));
    if (v < 0.0) throw ValidationError("negative value at line " + std::to_string(lineno));
    t.values.push_back(v);
  }
  if (t.size() < min_length)
    throw ValidationError("trace has " + std::to_string(t.size()) + " values, fewer than " + std::to_string(min_length));
  return t;
}

/// Deterministic synthetic trace with values in [0, 2 level]; sinusoids have a 24-step period.
inline Trace synth_trace(SynthKind kind, int length, std::uint64_t seed, double level) {
  if (length < 0 || !(level >= 0.0)) throw ConfigError("synthetic trace needs length >= 0 and level >= 0");
  Trace t{"synthetic", std::vector<double>(static_cast<std::size_t>(length)), "synthetic", 1.0};
  CounterStream rng(seed);
  for (int i = 0; i < length; ++i) {
    double v = level;
    switch (kind) {
      case SynthKind::constant:
        break;
      case SynthKind::sinusoidal:
        v = level * (1.0 + std::sin(2.0 * std::numbers::pi * static_cast<double>(i % 24) / 24.0));
        break;
      case SynthKind::spiky: {
        const double base = level * (0.5 + 0.5 * rng.uniform());
        v = rng.uniform() < 0.1 ? level * (1.0 + rng.uniform()) : base;
        break;
      }
    }
    t.values[static_cast<std::size_t>(i)] = std::clamp(v, 0.0, 2.0 * level);
  }
  return t;
}

inline int window_count(int length, int horizon, int stride) {
  if (horizon < 1 || stride < 1) throw ConfigError("horizon and stride must be positive");
  if (length < horizon) return 0;
  return (length - horizon) / stride + 1;
}

inline std::vector<double> window(const Trace& t, int horizon, int stride, int index) {
  if (index < 0 || index >= window_count(t.size(), horizon, stride)) throw HorizonError("window index out of range");
  const auto start = t.values.begin() + static_cast<std::ptrdiff_t>(index) * stride;
  return {start, start + horizon};
}

/// Builds episode inputs from two aligned traces by windowing plus multiplicative jitter.
class TraceEpisodes {
 public:
  TraceEpisodes(Trace first, Trace second, int horizon, int stride, double jitter)
      : first_(std::move(first)), second_(std::move(second)), horizon_(horizon), stride_(stride), jitter_(jitter) {
    if (jitter_ < 0.0 || jitter_ >= 1.0) throw ConfigError("jitter must lie in [0, 1)");
    windows_ = std::min(window_count(first_.size(), horizon_, stride_), window_count(second_.size(), horizon_, stride_));
    if (windows_ < 1) throw ValidationError("traces shorter than the horizon");
  }

  int windows() const { return windows_; }
  int horizon() const { return horizon_; }

  std::vector<Exogenous> inputs(std::uint64_t seed) const {
    CounterStream rng(derive_seed(seed, 0x7472616365ULL));
    const int w = static_cast<int>(rng.below(static_cast<std::uint64_t>(windows_)));
    const auto a = window(first_, horizon_, stride_, w);
    const auto b = window(second_, horizon_, stride_, w);
    std::vector<Exogenous> out(static_cast<std::size_t>(horizon_));
    for (std::size_t i = 0; i < out.size(); ++i) {
      const double ja = 1.0 + jitter_ * (2.0 * rng.uniform() - 1.0);
      const double jb = 1.0 + jitter_ * (2.0 * rng.uniform() - 1.0);
      out[i] = {a[i] * ja, b[i] * jb};
    }
    return out;
  }

  ModelSequence sequence(std::uint64_t seed) const { return ModelSequence::from_seed(seed, horizon_, inputs(seed)); }

  /// Per-round mean over all windows, without jitter.
  std::vector<Exogenous> mean_profile() const {
    std::vector<Exogenous> out(static_cast<std::size_t>(horizon_), Exogenous{0.0, 0.0});
    for (int w = 0; w < windows_; ++w) {
      const auto a = window(first_, horizon_, stride_, w);
      const auto b = window(second_, horizon_, stride_, w);
      for (std::size_t i = 0; i < out.size(); ++i) {
        out[i][0] += a[i] / windows_;
        out[i][1] += b[i] / windows_;
      }
    }
    return out;
  }

 private:
  Trace first_;
  Trace second_;
  int horizon_;
  int stride_;
  double jitter_;
  int windows_ = 0;
};

}  // namespace acmdp
