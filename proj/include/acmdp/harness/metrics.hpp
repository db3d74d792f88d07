#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "acmdp/core/types.hpp"

namespace acmdp::harness {

inline constexpr int kCsvVersion = 1;

inline std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// One evaluation or training episode of one roster policy.
struct MetricsRow {
  std::uint64_t run_seed = 0;
  std::string phase;  // train or eval
  int episode = 0;
  std::string policy;
  double ret = 0.0;
  double regret = 0.0;         // against the frozen unconstrained reference
  double pseudo_regret = 0.0;  // against the frozen ACD-optimal reference
  bool violated = false;
  double worst_slack = 0.0;
  double max_violation_ratio = 0.0;
  double cost = 0.0;
};

struct CurveRow {
  std::uint64_t run_seed = 0;
  int episode = 0;
  std::string policy;
  double ret = 0.0;
  double pseudo_regret = 0.0;
  double average_pseudo_regret = 0.0;   // PReg(k) / k
  double windowed_pseudo_regret = 0.0;  // trailing-window mean
  double regret = 0.0;
  bool violated = false;
  double multiplier = 0.0;
  std::size_t selected = 0;
  std::size_t set_size = 0;
};

struct SweepRow {
  std::string param;
  double value = 0.0;
  std::string policy;
  double mean_regret = 0.0;
  double ci95 = 0.0;
  double violation_rate = 0.0;
};

inline std::string header_line(const std::string& kind) {
  return "# acmdp " + kind + " v" + std::to_string(kCsvVersion) + "\n";
}

inline std::string metrics_csv(const std::vector<MetricsRow>& rows) {
  std::string out = header_line("metrics");
  out += "seed,phase,episode,policy,return,regret,pseudo_regret,violated,worst_slack,max_violation_ratio,cost\n";
  for (const auto& r : rows)
    out += std::to_string(r.run_seed) + "," + r.phase + "," + std::to_string(r.episode) + "," + r.policy + "," +
           fmt(r.ret) + "," + fmt(r.regret) + "," + fmt(r.pseudo_regret) + "," + (r.violated ? "true" : "false") + "," +
           fmt(r.worst_slack) + "," + fmt(r.max_violation_ratio) + "," + fmt(r.cost) + "\n";
  return out;
}

inline std::string curve_csv(const std::vector<CurveRow>& rows) {
  std::string out = header_line("learning_curve");
  out += "seed,episode,policy,return,pseudo_regret,avg_pseudo_regret,windowed_pseudo_regret,regret,violated,"
         "multiplier,selected,set_size\n";
  for (const auto& r : rows)
    out += std::to_string(r.run_seed) + "," + std::to_string(r.episode) + "," + r.policy + "," + fmt(r.ret) + "," +
           fmt(r.pseudo_regret) + "," + fmt(r.average_pseudo_regret) + "," + fmt(r.windowed_pseudo_regret) + "," +
           fmt(r.regret) + "," + (r.violated ? "true" : "false") + "," + fmt(r.multiplier) + "," +
           std::to_string(r.selected) + "," + std::to_string(r.set_size) + "\n";
  return out;
}

inline std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out = header_line("sweep");
  out += "param,value,policy,mean_regret,ci95,violation_rate\n";
  for (const auto& r : rows)
    out += r.param + "," + fmt(r.value) + "," + r.policy + "," + fmt(r.mean_regret) + "," + fmt(r.ci95) + "," +
           fmt(r.violation_rate) + "\n";
  return out;
}

inline void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << bytes;
  if (!out) throw IoError("write failed for '" + path + "'");
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace acmdp::harness
