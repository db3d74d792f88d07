#include <cstdio>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "acmdp/harness/runner.hpp"

using namespace acmdp;
using namespace acmdp::harness;

namespace {

struct Common {
  std::string config;
  std::string seeds;
  std::string out;
  int jobs = 1;
};

ExperimentConfig load(const Common& c) {
  auto cfg = load_config(c.config);
  if (!c.seeds.empty()) cfg.seeds = parse_seed_range(c.seeds);
  cfg.validate();
  return cfg;
}

void print_summary(const RunResult& r) {
  std::cout << "run " << r.directory << "\n";
  std::cout << "config_hash " << hex64(r.config_hash) << " content_hash " << r.content_hash << "\n";
  for (const auto& s : r.summary)
    std::printf("%-11s episodes %lld violations %lld mean_return %.4f mean_regret %.4f mean_pseudo_regret %.4f\n",
                s.policy.c_str(), s.episodes, s.violations, s.mean_return, s.mean_regret, s.mean_pseudo_regret);
  if (!r.gate_passed) std::cout << "SAFETY GATE FAILED: an ACD-wrapped policy violated the anytime constraint\n";
}

std::vector<double> parse_values(const std::string& s) {
  std::vector<double> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw ConfigError("");
    } catch (const std::exception&) {
      throw ConfigError("sweep value '" + item + "' is not a number");
    }
  }
  return out;
}

int dispatch(int argc, char** argv) {
  CLI::App app{"Anytime-competitive MDP experiments"};
  app.require_subcommand(1);

  Common run_opts, sweep_opts, ref_opts;
  const auto add_common = [](CLI::App* sub, Common& c, bool with_jobs) {
    sub->add_option("--config", c.config, "experiment config (JSON)")->required();
    sub->add_option("--seeds", c.seeds, "run seeds as a..b");
    sub->add_option("--out", c.out, "output root (default: config, then $ACMDP_OUTPUT_ROOT, then ./results)");
    if (with_jobs) sub->add_option("--jobs", c.jobs, "worker threads")->check(CLI::PositiveNumber);
  };

  auto* run_cmd = app.add_subcommand("run", "train and evaluate every roster policy");
  add_common(run_cmd, run_opts, true);

  auto* sweep_cmd = app.add_subcommand("sweep", "one run per grid value, aggregated");
  add_common(sweep_cmd, sweep_opts, true);
  std::string over, values;
  sweep_cmd->add_option("--over", over, "lambda, b or beta0")->required();
  sweep_cmd->add_option("--values", values, "comma-separated grid")->required();

  auto* ref_cmd = app.add_subcommand("reference", "train and freeze a reference policy");
  add_common(ref_cmd, ref_opts, false);
  std::string kind = "unconstrained";
  ref_cmd->add_option("--kind", kind, "unconstrained or acd_optimal")
      ->check(CLI::IsMember({"unconstrained", "acd_optimal"}));

  auto* verify_cmd = app.add_subcommand("verify", "oracle checks on tiny fixtures");
  std::vector<std::string> fixtures;
  verify_cmd->add_option("fixtures", fixtures, "fixture files or directories (default: ./fixtures)");

  auto* trace_cmd = app.add_subcommand("trace-info", "summarize a trace file");
  std::string trace_path;
  double scale = 1.0;
  int horizon = 24, stride = 24;
  trace_cmd->add_option("trace", trace_path, "CSV trace")->required();
  trace_cmd->add_option("--scale", scale, "multiplier applied to every value");
  trace_cmd->add_option("--horizon", horizon, "episode length")->check(CLI::PositiveNumber);
  trace_cmd->add_option("--stride", stride, "window stride")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  if (*run_cmd) {
    const auto cfg = load(run_opts);
    const auto r = run(cfg, output_root(run_opts.out, cfg), run_opts.jobs);
    print_summary(r);
    return r.exit_code();
  }
  if (*sweep_cmd) {
    const auto cfg = load(sweep_opts);
    const auto r = sweep(cfg, parse_sweep_param(over), parse_values(values), output_root(sweep_opts.out, cfg),
                         sweep_opts.jobs);
    std::cout << "sweep " << r.directory << "\n";
    for (const auto& row : r.rows)
      std::printf("%s=%g %-11s mean_regret %.4f ci95 %.4f violation_rate %.4f\n", row.param.c_str(), row.value,
                  row.policy.c_str(), row.mean_regret, row.ci95, row.violation_rate);
    return r.exit_code();
  }
  if (*ref_cmd) {
    const auto cfg = load(ref_opts);
    const auto r = reference(cfg, kind == "acd_optimal", output_root(ref_opts.out, cfg));
    std::printf("reference %s %s mean_return %.6f over %zu episodes\n", kind.c_str(), r.directory.c_str(),
                r.mean_return, r.returns.size());
    return kExitOk;
  }
  if (*verify_cmd) {
    if (fixtures.empty()) fixtures.push_back("fixtures");
    const auto rep = verify(fixtures);
    for (const auto& w : rep.warnings) std::cout << "warning: " << w << "\n";
    for (const auto& f : rep.fixtures) {
      std::printf("%-16s %s sequences %lld min_slack %.6g dp_gap %.3g/%.3g regret %.6g bound %.6g\n", f.fixture.c_str(),
                  f.passed ? "PASS" : "FAIL", f.safety.sequences, f.safety.min_slack, f.dp_gap_acd, f.dp_gap_raw,
                  f.theorem.regret, f.theorem.rhs);
      if (!f.passed) std::cout << "  " << f.reason << "\n";
    }
    return rep.exit_code();
  }
  const auto info = trace_info(trace_path, scale, horizon, stride);
  std::printf("trace %s length %d min %.6g max %.6g mean %.6g windows %d\n", info.name.c_str(), info.length, info.min,
              info.max, info.mean, info.windows);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return dispatch(argc, argv);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitIo;
  } catch (const ParseError& e) {
    std::cerr << "parse error (line " << e.line() << "): " << e.what() << "\n";
    return kExitIo;
  } catch (const ValidationError& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kExitIo;
  } catch (const SafetyFault& e) {
    std::cerr << "safety fault: " << e.what() << "\n";
    return kExitSafetyFault;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}
