/*
 * Copyright 2026 The riosim Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>

#include "CLI11.hpp"
#include "riosim/crashlab.hpp"
#include "riosim/sim.hpp"
#include "riosim/sweep.hpp"

using namespace riosim;

namespace {

CrashPlan parse_crash(const std::string& spec) {
  // kind[:target]@event
  CrashPlan p;
  if (spec.empty()) return p;
  const auto at = spec.find('@');
  if (at == std::string::npos) throw ConfigError("crash", "expected kind@event");
  std::string kind = spec.substr(0, at);
  p.at_event = std::stoull(spec.substr(at + 1));
  if (auto colon = kind.find(':'); colon != std::string::npos) {
    p.target = static_cast<TargetId>(std::stoul(kind.substr(colon + 1)));
    kind.resize(colon);
  }
  if (kind == "target")
    p.kind = CrashPlan::Kind::kTarget;
  else if (kind == "initiator")
    p.kind = CrashPlan::Kind::kInitiator;
  else if (kind == "cluster")
    p.kind = CrashPlan::Kind::kWholeCluster;
  else if (kind == "targets")
    p.kind = CrashPlan::Kind::kAllTargets;
  else
    throw ConfigError("crash", "unknown crash kind '" + kind + "'");
  return p;
}

void write_file(const std::string& path, const std::string& data) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << data;
}

std::string fmt(double x) {
  std::ostringstream o;
  o.precision(6);
  o << x;
  return o.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"riosim: ordered block storage over a simulated fabric"};
  app.require_subcommand(1);

  SimConfig cfg;
  std::string config_file, trace_path, report_path, crash_spec, workload = "journal3", mode = "rio",
                                                                  profile = "flash";
  std::vector<std::string> sets;

  auto* run = app.add_subcommand("run", "run one workload and report metrics");
  run->add_option("--mode", mode, "rio | sync_nvmeof | horae | orderless");
  run->add_option("--workload", workload, "journal3 | random4k | seq<N>k | batch(<k>) | ipu_mix(<p>)");
  run->add_option("--threads", cfg.threads);
  run->add_option("--targets", cfg.targets);
  run->add_option("--ssd-profile", profile, "flash | optane");
  run->add_option("--seed", cfg.seed);
  run->add_option("--groups", cfg.workload.groups_per_thread, "groups per thread");
  run->add_option("--iodepth", cfg.iodepth);
  run->add_option("--trace", trace_path, "JSON-lines trace output");
  run->add_option("--report", report_path, "JSON report output (stdout when omitted)");
  run->add_option("--config", config_file, "flat key=value file applied first");
  run->add_option("--set", sets, "key=value override, repeatable");
  run->add_option("--crash", crash_spec, "kind[:target]@event, kind in target|initiator|cluster|targets");

  std::uint32_t groups = 5, targets = 2, streams = 2;
  std::uint64_t bound = 2'000'000, seed = 1;
  std::uint32_t fuzz_runs = 0;
  std::string mutate;
  bool initiator_crash = false;
  auto* verify = app.add_subcommand("verify", "crash exploration against the validity oracle");
  verify->add_option("--groups", groups, "groups per stream");
  verify->add_option("--targets", targets);
  verify->add_option("--streams", streams);
  verify->add_option("--bound", bound, "maximum distinct states");
  verify->add_option("--seed", seed);
  verify->add_option("--mutate", mutate, "no_gate | eager_persist | no_flush_members");
  verify->add_option("--fuzz", fuzz_runs, "randomized timed runs instead of exhaustive search");
  verify->add_flag("--initiator-crash", initiator_crash, "also crash only the initiator at every state");

  std::string grid_path, out_path;
  unsigned jobs = std::max(1u, std::thread::hardware_concurrency());
  auto* sweep = app.add_subcommand("sweep", "run the cartesian product of a grid file");
  sweep->add_option("--grid", grid_path, "lines of key=v1,v2,...")->required();
  sweep->add_option("--config", config_file);
  sweep->add_option("--out", out_path, "CSV output (stdout when omitted)");
  sweep->add_option("--jobs", jobs);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      SimConfig base;
      if (!config_file.empty()) load_config_file(base, config_file);
      if (run->count("--mode")) base.mode = parse_mode(mode);
      if (run->count("--workload")) apply_config(base, "workload", workload);
      if (run->count("--ssd-profile")) apply_config(base, "ssd_profile", profile);
      if (run->count("--threads")) base.threads = cfg.threads;
      if (run->count("--targets")) base.targets = cfg.targets;
      if (run->count("--seed")) base.seed = cfg.seed;
      if (run->count("--groups")) base.workload.groups_per_thread = cfg.workload.groups_per_thread;
      if (run->count("--iodepth")) base.iodepth = cfg.iodepth;
      for (const auto& s : sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw ConfigError(s, "expected key=value");
        apply_config(base, trim(s.substr(0, eq)), trim(s.substr(eq + 1)));
      }
      base.trace = !trace_path.empty();
      Simulation sim(base);
      const MetricsReport r = sim.run(parse_crash(crash_spec));
      const std::string report = to_json(r).dump(2);
      if (!trace_path.empty()) write_file(trace_path, sim.trace() + to_json(r).dump() + "\n");
      if (report_path.empty())
        std::cout << report << "\n";
      else
        write_file(report_path, report + "\n");
      return r.finished || r.recovery ? 0 : 1;
    }

    if (*verify) {
      SimConfig c = explore_config(groups, targets, streams);
      c.seed = seed;
      apply_mutation(c, mutate);
      if (fuzz_runs > 0) {
        c.workload.kind = WorkloadKind::kJournal3;
        c.workload.groups_per_thread = groups;
        c.jitter_ticks = 10;
        c.pmr_capacity = 4096;
        auto v = fuzz(c, seed, fuzz_runs);
        std::cout << "fuzz runs=" << v.runs << " violations=" << v.violations << "\n";
        for (const auto& f : v.failures) std::cout << "  " << f << "\n";
        return v.violations == 0 ? 0 : 2;
      }
      ExploreOptions opt;
      opt.bound = bound;
      opt.initiator_crash = initiator_crash;
      auto v = explore_exhaustive(c, opt);
      std::cout << "states=" << v.states << " transitions=" << v.transitions << " schedules=" << v.schedules
                << " terminal=" << v.terminal_states << " violations=" << v.violations
                << " complete=" << (v.complete ? "yes" : "partial") << " seconds=" << fmt(v.seconds) << "\n";
      if (v.violations) std::cout << "counterexample:\n" << v.counterexample << "\n";
      return v.violations == 0 ? 0 : 2;
    }

    if (*sweep) {
      SimConfig base;
      if (!config_file.empty()) load_config_file(base, config_file);
      const std::string csv = to_csv(run_sweep(base, load_grid(grid_path), jobs));
      if (out_path.empty())
        std::cout << csv;
      else
        write_file(out_path, csv);
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error [" << e.key() << "]: " << e.what() << "\n";
    return 64;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
