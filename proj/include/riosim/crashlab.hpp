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

#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "riosim/sim.hpp"

namespace riosim {

// Decides validity of a post-recovery state from the submission history and
// block contents alone. Shares nothing with the recovery code path.
class ValidStateOracle {
 public:
  using Reader = std::function<std::optional<Fingerprint>(std::uint64_t)>;

  struct StreamVerdict {
    bool valid = true;
    Seq k = 0;
    std::string reason;
  };

  // Groups 1..k fully present, every later group fully absent.
  static StreamVerdict check_stream(const std::map<Seq, std::vector<BlockWrite>>& groups, const Reader& read) {
    StreamVerdict v;
    bool absent_seen = false;
    Seq first_absent = 0;
    for (const auto& [g, blocks] : groups) {
      std::size_t present = 0;
      for (const auto& b : blocks) {
        auto f = read(b.lba);
        if (f && *f == b.fp) ++present;
      }
      if (present != 0 && present != blocks.size()) {
        v.valid = false;
        v.reason = "group " + std::to_string(g) + " partially durable (" + std::to_string(present) + "/" +
                   std::to_string(blocks.size()) + " blocks)";
        return v;
      }
      if (present == 0) {
        if (!absent_seen) first_absent = g;
        absent_seen = true;
        continue;
      }
      if (absent_seen) {
        v.valid = false;
        v.reason = "group " + std::to_string(g) + " durable after missing group " + std::to_string(first_absent);
        return v;
      }
      v.k = g;
    }
    return v;
  }

  // The valid subsets for n single-block groups, by brute force over all 2^n
  // presence patterns.
  static std::vector<std::uint32_t> valid_subsets(std::uint32_t n) {
    std::vector<std::uint32_t> out;
    for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
      std::map<Seq, std::vector<BlockWrite>> groups;
      for (std::uint32_t g = 0; g < n; ++g) groups[g + 1] = {{g, 1000 + g}};
      auto read = [&](std::uint64_t lba) -> std::optional<Fingerprint> {
        if (mask & (1u << lba)) return 1000 + lba;
        return std::nullopt;
      };
      if (check_stream(groups, read).valid) out.push_back(mask);
    }
    return out;
  }

  struct Verdict {
    bool valid = true;
    std::map<StreamId, Seq> k;
    std::string reason;
  };

  // Full check on a recovered simulation, including the durability contract:
  // a group whose flush was acknowledged to the application survives.
  static Verdict check(const Simulation& sim) {
    Verdict v;
    auto read = [&](std::uint64_t lba) { return sim.read_block(lba); };
    for (StreamId s = 0; s < sim.history().size(); ++s) {
      auto sv = check_stream(sim.history()[s], read);
      v.k[s] = sv.k;
      if (!sv.valid) {
        v.valid = false;
        v.reason = "stream " + std::to_string(s) + ": " + sv.reason;
        return v;
      }
      if (sv.k < sim.max_acked_flush(s)) {
        v.valid = false;
        v.reason = "stream " + std::to_string(s) + ": acknowledged flush group " +
                   std::to_string(sim.max_acked_flush(s)) + " lost (prefix " + std::to_string(sv.k) + ")";
        return v;
      }
    }
    return v;
  }
};

struct ExploreOptions {
  std::uint64_t bound = 2'000'000;  // distinct states
  bool initiator_crash = false;     // also check an initiator-only crash at every state
  // Called with each recovered copy; lets callers collect outcomes.
  std::function<void(const Simulation&, const ValidStateOracle::Verdict&)> observe;
};

struct ExploreVerdict {
  std::uint64_t states = 0;
  std::uint64_t transitions = 0;
  std::uint64_t schedules = 0;  // crash points checked
  std::uint64_t terminal_states = 0;
  std::uint64_t violations = 0;
  bool complete = true;  // false when the bound cut exploration short
  std::string counterexample;
  double seconds = 0;
};

// Stateful depth-first search over every interleaving of fabric deliveries
// (FIFO per channel), SSD completions and flush cycles. Every distinct state
// is crashed, recovered and judged by the oracle.
inline ExploreVerdict explore_exhaustive(const SimConfig& cfg, const ExploreOptions& opt = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  ExploreVerdict v;
  Simulation root(cfg, true);
  root.start();

  std::unordered_map<std::uint64_t, std::pair<std::uint64_t, std::string>> parent;
  std::unordered_set<std::uint64_t> visited;
  struct Node {
    Simulation sim;
    std::uint64_t hash;
  };
  std::vector<Node> stack;
  const std::uint64_t h0 = root.state_hash();
  visited.insert(h0);
  stack.push_back({std::move(root), h0});

  auto path_of = [&](std::uint64_t h) {
    std::vector<std::string> steps;
    while (true) {
      auto it = parent.find(h);
      if (it == parent.end()) break;
      steps.push_back(it->second.second);
      h = it->second.first;
    }
    std::string s;
    for (auto it = steps.rbegin(); it != steps.rend(); ++it) s += *it + "\n";
    return s;
  };
  auto judge = [&](Simulation& c, std::uint64_t h, const char* what) {
    auto verdict = ValidStateOracle::check(c);
    ++v.schedules;
    if (opt.observe) opt.observe(c, verdict);
    if (!verdict.valid) {
      if (v.violations++ == 0) v.counterexample = path_of(h) + what + " crash: " + verdict.reason;
    }
  };

  while (!stack.empty()) {
    Node node = std::move(stack.back());
    stack.pop_back();
    ++v.states;
    {
      Simulation c = node.sim;
      c.crash_whole_cluster();
      judge(c, node.hash, "whole-cluster");
    }
    if (opt.initiator_crash) {
      Simulation c = node.sim;
      c.crash_initiator();
      judge(c, node.hash, "initiator");
    }
    const auto en = node.sim.enabled();
    if (en.empty()) {
      ++v.terminal_states;
      if (!node.sim.finished()) {
        if (v.violations++ == 0) v.counterexample = path_of(node.hash) + "quiescent before all groups completed";
      }
      continue;
    }
    for (auto idx : en) {
      Simulation child = node.sim;
      const auto& ev = child.pending().at(idx).ev;
      std::string desc = "event#" + std::to_string(ev.index());
      if (const auto* d = std::get_if<EvDeliver>(&ev))
        desc = std::string("deliver ") + std::string(op_name(d->cmd.op)) + " unit " +
               std::to_string(d->cmd.req.unit_id ? d->cmd.req.unit_id : d->cmd.cpl.unit_id) + " q" +
               std::to_string(d->ch.queue) + (d->ch.dir == Direction::kToTarget ? " ->t" : " <-t") +
               std::to_string(d->ch.target);
      else if (const auto* w = std::get_if<EvWriteDone>(&ev))
        desc = "write-done t" + std::to_string(w->target) + " op " + std::to_string(w->op);
      else if (const auto* f = std::get_if<EvFlushEnd>(&ev))
        desc = "flush-end t" + std::to_string(f->target);
      child.fire(idx);
      ++v.transitions;
      const std::uint64_t h = child.state_hash();
      if (!visited.insert(h).second) continue;
      parent.emplace(h, std::make_pair(node.hash, std::move(desc)));
      if (visited.size() > opt.bound) {
        v.complete = false;
        continue;
      }
      stack.push_back({std::move(child), h});
    }
  }
  v.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return v;
}

struct FuzzVerdict {
  std::uint64_t runs = 0;
  std::uint64_t violations = 0;
  std::vector<std::string> failures;
  std::vector<std::uint64_t> trace_hashes;
};

// Randomized crash injection on timed runs, one crash per run.
inline FuzzVerdict fuzz(SimConfig base, std::uint64_t seed, std::uint32_t runs) {
  FuzzVerdict v;
  std::mt19937_64 rng(seed);
  for (std::uint32_t i = 0; i < runs; ++i) {
    SimConfig c = base;
    c.seed = rng();
    // Length of the crash-free run bounds the crash point.
    std::uint64_t total;
    {
      Simulation probe(c);
      probe.run();
      total = std::max<std::uint64_t>(probe.events_processed(), 1);
    }
    CrashPlan plan;
    const auto pick = rng() % 4;
    plan.kind = pick == 0   ? CrashPlan::Kind::kInitiator
                : pick == 1 ? CrashPlan::Kind::kTarget
                            : CrashPlan::Kind::kWholeCluster;
    plan.target = static_cast<TargetId>(rng() % c.targets);
    plan.at_event = rng() % total;
    Simulation sim(c);
    sim.run(plan);
    ++v.runs;
    std::string problem;
    if (plan.kind == CrashPlan::Kind::kTarget) {
      if (!sim.finished()) problem = "run did not finish after target recovery";
      else {
        auto verdict = ValidStateOracle::check(sim);
        if (!verdict.valid) problem = verdict.reason;
      }
    } else {
      auto verdict = ValidStateOracle::check(sim);
      if (!verdict.valid) problem = verdict.reason;
    }
    Hasher h;
    h.add(sim.events_processed());
    h.add(sim.state_hash());
    v.trace_hashes.push_back(h.value());
    if (!problem.empty()) {
      ++v.violations;
      if (v.failures.size() < 8)
        v.failures.push_back("seed " + std::to_string(c.seed) + " crash@" + std::to_string(*plan.at_event) + ": " + problem);
    }
  }
  return v;
}

// Mutation knobs that disable a protocol mechanism, for checker sanity runs.
inline void apply_mutation(SimConfig& c, const std::string& knob) {
  if (knob.empty() || knob == "none") return;
  if (knob == "no_gate")
    c.gate = false;
  else if (knob == "eager_persist")
    c.eager_persist = true;
  else if (knob == "no_flush_members")
    c.flush_members = false;
  else
    throw ConfigError("mutate", "unknown mutation '" + knob + "'");
}

// Small instance used by `verify` and the acceptance suite.
inline SimConfig explore_config(std::uint32_t groups, std::uint32_t targets, std::uint32_t streams) {
  SimConfig c;
  c.mode = Mode::kRio;
  c.workload.kind = WorkloadKind::kChain;
  c.workload.groups_per_thread = groups;
  c.threads = streams;
  c.targets = targets;
  c.ssds_per_target = 1;
  c.ssd = SsdProfile::flash();
  c.ssd.parallelism = 1;
  c.stripe_unit_blocks = 4;
  c.num_queues = 2;
  c.queue_affinity = false;
  c.jitter_ticks = 0;
  c.pmr_capacity = 64;
  return c;
}

}  // namespace riosim
