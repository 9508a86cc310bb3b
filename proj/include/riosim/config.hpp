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

#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "riosim/ssd.hpp"
#include "riosim/workload.hpp"

namespace riosim {

enum class Mode { kRio, kSync, kHorae, kOrderless };
enum class RecoveryPolicy { kDrop, kReplayIfBuffered };

inline std::string mode_name(Mode m) {
  switch (m) {
    case Mode::kRio: return "rio";
    case Mode::kSync: return "sync_nvmeof";
    case Mode::kHorae: return "horae";
    case Mode::kOrderless: return "orderless";
  }
  return "?";
}

class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string key, const std::string& what)
      : std::invalid_argument(key + ": " + what), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

struct SimConfig {
  Mode mode = Mode::kRio;
  WorkloadSpec workload;
  std::uint32_t threads = 1;
  std::uint32_t targets = 2;
  std::uint32_t ssds_per_target = 1;
  std::string ssd_profile = "flash";
  SsdProfile ssd = SsdProfile::flash();
  std::uint32_t stripe_unit_blocks = 32;
  std::uint32_t iodepth = 64;
  std::uint16_t num_queues = 0;  // 0: one per thread
  std::uint64_t base_latency_ticks = 20;
  std::uint64_t jitter_ticks = 10;
  std::uint64_t seed = 1;

  std::uint32_t plug_depth = 16;
  std::uint64_t plug_timeout_ticks = 20;
  bool merge = true;
  bool queue_affinity = true;
  bool unplug_per_group = true;
  bool flush_members = true;

  std::uint32_t pmr_capacity = PmrLog::kDefaultCapacity;
  std::uint64_t retry_ticks = 50;

  // CPU accounting, in ticks.
  std::uint64_t sw_request_ticks = 10;
  std::uint64_t attr_ticks = 1;
  std::uint64_t two_sided_initiator_ticks = 10;
  std::uint64_t two_sided_target_ticks = 10;
  std::uint64_t one_sided_initiator_ticks = 2;
  std::uint32_t cpu_cores = 0;  // 0: one per thread

  RecoveryPolicy recovery_policy = RecoveryPolicy::kDrop;
  std::string ipu_policy = "report-only";
  std::uint64_t target_downtime_ticks = 1000;
  std::uint32_t replay_copies = 1;

  // Mutation knobs for checker sanity runs.
  bool gate = true;
  bool eager_persist = false;

  bool trace = false;
  std::uint64_t max_events = 2'000'000'000ull;

  std::uint16_t queues() const { return num_queues ? num_queues : static_cast<std::uint16_t>(threads); }
  std::uint32_t cores() const { return cpu_cores ? cpu_cores : threads; }
};

namespace detail {

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "on" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "off" || v == "no") return false;
  throw ConfigError(key, "expected a boolean, got '" + v + "'");
}

inline std::uint64_t parse_u64(const std::string& key, const std::string& v, std::uint64_t lo = 0,
                               std::uint64_t hi = ~0ull) {
  std::size_t pos = 0;
  std::uint64_t x = 0;
  try {
    if (!v.empty() && v[0] == '-') throw std::invalid_argument("negative");
    x = std::stoull(v, &pos);
  } catch (const std::exception&) {
    throw ConfigError(key, "expected an unsigned integer, got '" + v + "'");
  }
  if (pos != v.size()) throw ConfigError(key, "expected an unsigned integer, got '" + v + "'");
  if (x < lo || x > hi) throw ConfigError(key, "value " + v + " out of range");
  return x;
}

}  // namespace detail

inline Mode parse_mode(const std::string& v) {
  if (v == "rio") return Mode::kRio;
  if (v == "sync" || v == "sync_nvmeof") return Mode::kSync;
  if (v == "horae") return Mode::kHorae;
  if (v == "orderless") return Mode::kOrderless;
  throw ConfigError("mode", "unknown mode '" + v + "'");
}

inline SsdProfile profile_by_name(const std::string& v) {
  if (v == "flash") return SsdProfile::flash();
  if (v == "optane") return SsdProfile::optane();
  throw ConfigError("ssd_profile", "unknown profile '" + v + "'");
}

// Applies one key=value setting. Unknown keys and bad values name the key.
inline void apply_config(SimConfig& c, const std::string& key, const std::string& v) {
  using detail::parse_bool;
  using detail::parse_u64;
  if (key == "mode") {
    c.mode = parse_mode(v);
  } else if (key == "workload") {
    try {
      c.workload = parse_workload(v, c.workload);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(key, e.what());
    }
  } else if (key == "threads") {
    c.threads = static_cast<std::uint32_t>(parse_u64(key, v, 1, 4096));
  } else if (key == "targets") {
    c.targets = static_cast<std::uint32_t>(parse_u64(key, v, 1, 64));
  } else if (key == "ssds_per_target") {
    c.ssds_per_target = static_cast<std::uint32_t>(parse_u64(key, v, 1, 64));
  } else if (key == "ssd_profile") {
    c.ssd = profile_by_name(v);
    c.ssd_profile = v;
  } else if (key == "write_ticks") {
    c.ssd.write_ticks = parse_u64(key, v, 1);
  } else if (key == "flush_ticks") {
    c.ssd.flush_ticks = parse_u64(key, v);
  } else if (key == "plp") {
    c.ssd.plp = parse_bool(key, v);
  } else if (key == "ssd_parallelism") {
    c.ssd.parallelism = static_cast<std::uint32_t>(parse_u64(key, v, 1, 1024));
  } else if (key == "write_jitter_ticks") {
    c.ssd.write_jitter_ticks = parse_u64(key, v);
  } else if (key == "max_transfer_blocks") {
    c.ssd.max_transfer_blocks = static_cast<std::uint32_t>(parse_u64(key, v, 1, record::kMaxLen));
  } else if (key == "stripe_unit_blocks") {
    c.stripe_unit_blocks = static_cast<std::uint32_t>(parse_u64(key, v, 1, 1u << 20));
  } else if (key == "iodepth") {
    c.iodepth = static_cast<std::uint32_t>(parse_u64(key, v, 1, 1u << 20));
  } else if (key == "groups_per_thread") {
    c.workload.groups_per_thread = static_cast<std::uint32_t>(parse_u64(key, v, 1, 1u << 24));
  } else if (key == "group_flush") {
    c.workload.flush = parse_bool(key, v);
  } else if (key == "num_queues") {
    c.num_queues = static_cast<std::uint16_t>(parse_u64(key, v, 0, 4096));
  } else if (key == "base_latency_ticks") {
    c.base_latency_ticks = parse_u64(key, v);
  } else if (key == "jitter_ticks") {
    c.jitter_ticks = parse_u64(key, v);
  } else if (key == "seed") {
    c.seed = parse_u64(key, v);
  } else if (key == "plug_depth") {
    c.plug_depth = static_cast<std::uint32_t>(parse_u64(key, v, 1, 1u << 20));
  } else if (key == "plug_timeout_ticks") {
    c.plug_timeout_ticks = parse_u64(key, v);
  } else if (key == "merge") {
    c.merge = parse_bool(key, v);
  } else if (key == "queue_affinity") {
    c.queue_affinity = parse_bool(key, v);
  } else if (key == "unplug_per_group") {
    c.unplug_per_group = parse_bool(key, v);
  } else if (key == "flush_members") {
    c.flush_members = parse_bool(key, v);
  } else if (key == "pmr_capacity") {
    c.pmr_capacity = static_cast<std::uint32_t>(parse_u64(key, v, 1, 1u << 24));
  } else if (key == "retry_ticks") {
    c.retry_ticks = parse_u64(key, v, 1);
  } else if (key == "sw_request_ticks") {
    c.sw_request_ticks = parse_u64(key, v);
  } else if (key == "attr_ticks") {
    c.attr_ticks = parse_u64(key, v);
  } else if (key == "two_sided_initiator_ticks") {
    c.two_sided_initiator_ticks = parse_u64(key, v);
  } else if (key == "two_sided_target_ticks") {
    c.two_sided_target_ticks = parse_u64(key, v);
  } else if (key == "one_sided_initiator_ticks") {
    c.one_sided_initiator_ticks = parse_u64(key, v);
  } else if (key == "cpu_cores") {
    c.cpu_cores = static_cast<std::uint32_t>(parse_u64(key, v, 0, 4096));
  } else if (key == "recovery_policy") {
    if (v == "drop")
      c.recovery_policy = RecoveryPolicy::kDrop;
    else if (v == "replay_if_buffered")
      c.recovery_policy = RecoveryPolicy::kReplayIfBuffered;
    else
      throw ConfigError(key, "expected drop or replay_if_buffered");
  } else if (key == "ipu_policy") {
    if (v != "report-only" && v != "erase-later-metadata") throw ConfigError(key, "unknown policy '" + v + "'");
    c.ipu_policy = v;
  } else if (key == "target_downtime_ticks") {
    c.target_downtime_ticks = parse_u64(key, v);
  } else if (key == "replay_copies") {
    c.replay_copies = static_cast<std::uint32_t>(parse_u64(key, v, 1, 16));
  } else if (key == "gate") {
    c.gate = parse_bool(key, v);
  } else if (key == "eager_persist") {
    c.eager_persist = parse_bool(key, v);
  } else if (key == "trace") {
    c.trace = parse_bool(key, v);
  } else if (key == "max_events") {
    c.max_events = parse_u64(key, v, 1);
  } else {
    throw ConfigError(key, "unknown configuration key");
  }
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Flat key=value text; '#' starts a comment.
inline void load_config_text(SimConfig& c, const std::string& text) {
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (auto h = line.find('#'); h != std::string::npos) line.resize(h);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(line, "expected key=value");
    apply_config(c, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

inline void load_config_file(SimConfig& c, const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("config", "cannot open " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  load_config_text(c, ss.str());
}

}  // namespace riosim
