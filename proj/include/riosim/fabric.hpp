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

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string_view>

#include "riosim/core.hpp"

namespace riosim {

enum class Op : std::uint8_t {
  kWriteSubmit,
  kCompletion,
  kFlush,
  kRecoveryFetch,
  kRecoveryReply,
  kReplay,
  kControl,       // ordering-metadata control path (Horae mode)
  kControlReply,
  kBusy,          // target log full, retry later
  kRelease,       // log space reclamation notice
};

inline std::string_view op_name(Op op) {
  switch (op) {
    case Op::kWriteSubmit: return "write-submit";
    case Op::kCompletion: return "completion";
    case Op::kFlush: return "flush";
    case Op::kRecoveryFetch: return "recovery-fetch";
    case Op::kRecoveryReply: return "recovery-reply";
    case Op::kReplay: return "replay";
    case Op::kControl: return "control";
    case Op::kControlReply: return "control-reply";
    case Op::kBusy: return "busy";
    case Op::kRelease: return "release";
  }
  return "?";
}

enum class CostClass : std::uint8_t { kTwoSided, kOneSided };

struct CompletionInfo {
  std::uint64_t unit_id = 0;
  TargetId target = 0;
  bool durable = false;
  Seq certifies_through = 0;  // nonzero on flush completions
};

struct FabricCommand {
  Op op = Op::kWriteSubmit;
  std::optional<RecordBytes> record;  // exactly one on write-submit and replay
  WriteRequest req;                   // payload, routing and chain hints
  CompletionInfo cpl;
  StreamId stream = 0;
  Seq release_through = 0;
  CostClass cost = CostClass::kTwoSided;
};

enum class Direction : std::uint8_t { kToTarget, kToInitiator };

// Completions travel on the queue paired 1:1 with the send queue.
struct ChannelKey {
  std::uint16_t queue = 0;
  TargetId target = 0;
  Direction dir = Direction::kToTarget;

  auto operator<=>(const ChannelKey&) const = default;
};

struct CpuCost {
  std::uint64_t initiator = 0;
  std::uint64_t target = 0;
};

struct FabricConfig {
  std::uint16_t num_queues = 1;
  std::uint64_t base_latency_ticks = 20;
  std::uint64_t jitter_ticks = 10;
  std::uint64_t seed = 1;
  std::uint64_t two_sided_initiator_ticks = 10;
  std::uint64_t two_sided_target_ticks = 10;
  std::uint64_t one_sided_initiator_ticks = 2;
};

// Multi-queue RC-like transport. Per-channel FIFO: jitter may delay the tail
// of a channel but never reorders within it. Different channels are unordered.
class Fabric {
 public:
  explicit Fabric(FabricConfig cfg) : cfg_(cfg), rng_(cfg.seed) {}

  const FabricConfig& config() const { return cfg_; }

  // Delivery time, or nullopt when the destination or source target is down
  // (the message is lost in flight).
  std::optional<SimTime> send(const ChannelKey& ch, const FabricCommand& cmd, SimTime now) {
    if (crashed_.contains(ch.target)) {
      ++dropped_;
      return std::nullopt;
    }
    const std::uint64_t jitter = cfg_.jitter_ticks ? rng_() % (cfg_.jitter_ticks + 1) : 0;
    SimTime at = now + cfg_.base_latency_ticks + jitter;
    SimTime& last = last_delivery_[ch];
    if (at < last) at = last;
    last = at;
    ++sent_[cmd.op];
    return at;
  }

  // Monotonic per-channel sequence, used to enforce FIFO when time is ignored.
  std::uint64_t next_channel_seq(const ChannelKey& ch) { return ++channel_seq_[ch]; }

  CpuCost cpu_cost(const FabricCommand& cmd) const {
    switch (cmd.op) {
      case Op::kCompletion:
      case Op::kControlReply:
      case Op::kBusy:
      case Op::kRelease:
        return {};  // responses are folded into the request's cost
      default:
        break;
    }
    if (cmd.cost == CostClass::kOneSided) return {cfg_.one_sided_initiator_ticks, 0};
    return {cfg_.two_sided_initiator_ticks, cfg_.two_sided_target_ticks};
  }

  void set_crashed(TargetId t, bool crashed) {
    if (crashed)
      crashed_.insert(t);
    else
      crashed_.erase(t);
  }
  bool crashed(TargetId t) const { return crashed_.contains(t); }

  std::uint64_t sent(Op op) const {
    auto it = sent_.find(op);
    return it == sent_.end() ? 0 : it->second;
  }
  std::uint64_t dropped() const { return dropped_; }

 private:
  FabricConfig cfg_;
  std::mt19937_64 rng_;
  std::map<ChannelKey, SimTime> last_delivery_;
  std::map<ChannelKey, std::uint64_t> channel_seq_;
  std::map<Op, std::uint64_t> sent_;
  std::set<TargetId> crashed_;
  std::uint64_t dropped_ = 0;
};

}  // namespace riosim
