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

#include <algorithm>
#include <cstdint>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "riosim/core.hpp"
#include "riosim/target.hpp"

namespace riosim {

enum class RecoveryMode { kInitiator, kTargetFailure };

struct StreamOrder {
  Seq base = 0;    // released before the crash
  Seq prefix = 0;  // k: groups base+1..k are complete
  std::vector<Seq> list;
  std::set<Seq> drop;
  std::set<Seq> replay;
};

struct GlobalOrderingList {
  std::map<StreamId, StreamOrder> streams;
  bool corrupt = false;
  std::vector<std::string> errors;

  Seq prefix(StreamId s) const {
    auto it = streams.find(s);
    return it == streams.end() ? 0 : it->second.prefix;
  }
};

namespace detail {

struct Piece {
  TargetId target;
  OrderingAttribute attr;
};

// Rejoins split parts. A parent counts only when every part is present.
inline std::vector<Piece> remerge_splits(const std::vector<Piece>& in) {
  std::vector<Piece> out;
  std::map<std::pair<Seq, std::uint16_t>, std::map<std::pair<std::uint64_t, std::uint16_t>, Piece>> parts;
  for (const auto& p : in) {
    if (!p.attr.split) {
      out.push_back(p);
      continue;
    }
    parts[{p.attr.seq_start, p.attr.split->part_count}].insert({{p.attr.lba, p.attr.split->part_index}, p});
  }
  for (auto& [key, byloc] : parts) {
    const std::uint16_t count = key.second;
    for (const auto& [loc, first] : byloc) {
      if (loc.second != 0) continue;
      OrderingAttribute whole = first.attr;
      whole.split.reset();
      std::uint64_t next_lba = first.attr.lba + first.attr.len;
      bool complete = true;
      for (std::uint16_t i = 1; i < count; ++i) {
        auto it = byloc.find({next_lba, i});
        if (it == byloc.end()) {
          complete = false;
          break;
        }
        whole.len += it->second.attr.len;
        whole.flush = whole.flush || it->second.attr.flush;
        next_lba += it->second.attr.len;
      }
      if (complete) out.push_back({first.target, whole});
    }
  }
  return out;
}

}  // namespace detail

// Merges per-server lists into the global ordering list.
//
// Initiator mode keeps the longest complete prefix per stream and drops every
// later group that left a live record anywhere. Target-failure mode never
// drops; incomplete later groups are scheduled for replay instead.
inline GlobalOrderingList merge_lists(const std::vector<ServerList>& servers, RecoveryMode mode,
                                      const std::set<TargetId>& failed = {}) {
  GlobalOrderingList g;
  std::set<StreamId> streams;
  for (const auto& sl : servers) {
    for (const auto& [s, v] : sl.valid) streams.insert(s);
    for (const auto& [s, v] : sl.live) streams.insert(s);
    for (const auto& [s, v] : sl.watermarks) streams.insert(s);
    if (sl.corrupt) g.errors.push_back("target " + std::to_string(sl.target) + " log truncated: " + sl.error);
  }

  for (StreamId s : streams) {
    StreamOrder so;
    for (const auto& sl : servers)
      if (auto it = sl.watermarks.find(s); it != sl.watermarks.end()) so.base = std::max(so.base, it->second);

    std::vector<detail::Piece> pieces;
    std::set<Seq> on_failed;
    for (const auto& sl : servers) {
      if (auto it = sl.valid.find(s); it != sl.valid.end())
        for (const auto& r : it->second)
          if (r.attr.seq_end > so.base) pieces.push_back({sl.target, r.attr});
      if (failed.contains(sl.target))
        if (auto it = sl.live.find(s); it != sl.live.end())
          for (const auto& r : it->second) on_failed.insert(r.attr.seq_end);
    }
    const auto whole = detail::remerge_splits(pieces);

    std::set<Seq> covered;  // completed by a cross-group record
    std::map<Seq, std::pair<Seq, Seq>> spans;
    std::map<Seq, std::set<std::tuple<Seq, std::uint64_t, std::uint32_t, TargetId>>> distinct;
    std::map<Seq, std::uint32_t> num;
    for (const auto& p : whole) {
      const auto& a = p.attr;
      if (a.merged()) {
        for (Seq x = a.seq_start; x <= a.seq_end; ++x) {
          auto [it, fresh] = spans.insert({x, {a.seq_start, a.seq_end}});
          if (!fresh && it->second != std::make_pair(a.seq_start, a.seq_end)) {
            g.corrupt = true;
            g.errors.push_back("stream " + std::to_string(s) + ": overlapping merged records at group " +
                               std::to_string(x));
          }
          covered.insert(x);
        }
        continue;
      }
      distinct[a.seq_end].insert({a.seq_start, a.lba, a.len, a.len == 0 ? p.target : TargetId{0}});
      if (a.num > 0) {
        auto [it, fresh] = num.insert({a.seq_end, a.num});
        if (!fresh && it->second != a.num) {
          g.corrupt = true;
          g.errors.push_back("stream " + std::to_string(s) + ": conflicting num for group " +
                             std::to_string(a.seq_end));
        }
      }
    }
    auto complete = [&](Seq x) {
      if (covered.contains(x)) return true;
      auto n = num.find(x);
      auto d = distinct.find(x);
      if (n == num.end() || d == distinct.end()) return false;
      if (d->second.size() > n->second) {
        g.corrupt = true;
        g.errors.push_back("stream " + std::to_string(s) + ": more records than num for group " +
                           std::to_string(x));
      }
      return d->second.size() == n->second;
    };

    so.prefix = so.base;
    while (complete(so.prefix + 1)) so.list.push_back(++so.prefix);

    Seq highest = so.prefix;
    for (const auto& sl : servers)
      if (auto it = sl.live.find(s); it != sl.live.end())
        for (const auto& r : it->second) highest = std::max(highest, r.attr.seq_end);

    if (mode == RecoveryMode::kInitiator) {
      for (const auto& sl : servers)
        if (auto it = sl.live.find(s); it != sl.live.end())
          for (const auto& r : it->second)
            if (r.attr.seq_end > so.prefix)
              for (Seq x = std::max(r.attr.seq_start, so.prefix + 1); x <= r.attr.seq_end; ++x) so.drop.insert(x);
    } else {
      for (Seq x = so.prefix + 1; x <= highest; ++x)
        if (!complete(x) && (on_failed.contains(x) || !distinct.contains(x) || failed.empty())) so.replay.insert(x);
    }
    g.streams[s] = std::move(so);
  }
  return g;
}

struct EraseCommand {
  TargetId target = 0;
  std::uint64_t lba = 0;  // volume block
  std::uint32_t len = 0;
  StreamId stream = 0;
  Seq seq = 0;

  bool operator==(const EraseCommand&) const = default;
};

struct IpuRecord {
  TargetId target = 0;
  OrderingAttribute attr;
};

// Upper-layer decision point for in-place updates beyond the prefix, which
// cannot be rolled back.
class IpuPolicy {
 public:
  virtual ~IpuPolicy() = default;
  virtual std::string name() const = 0;
  virtual void on_ipu(const GlobalOrderingList& list, const std::vector<IpuRecord>& records) = 0;
};

class ReportOnlyPolicy : public IpuPolicy {
 public:
  std::string name() const override { return "report-only"; }
  void on_ipu(const GlobalOrderingList&, const std::vector<IpuRecord>& records) override {
    reported.insert(reported.end(), records.begin(), records.end());
  }
  std::vector<IpuRecord> reported;
};

// Keeps the in-place data and discards every later group's metadata, so the
// overwritten blocks are never referenced by a newer, partially durable state.
class EraseLaterMetadataPolicy : public IpuPolicy {
 public:
  std::string name() const override { return "erase-later-metadata"; }
  void on_ipu(const GlobalOrderingList& list, const std::vector<IpuRecord>& records) override {
    for (const auto& r : records) {
      const StreamId s = r.attr.stream_id;
      auto it = list.streams.find(s);
      if (it == list.streams.end()) continue;
      for (Seq x : it->second.drop)
        if (x > r.attr.seq_end) discarded_after[s].insert(x);
      retained.push_back(r);
    }
  }
  std::vector<IpuRecord> retained;
  std::map<StreamId, std::set<Seq>> discarded_after;
};

struct RollbackPlan {
  std::vector<EraseCommand> erase;
  std::vector<IpuRecord> ipu;
};

// Blocks to erase: every live out-of-place record beyond the prefix.
inline RollbackPlan rollback(const GlobalOrderingList& list, const std::vector<ServerList>& servers,
                             IpuPolicy* policy = nullptr) {
  RollbackPlan plan;
  for (const auto& sl : servers)
    for (const auto& [s, recs] : sl.live) {
      const Seq k = list.prefix(s);
      for (const auto& r : recs) {
        if (r.attr.seq_end <= k) continue;
        if (r.attr.ipu) {
          plan.ipu.push_back({sl.target, r.attr});
          continue;
        }
        if (r.attr.len == 0) continue;
        plan.erase.push_back({sl.target, r.attr.lba, r.attr.len, s, r.attr.seq_end});
      }
    }
  if (policy && !plan.ipu.empty()) policy->on_ipu(list, plan.ipu);
  return plan;
}

// True when the unit has a certified record on this server.
inline bool unit_valid_on(const WriteRequest& u, const ServerList& sl) {
  auto it = sl.valid.find(u.attr.stream_id);
  if (it == sl.valid.end()) return false;
  for (const auto& r : it->second) {
    const auto& a = r.attr;
    if (a.seq_start == u.attr.seq_start && a.seq_end == u.attr.seq_end && a.lba == u.attr.lba &&
        a.len == u.attr.len && a.flush == u.attr.flush && a.split == u.attr.split)
      return true;
  }
  return false;
}

// Units to resend to a restarted target: buffered, destined there and not
// already certified there.
inline std::vector<WriteRequest> select_replays(const std::vector<WriteRequest>& buffered, const ServerList& sl) {
  std::vector<WriteRequest> out;
  for (const auto& u : buffered)
    if (u.target_id == sl.target && !unit_valid_on(u, sl)) out.push_back(u);
  return out;
}

struct RecoveryTimingParams {
  std::uint64_t pmr_read_ticks = 2;
  std::uint64_t transfer_ticks = 1;
  std::uint64_t fabric_base_ticks = 20;
  std::uint64_t write_ticks = 100;
  std::uint32_t parallelism = 8;
};

struct RecoveryTimes {
  std::uint64_t order_rebuild_ticks = 0;
  std::uint64_t data_recovery_ticks = 0;
};

// Order rebuild: servers scan and ship their logs in parallel, then one merge.
// Data recovery: erasures run independently per SSD, plus any replay time.
inline RecoveryTimes recovery_time_report(const std::vector<ServerList>& servers,
                                          const std::map<std::pair<TargetId, std::uint16_t>, std::uint64_t>& erased_blocks,
                                          std::uint64_t replay_ticks, const RecoveryTimingParams& p = {}) {
  RecoveryTimes t;
  std::uint64_t worst = 0;
  bool any = false;
  for (const auto& sl : servers) {
    worst = std::max<std::uint64_t>(worst, std::uint64_t{sl.scanned} * (p.pmr_read_ticks + p.transfer_ticks));
    any = any || sl.scanned > 0;
  }
  t.order_rebuild_ticks = any ? worst + p.fabric_base_ticks : 0;
  std::uint64_t erase = 0;
  for (const auto& [dev, blocks] : erased_blocks)
    erase = std::max(erase, (blocks * p.write_ticks + p.parallelism - 1) / std::max<std::uint32_t>(p.parallelism, 1));
  t.data_recovery_ticks = erase + replay_ticks;
  return t;
}

}  // namespace riosim
