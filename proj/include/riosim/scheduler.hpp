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
#include <deque>
#include <map>
#include <optional>
#include <stdexcept>
#include <vector>

#include "riosim/core.hpp"
#include "riosim/layout.hpp"

namespace riosim {

// Order-safe coalescing of two adjacent queue entries, `a` before `b`.
//
// Ordered requests merge only within one stream, with continuous sequence
// numbers and consecutive non-overlapping LBAs on one device, and never once
// split. Crossing a group boundary requires both sides to be whole groups so
// the group stays the recovery unit. Mixed IPU/out-of-place runs never merge
// because rollback treats the two differently.
inline bool mergeable(const WriteRequest& a, const WriteRequest& b, const VolumeLayout& layout) {
  if (a.ordered != b.ordered) return false;
  if (a.attr.stream_id != b.attr.stream_id) return false;
  if (a.attr.split || b.attr.split) return false;
  if (a.attr.len == 0 || b.attr.len == 0) return false;
  if (b.attr.lba != a.attr.lba + a.attr.len) return false;
  const std::uint64_t len = std::uint64_t{a.attr.len} + b.attr.len;
  if (len > record::kMaxLen) return false;
  if (!layout.contiguous(a.attr.lba, static_cast<std::uint32_t>(len))) return false;
  const Route r = layout.route(a.attr.lba);
  if (len > layout.ssd(r.target, r.ssd).max_transfer_blocks) return false;
  if (!a.ordered) return true;

  if (a.attr.ipu != b.attr.ipu) return false;
  const bool within_group = b.attr.seq_start == a.attr.seq_end && !a.attr.group_end && !b.attr.merged();
  const bool whole_groups = b.attr.seq_start == a.attr.seq_end + 1 && a.group_start && a.attr.group_end &&
                            b.group_start && b.attr.group_end;
  return within_group || whole_groups;
}

inline WriteRequest merge_two(const WriteRequest& a, const WriteRequest& b) {
  WriteRequest m = a;
  m.attr.seq_end = b.attr.seq_end;
  m.attr.num = a.attr.num + b.attr.num;
  m.attr.persist = false;
  m.attr.len = a.attr.len + b.attr.len;
  m.attr.flush = a.attr.flush || b.attr.flush;
  m.attr.group_end = b.attr.group_end;
  m.members = a.members + b.members;
  m.payload.insert(m.payload.end(), b.payload.begin(), b.payload.end());
  return m;
}

// Coalesces adjacent entries until no pair is mergeable. Never reorders.
inline std::vector<WriteRequest> try_merge(std::vector<WriteRequest> queue, const VolumeLayout& layout) {
  std::vector<WriteRequest> out;
  out.reserve(queue.size());
  for (auto& req : queue) {
    out.push_back(std::move(req));
    while (out.size() >= 2 && mergeable(out[out.size() - 2], out.back(), layout)) {
      WriteRequest m = merge_two(out[out.size() - 2], out.back());
      out.pop_back();
      out.back() = std::move(m);
    }
  }
  return out;
}

// Cuts a request at device boundaries first, then at each device's transfer cap.
inline std::vector<WriteRequest> try_split(const WriteRequest& req, const VolumeLayout& layout) {
  if (req.ordered && (req.attr.merged() || req.members > 1))
    throw ContractViolation("a merged request cannot be split");
  if (req.attr.split) throw ContractViolation("request is already split");

  struct Piece {
    std::uint64_t lba;
    std::uint32_t len;
    std::uint32_t offset;
  };
  std::vector<Piece> pieces;
  std::uint32_t off = 0;
  while (off < req.attr.len) {
    const std::uint64_t lba = req.attr.lba + off;
    const std::uint32_t contiguous = layout.contiguous_prefix(lba, req.attr.len - off);
    const Route r = layout.route(lba);
    const std::uint32_t cap = layout.ssd(r.target, r.ssd).max_transfer_blocks;
    const std::uint32_t n = std::min(contiguous, cap);
    pieces.push_back({lba, n, off});
    off += n;
  }
  if (pieces.size() <= 1) return {req};
  if (req.ordered && pieces.size() > record::kMaxParts)
    throw ContractViolation("request would split into more parts than the record can describe");

  std::vector<WriteRequest> parts;
  parts.reserve(pieces.size());
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    WriteRequest p = req;
    p.attr.lba = pieces[i].lba;
    p.attr.len = pieces[i].len;
    p.payload.assign(req.payload.begin() + pieces[i].offset,
                     req.payload.begin() + pieces[i].offset + pieces[i].len);
    p.target_id = layout.target_of(pieces[i].lba);
    if (req.ordered)
      p.attr.split = SplitDesc{req.attr.seq_start, static_cast<std::uint16_t>(i),
                               static_cast<std::uint16_t>(pieces.size())};
    parts.push_back(std::move(p));
  }
  return parts;
}

struct SchedulerConfig {
  std::uint32_t plug_depth = 16;
  std::uint64_t plug_timeout_ticks = 20;
  bool merge_enabled = true;
  bool queue_affinity = true;
  // Emit zero-length flush records to every other volatile target this
  // stream wrote since its last flush there, so a FLUSH covers the stream.
  bool flush_members = true;
  std::uint16_t num_queues = 1;
};

struct Dispatch {
  std::uint16_t queue_id = 0;
  WriteRequest req;
};

struct OrderQueue {
  StreamId stream_id = 0;
  std::deque<WriteRequest> fifo;
  std::uint32_t plug_depth = 16;
};

struct EnqueueResult {
  bool depth_reached = false;
  bool window_opened = false;  // queue was empty; caller arms the plug timer
};

class Scheduler {
 public:
  Scheduler(SchedulerConfig cfg, VolumeLayout layout, std::vector<std::uint16_t> stream_queues)
      : cfg_(cfg), layout_(std::move(layout)), stream_queue_(std::move(stream_queues)) {
    if (cfg_.num_queues == 0) throw std::invalid_argument("num_queues must be positive");
    order_.resize(stream_queue_.size());
    orderless_.resize(stream_queue_.size());
    emit_.resize(stream_queue_.size());
    core_.resize(stream_queue_.size());
    for (std::size_t i = 0; i < stream_queue_.size(); ++i) {
      order_[i].stream_id = static_cast<StreamId>(i);
      order_[i].plug_depth = cfg_.plug_depth;
      orderless_[i].stream_id = static_cast<StreamId>(i);
      orderless_[i].plug_depth = cfg_.plug_depth;
      core_[i] = static_cast<std::uint16_t>(i);
    }
  }

  const SchedulerConfig& config() const { return cfg_; }
  const VolumeLayout& layout() const { return layout_; }
  const OrderQueue& order_queue(StreamId s) const { return order_.at(s); }
  const OrderQueue& orderless_queue(StreamId s) const { return orderless_.at(s); }
  std::uint16_t nic_queue(StreamId s) const { return stream_queue_.at(s); }
  std::uint16_t core_of(StreamId s) const { return core_.at(s); }

  EnqueueResult enqueue(WriteRequest req) {
    const StreamId s = req.attr.stream_id;
    if (s >= order_.size()) throw std::out_of_range("unknown stream");
    OrderQueue& q = req.ordered ? order_[s] : orderless_[s];
    EnqueueResult res;
    res.window_opened = order_[s].fifo.empty() && orderless_[s].fifo.empty();
    q.fifo.push_back(std::move(req));
    if (cfg_.merge_enabled) {
      while (q.fifo.size() >= 2 && mergeable(q.fifo[q.fifo.size() - 2], q.fifo.back(), layout_)) {
        WriteRequest m = merge_two(q.fifo[q.fifo.size() - 2], q.fifo.back());
        q.fifo.pop_back();
        q.fifo.back() = std::move(m);
      }
    }
    res.depth_reached = q.fifo.size() >= q.plug_depth;
    return res;
  }

  bool empty(StreamId s) const { return order_.at(s).fifo.empty() && orderless_.at(s).fifo.empty(); }

  // Closes the plug window: drains both queues of the stream in FIFO order,
  // splits what needs splitting and stamps per-target chain information.
  std::vector<Dispatch> dispatch(StreamId s) {
    std::vector<Dispatch> out;
    OrderQueue& oq = order_.at(s);
    while (!oq.fifo.empty()) {
      WriteRequest r = std::move(oq.fifo.front());
      oq.fifo.pop_front();
      finalize_ordered(std::move(r), out);
    }
    OrderQueue& lq = orderless_.at(s);
    while (!lq.fifo.empty()) {
      WriteRequest r = std::move(lq.fifo.front());
      lq.fifo.pop_front();
      for (auto& p : try_split(r, layout_)) emit(std::move(p), out);
    }
    return out;
  }

  // Stream stealing: the stream keeps its NIC queue; pending requests are
  // handed to the driver before the process lands on its new core.
  std::vector<Dispatch> migrate(StreamId s, std::uint16_t new_core) {
    auto out = dispatch(s);
    core_.at(s) = new_core;
    return out;
  }

  // Forget chain state, e.g. after the initiator restarts.
  void reset_chains() {
    for (auto& e : emit_) e = EmitState{};
  }

 private:
  struct TargetChain {
    Seq cur_key = 0;
    Seq cur_prev = 0;
    std::uint32_t cur_count = 0;
    std::uint32_t cur_prev_count = 0;
    bool dirty = false;
  };
  struct EmitState {
    std::map<TargetId, TargetChain> chains;
    std::uint32_t group_records = 0;
  };

  void finalize_ordered(WriteRequest r, std::vector<Dispatch>& out) {
    EmitState& st = emit_[r.attr.stream_id];
    std::vector<WriteRequest> parts;
    if (r.attr.len > 0 && !r.attr.merged() && r.members == 1)
      parts = try_split(r, layout_);
    else
      parts.push_back(r);

    if (r.attr.flush && cfg_.flush_members) {
      for (auto& [t, chain] : st.chains) {
        if (!chain.dirty || !layout_.any_volatile(t)) continue;
        bool covered = false;
        for (const auto& p : parts) covered = covered || p.target_id == t;
        if (covered) continue;
        WriteRequest f;
        f.attr.seq_start = f.attr.seq_end = r.attr.seq_end;
        f.attr.flush = true;
        f.attr.ipu = r.attr.ipu;
        f.attr.stream_id = r.attr.stream_id;
        f.ordered = true;
        f.target_id = t;
        f.members = 0;
        if (!r.attr.merged()) ++st.group_records;
        stamp(f, st);
        f.route = Route{t, 0, 0};
        emit(std::move(f), out);
      }
    }

    if (!r.attr.merged()) {
      ++st.group_records;
      if (r.attr.group_end) {
        for (auto& p : parts) p.attr.num = st.group_records;
        st.group_records = 0;
      }
    }
    for (auto& p : parts) {
      stamp(p, st);
      p.route = layout_.route(p.attr.lba);
      emit(std::move(p), out);
    }
  }

  static void stamp(WriteRequest& p, EmitState& st) {
    TargetChain& c = st.chains[p.target_id];
    const Seq key = p.attr.seq_end;
    if (c.cur_key != key) {
      c.cur_prev = c.cur_key;
      c.cur_prev_count = c.cur_count;
      c.cur_key = key;
      c.cur_count = 0;
    }
    ++c.cur_count;
    p.attr.prev = c.cur_prev;
    p.prev_count = c.cur_prev_count;
    if (p.attr.flush) {
      p.self_count = c.cur_count;
      c.dirty = false;
    } else {
      c.dirty = true;
    }
  }

  void emit(WriteRequest p, std::vector<Dispatch>& out) {
    const StreamId s = p.attr.stream_id;
    if (p.attr.len > 0) p.route = layout_.route(p.attr.lba);
    p.unit_id = ++next_unit_;
    const std::uint16_t q =
        cfg_.queue_affinity ? stream_queue_[s] : static_cast<std::uint16_t>(rr_++ % cfg_.num_queues);
    out.push_back(Dispatch{q, std::move(p)});
  }

  SchedulerConfig cfg_;
  VolumeLayout layout_;
  std::vector<std::uint16_t> stream_queue_;
  std::vector<OrderQueue> order_;
  std::vector<OrderQueue> orderless_;
  std::vector<EmitState> emit_;
  std::vector<std::uint16_t> core_;
  std::uint64_t next_unit_ = 0;
  std::uint64_t rr_ = 0;
};

}  // namespace riosim
