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
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "riosim/core.hpp"
#include "riosim/fabric.hpp"
#include "riosim/ssd.hpp"

namespace riosim {

struct GateUnit {
  StreamId stream = 0;
  Seq key = 0;
  Seq prev = 0;
  std::uint32_t prev_count = 0;
  bool flush = false;
  std::uint32_t self_count = 0;
  std::uint64_t unit_id = 0;  // initiator identity, stable across resends
  std::uint64_t handle = 0;   // target-local
};

// Releases a unit to the SSD once every record of its per-server predecessor
// group has been dispatched. A flush unit also waits for the other records of
// its own group on this server, so the barrier covers them.
class SubmissionGate {
 public:
  explicit SubmissionGate(bool enabled = true) : enabled_(enabled) {}

  bool enabled() const { return enabled_; }

  void seed(StreamId s, Seq base, const std::map<Seq, std::uint32_t>& counts) {
    Chain& c = chains_[s];
    c.base = base;
    for (const auto& [k, n] : counts) c.dispatched[k].count = n;
  }

  // Returns handles in dispatch order.
  std::vector<std::uint64_t> offer(const GateUnit& u) {
    Chain& c = chains_[u.stream];
    std::vector<std::uint64_t> out;
    if (enabled_ && !ready(c, u)) {
      c.held.push_back(u);
      return out;
    }
    mark(c, u, out);
    bool progress = true;
    while (progress) {
      progress = false;
      for (std::size_t i = 0; i < c.held.size(); ++i) {
        if (!ready(c, c.held[i])) continue;
        GateUnit h = c.held[i];
        c.held.erase(c.held.begin() + static_cast<std::ptrdiff_t>(i));
        mark(c, h, out);
        progress = true;
        break;
      }
    }
    return out;
  }

  void advance_base(StreamId s, Seq through) {
    Chain& c = chains_[s];
    if (through <= c.base) return;
    c.base = through;
    c.dispatched.erase(c.dispatched.begin(), c.dispatched.upper_bound(through));
  }

  std::size_t held() const {
    std::size_t n = 0;
    for (const auto& [s, c] : chains_) n += c.held.size();
    return n;
  }

  void clear() { chains_.clear(); }

  void hash_into(Hasher& h) const {
    for (const auto& [s, c] : chains_) {
      h.add(s);
      h.add(c.base);
      for (const auto& [k, d] : c.dispatched) {
        h.add(k);
        h.add(d.count);
      }
      std::vector<std::uint64_t> held;
      for (const auto& u : c.held) held.push_back(u.key * 1315423911u + u.unit_id);
      std::sort(held.begin(), held.end());
      for (auto x : held) h.add(x);
    }
  }

 private:
  struct Dispatched {
    std::uint32_t count = 0;
    std::set<std::uint64_t> ids;
  };
  struct Chain {
    Seq base = 0;
    std::map<Seq, Dispatched> dispatched;
    std::vector<GateUnit> held;
  };

  static std::uint32_t count(const Chain& c, Seq k) {
    auto it = c.dispatched.find(k);
    return it == c.dispatched.end() ? 0 : it->second.count;
  }

  static bool ready(const Chain& c, const GateUnit& u) {
    const bool prev_ok = u.prev == 0 || u.prev <= c.base || count(c, u.prev) >= u.prev_count;
    const bool self_ok = !u.flush || u.self_count == 0 || count(c, u.key) + 1 >= u.self_count;
    return prev_ok && self_ok;
  }

  static void mark(Chain& c, const GateUnit& u, std::vector<std::uint64_t>& out) {
    Dispatched& d = c.dispatched[u.key];
    if (u.unit_id == 0 || d.ids.insert(u.unit_id).second) ++d.count;
    out.push_back(u.handle);
  }

  bool enabled_ = true;
  std::map<StreamId, Chain> chains_;
};

// Per-server recovery input. `valid` holds, per stream, the records of the
// maximal prev-linked chain whose persistence is certified, ascending by group.
struct ServerList {
  TargetId target = 0;
  std::map<StreamId, std::vector<PersistenceRecord>> valid;
  std::map<StreamId, std::vector<PersistenceRecord>> live;
  std::map<StreamId, Seq> watermarks;
  std::uint32_t scanned = 0;
  bool corrupt = false;
  std::string error;
};

// `plp_at(lba)` tells whether the SSD holding a volume block has power-loss
// protection. A record is certified when its own persist bit is set on a PLP
// device, or when a persisted FLUSH record of the same stream on this server
// has an equal or later group.
inline ServerList rebuild_server_list(TargetId target, const PmrLog& pmr,
                                      const std::function<bool(std::uint64_t)>& plp_at) {
  ServerList out;
  out.target = target;
  out.watermarks = pmr.watermarks();
  const auto scan = pmr.scan();
  out.scanned = static_cast<std::uint32_t>(scan.records.size());
  out.corrupt = scan.corrupt;
  out.error = scan.error;

  std::map<StreamId, std::map<Seq, std::vector<PersistenceRecord>>> by_key;
  std::map<StreamId, Seq> flush_cert;
  for (const auto& r : scan.records) {
    const StreamId s = r.attr.stream_id;
    out.live[s].push_back(r);
    if (r.attr.seq_end <= pmr.watermark(s)) continue;
    by_key[s][r.attr.seq_end].push_back(r);
    if (r.attr.flush && r.attr.persist) flush_cert[s] = std::max(flush_cert[s], r.attr.seq_end);
  }

  for (auto& [s, keys] : by_key) {
    const Seq wm = pmr.watermark(s);
    const Seq cert = flush_cert.contains(s) ? flush_cert[s] : 0;
    std::optional<Seq> last;
    auto& chain = out.valid[s];
    for (auto& [key, recs] : keys) {
      const Seq prev = recs.front().attr.prev;
      const bool linked = last ? prev == *last : (prev == 0 || prev <= wm);
      if (!linked) break;
      bool all = true;
      for (const auto& r : recs) {
        const bool ok = key <= cert || (r.attr.persist && r.attr.len > 0 && plp_at(r.attr.lba));
        if (ok)
          chain.push_back(r);
        else
          all = false;
      }
      if (!all) break;
      last = key;
    }
  }
  return out;
}

struct TargetConfig {
  TargetId id = 0;
  std::vector<SsdProfile> ssds;
  std::uint32_t pmr_capacity = PmrLog::kDefaultCapacity;
  bool gate_enabled = true;
  // Mutation knob: set every record's persist bit on cache arrival.
  bool eager_persist = false;
};

struct TargetOutput {
  struct SsdSubmit {
    std::uint16_t ssd = 0;
    std::uint64_t op_id = 0;
    std::uint64_t delay = 0;  // ticks before the device starts on it
  };
  struct Reply {
    std::uint16_t queue = 0;
    FabricCommand cmd;
  };
  struct Note {
    std::string action;
    StreamId stream = 0;
    Seq seq = 0;
    std::uint64_t unit_id = 0;
  };
  std::vector<SsdSubmit> submits;
  std::vector<std::uint16_t> cycles;
  std::vector<Reply> replies;
  std::vector<Note> notes;
  std::uint64_t cpu_ticks = 0;
  std::uint64_t pmr_ticks = 0;
};

// Target driver: persists ordering records, gates SSD dispatch per server,
// toggles persist bits and answers the initiator.
class TargetNode {
 public:
  TargetNode() = default;
  TargetNode(TargetConfig cfg, std::function<bool(std::uint64_t)> plp_at)
      : cfg_(std::move(cfg)), pmr_(cfg_.pmr_capacity), gate_(cfg_.gate_enabled), plp_at_(std::move(plp_at)) {
    for (const auto& p : cfg_.ssds) ssds_.emplace_back(p);
  }

  TargetId id() const { return cfg_.id; }
  const PmrLog& pmr() const { return pmr_; }
  PmrLog& pmr() { return pmr_; }
  const SubmissionGate& gate() const { return gate_; }
  std::vector<SsdModel>& ssds() { return ssds_; }
  const std::vector<SsdModel>& ssds() const { return ssds_; }
  bool up() const { return up_; }
  std::uint64_t epoch() const { return epoch_; }

  void on_command(const FabricCommand& cmd, std::uint16_t queue, TargetOutput& out) {
    if (!up_) return;
    switch (cmd.op) {
      case Op::kWriteSubmit:
      case Op::kReplay:
        on_write(cmd, queue, out);
        break;
      case Op::kFlush:
        on_flush_command(cmd, queue, out);
        break;
      case Op::kControl: {
        // Control-path ordering metadata: persisted, then acknowledged.
        if (cmd.record) {
          if (auto slot = pmr_.append(*cmd.record)) {
            out.pmr_ticks += PmrLog::kAppendTicks;
            pmr_.invalidate(*slot);
          }
        }
        FabricCommand r;
        r.op = Op::kControlReply;
        r.cpl.unit_id = cmd.cpl.unit_id;
        r.cpl.target = cfg_.id;
        r.stream = cmd.stream;
        out.replies.push_back({queue, r});
        break;
      }
      case Op::kRelease:
        release(cmd.stream, cmd.release_through);
        break;
      default:
        break;
    }
  }

  void on_write_done(std::uint16_t ssd, std::uint64_t op_id, TargetOutput& out) {
    if (!up_) return;
    handle_ssd(ssd, ssds_.at(ssd).write_done(op_id), out);
  }

  void on_flush_end(std::uint16_t ssd, TargetOutput& out) {
    if (!up_) return;
    handle_ssd(ssd, ssds_.at(ssd).flush_end(), out);
  }

  // Invalidates the stream's records up to `through` and records the watermark.
  void release(StreamId s, Seq through) {
    auto& idx = index_[s];
    for (auto it = idx.begin(); it != idx.end() && it->first <= through;) {
      for (auto slot : it->second) pmr_.invalidate(slot);
      it = idx.erase(it);
    }
    pmr_.set_watermark(s, through);
    gate_.advance_base(s, through);
  }

  void power_loss() {
    for (auto& s : ssds_) s.power_loss();
    pmr_.power_loss();
    gate_.clear();
    units_.clear();
    op_owner_.clear();
    index_.clear();
    up_ = false;
    ++epoch_;
  }

  // Restart after power loss. Rebuilds the server list, drops records that
  // are not part of it and seeds the gate from what survived.
  ServerList restart() {
    pmr_.restart();
    up_ = true;
    ServerList list = rebuild_server_list(cfg_.id, pmr_, plp_at_);
    std::set<std::uint32_t> keep;
    for (const auto& [s, recs] : list.valid)
      for (const auto& r : recs) keep.insert(r.log_slot);
    for (const auto& [s, recs] : list.live)
      for (const auto& r : recs)
        if (!keep.contains(r.log_slot)) pmr_.invalidate(r.log_slot);
    for (const auto& [s, recs] : list.valid) {
      std::map<Seq, std::uint32_t> counts;
      for (const auto& r : recs) {
        ++counts[r.attr.seq_end];
        index_[s][r.attr.seq_end].push_back(r.log_slot);
      }
      gate_.seed(s, pmr_.watermark(s), counts);
    }
    for (const auto& [s, w] : pmr_.watermarks()) gate_.advance_base(s, w);
    return list;
  }

  ServerList snapshot_list() const { return rebuild_server_list(cfg_.id, pmr_, plp_at_); }

  // After a global recovery: forget every record and restart each stream at k.
  void finish_recovery(const std::map<StreamId, Seq>& prefix) {
    pmr_.clear_all();
    gate_.clear();
    index_.clear();
    for (const auto& [s, k] : prefix) {
      pmr_.reset_watermark(s, k);
      gate_.seed(s, k, {});
    }
  }

  std::size_t pending_units() const { return units_.size(); }

  void hash_into(Hasher& h) const {
    h.add(up_);
    pmr_.hash_into(h);
    gate_.hash_into(h);
    for (const auto& s : ssds_) s.hash_into(h);
    h.add(units_.size());
    for (const auto& [id, u] : units_) {
      h.add(u.req.unit_id);
      h.add(u.cached);
      h.add(u.persisted);
      h.add(u.dispatched);
    }
  }

 private:
  struct Unit {
    WriteRequest req;
    std::uint16_t queue = 0;
    std::optional<std::uint32_t> slot;
    std::vector<std::pair<std::uint16_t, std::uint64_t>> ops;
    std::uint32_t cached = 0;
    std::uint32_t persisted = 0;
    bool dispatched = false;
    bool acked = false;
    bool barrier = false;  // waits for persistence before answering
  };

  void on_write(const FabricCommand& cmd, std::uint16_t queue, TargetOutput& out) {
    Unit u;
    u.req = cmd.req;
    u.queue = queue;
    u.barrier = cmd.req.attr.flush;
    const std::uint64_t h = ++next_handle_;
    if (cmd.record) {
      auto slot = pmr_.append(*cmd.record);
      if (!slot) {
        FabricCommand busy;
        busy.op = Op::kBusy;
        busy.cpl.unit_id = cmd.req.unit_id;
        busy.cpl.target = cfg_.id;
        busy.stream = cmd.req.attr.stream_id;
        out.replies.push_back({queue, busy});
        out.notes.push_back({"pmr-full", u.req.attr.stream_id, u.req.attr.seq_end, u.req.unit_id});
        return;
      }
      u.slot = slot;
      out.pmr_ticks += PmrLog::kAppendTicks;
      index_[u.req.attr.stream_id][u.req.attr.seq_end].push_back(*slot);
      out.notes.push_back({"pmr-append", u.req.attr.stream_id, u.req.attr.seq_end, u.req.unit_id});
      units_.emplace(h, std::move(u));
      const Unit& ref = units_.at(h);
      GateUnit g{ref.req.attr.stream_id, ref.req.attr.seq_end, ref.req.attr.prev, ref.req.prev_count,
                 ref.req.attr.flush, ref.req.self_count, ref.req.unit_id, h};
      for (auto released : gate_.offer(g)) dispatch(released, PmrLog::kAppendTicks, out);
      return;
    }
    units_.emplace(h, std::move(u));
    dispatch(h, 0, out);
  }

  void on_flush_command(const FabricCommand& cmd, std::uint16_t queue, TargetOutput& out) {
    Unit u;
    u.req = cmd.req;
    u.req.attr.len = 0;
    u.req.attr.flush = true;
    u.queue = queue;
    u.barrier = true;
    const std::uint64_t h = ++next_handle_;
    units_.emplace(h, std::move(u));
    dispatch(h, 0, out);
  }

  void dispatch(std::uint64_t h, std::uint64_t delay, TargetOutput& out) {
    Unit& u = units_.at(h);
    u.dispatched = true;
    const auto& a = u.req.attr;
    const std::uint16_t home = a.len > 0 ? u.req.route.ssd : 0;
    if (a.len > 0) add_op(h, u, home, u.req.route.device_lba, u.req.payload, a.flush, delay, out);
    if (a.flush) {
      // FLUSH reaches every SSD behind this server.
      for (std::uint16_t s = 0; s < ssds_.size(); ++s)
        if (a.len == 0 || s != home) add_op(h, u, s, 0, {}, true, delay, out);
    }
    out.notes.push_back({"ssd-dispatch", a.stream_id, a.seq_end, u.req.unit_id});
  }

  void add_op(std::uint64_t h, Unit& u, std::uint16_t ssd, std::uint64_t lba, std::vector<Fingerprint> fps,
              bool flush, std::uint64_t delay, TargetOutput& out) {
    const std::uint64_t op = ++next_op_;
    ssds_.at(ssd).submit(op, lba, std::move(fps), flush);
    op_owner_[{ssd, op}] = h;
    u.ops.push_back({ssd, op});
    out.submits.push_back({ssd, op, delay});
  }

  void handle_ssd(std::uint16_t ssd, const SsdOutput& so, TargetOutput& out) {
    for (auto op : so.cached) {
      auto it = op_owner_.find({ssd, op});
      if (it == op_owner_.end()) continue;
      auto uit = units_.find(it->second);
      if (uit == units_.end()) continue;
      Unit& u = uit->second;
      if (++u.cached == u.ops.size() && !u.barrier) {
        const bool plp = ssds_.at(u.req.route.ssd).plp();
        if (u.slot && (plp || cfg_.eager_persist)) pmr_.set_persist(*u.slot);
        if (u.slot && plp) out.notes.push_back({"persist", u.req.attr.stream_id, u.req.attr.seq_end, u.req.unit_id});
        reply(u, plp, out);
        if (plp || u.ops.empty()) forget(uit);
      } else if (u.barrier && cfg_.eager_persist && u.slot && u.cached == u.ops.size()) {
        pmr_.set_persist(*u.slot);
      }
    }
    for (auto op : so.persisted) {
      auto it = op_owner_.find({ssd, op});
      if (it == op_owner_.end()) continue;
      const std::uint64_t h = it->second;
      op_owner_.erase(it);
      auto uit = units_.find(h);
      if (uit == units_.end()) continue;
      Unit& u = uit->second;
      if (++u.persisted == u.ops.size() && u.barrier) {
        if (u.slot) {
          pmr_.set_persist(*u.slot);
          out.notes.push_back({"persist", u.req.attr.stream_id, u.req.attr.seq_end, u.req.unit_id});
        }
        reply(u, true, out);
        forget(uit);
      } else if (u.persisted == u.ops.size() && u.acked) {
        forget(uit);
      }
    }
    if (so.cycle_started) out.cycles.push_back(ssd);
  }

  void reply(Unit& u, bool durable, TargetOutput& out) {
    if (u.acked) return;
    u.acked = true;
    FabricCommand c;
    c.op = Op::kCompletion;
    c.stream = u.req.attr.stream_id;
    c.cpl.unit_id = u.req.unit_id;
    c.cpl.target = cfg_.id;
    c.cpl.durable = durable;
    if (u.barrier && durable) c.cpl.certifies_through = u.req.attr.seq_end;
    c.req.attr = u.req.attr;
    c.req.unit_id = u.req.unit_id;
    out.replies.push_back({u.queue, c});
    out.notes.push_back({"complete", u.req.attr.stream_id, u.req.attr.seq_end, u.req.unit_id});
  }

  void forget(std::map<std::uint64_t, Unit>::iterator it) {
    for (const auto& o : it->second.ops) op_owner_.erase(o);
    units_.erase(it);
  }

  TargetConfig cfg_;
  PmrLog pmr_;
  SubmissionGate gate_;
  std::function<bool(std::uint64_t)> plp_at_;
  std::vector<SsdModel> ssds_;
  std::map<std::uint64_t, Unit> units_;
  std::map<std::pair<std::uint16_t, std::uint64_t>, std::uint64_t> op_owner_;
  std::map<StreamId, std::map<Seq, std::vector<std::uint32_t>>> index_;
  std::uint64_t next_handle_ = 0;
  std::uint64_t next_op_ = 0;
  std::uint64_t epoch_ = 0;
  bool up_ = true;
};

}  // namespace riosim
