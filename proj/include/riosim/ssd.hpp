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
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "riosim/core.hpp"

namespace riosim {

struct SsdProfile {
  std::uint64_t write_ticks = 100;
  std::uint64_t flush_ticks = 1000;
  bool plp = false;
  std::uint32_t parallelism = 8;
  std::uint64_t write_jitter_ticks = 20;
  std::uint32_t max_transfer_blocks = 32;

  static SsdProfile flash() { return SsdProfile{}; }
  static SsdProfile optane() { return SsdProfile{100, 0, true, 8, 20, 32}; }
};

struct SsdOutput {
  std::vector<std::uint64_t> cached;     // ops whose blocks reached the device
  std::vector<std::uint64_t> persisted;  // ops whose blocks are now durable
  bool cycle_started = false;            // caller schedules flush_end()
};

// Device with a volatile write cache. Writes complete into the cache in any
// order. A flush op is a barrier: once its own write and every write
// submitted before it are cached, it joins the next flush cycle, which moves
// a snapshot of the cache to media. With PLP the cache is durable and flush
// cycles are instantaneous.
class SsdModel {
 public:
  SsdModel() = default;
  explicit SsdModel(SsdProfile p) : profile_(p), slots_(std::max<std::uint32_t>(p.parallelism, 1)) {}

  const SsdProfile& profile() const { return profile_; }
  bool plp() const { return profile_.plp; }
  std::uint64_t epoch() const { return epoch_; }

  void submit(std::uint64_t op_id, std::uint64_t device_lba, std::vector<Fingerprint> fps, bool flush) {
    if (fps.size() > profile_.max_transfer_blocks)
      throw ContractViolation("write exceeds max_transfer_blocks; scheduler must split");
    if (ops_.contains(op_id)) throw ContractViolation("duplicate ssd op id");
    Op op{device_lba, std::move(fps), flush, ++order_, false};
    uncached_.insert(op.order);
    ops_.emplace(op_id, std::move(op));
  }

  // Picks the earliest free internal channel. Returns the time the write
  // lands in the cache.
  SimTime reserve(SimTime now, std::uint64_t jitter) {
    auto it = std::min_element(slots_.begin(), slots_.end());
    const SimTime start = std::max(now, *it);
    *it = start + profile_.write_ticks + jitter;
    return *it;
  }

  SsdOutput write_done(std::uint64_t op_id) {
    SsdOutput out;
    auto it = ops_.find(op_id);
    if (it == ops_.end() || it->second.cached) throw ContractViolation("write_done for unknown op");
    Op& op = it->second;
    op.cached = true;
    uncached_.erase(op.order);
    for (std::size_t i = 0; i < op.fps.size(); ++i) {
      if (profile_.plp)
        media_[op.lba + i] = op.fps[i];
      else
        cache_[op.lba + i] = op.fps[i];
    }
    out.cached.push_back(op_id);
    if (op.flush) waiting_.insert({op.order, op_id});
    if (profile_.plp && !op.flush) {
      out.persisted.push_back(op_id);
      ops_.erase(it);
    }
    promote(out);
    return out;
  }

  SsdOutput flush_end() {
    SsdOutput out;
    if (!cycle_) throw ContractViolation("flush_end without an active cycle");
    for (const auto& [lba, fp] : cycle_->blocks) {
      media_[lba] = fp;
      auto c = cache_.find(lba);
      if (c != cache_.end() && c->second == fp) cache_.erase(c);
    }
    for (auto id : cycle_->ops) {
      out.persisted.push_back(id);
      ops_.erase(id);
    }
    cycle_.reset();
    maybe_start_cycle(out);
    return out;
  }

  bool cycle_active() const { return cycle_.has_value(); }

  // Ops submitted but not yet in the cache, in id order.
  std::vector<std::uint64_t> uncached_ops() const {
    std::vector<std::uint64_t> ids;
    for (const auto& [id, op] : ops_)
      if (!op.cached) ids.push_back(id);
    return ids;
  }

  void power_loss() {
    cache_.clear();
    ops_.clear();
    uncached_.clear();
    waiting_.clear();
    ready_.clear();
    cycle_.reset();
    std::fill(slots_.begin(), slots_.end(), SimTime{});
    ++epoch_;
  }

  void erase(std::uint64_t device_lba) {
    media_.erase(device_lba);
    cache_.erase(device_lba);
  }

  // Restores media blocks directly (used by replay idempotence checks).
  const std::map<std::uint64_t, Fingerprint>& media() const { return media_; }
  const std::map<std::uint64_t, Fingerprint>& cache() const { return cache_; }

  std::optional<Fingerprint> read(std::uint64_t device_lba) const {
    if (auto c = cache_.find(device_lba); c != cache_.end()) return c->second;
    if (auto m = media_.find(device_lba); m != media_.end()) return m->second;
    return std::nullopt;
  }

  void hash_into(Hasher& h) const {
    h.add(media_.size());
    for (const auto& [l, f] : media_) {
      h.add(l);
      h.add(f);
    }
    h.add(cache_.size());
    for (const auto& [l, f] : cache_) {
      h.add(l);
      h.add(f);
    }
    // Op identity matters only through content and relative order.
    h.add(ops_.size());
    std::vector<std::uint64_t> rel;
    for (const auto& [id, op] : ops_) rel.push_back(op.order);
    std::sort(rel.begin(), rel.end());
    for (const auto& [id, op] : ops_) {
      h.add(op.lba);
      h.add(op.fps.size());
      h.add(op.flush);
      h.add(op.cached);
      h.add(static_cast<std::uint64_t>(std::lower_bound(rel.begin(), rel.end(), op.order) - rel.begin()));
    }
    h.add(ready_.size());
    h.add(cycle_ ? cycle_->ops.size() + 1 : 0);
    if (cycle_)
      for (const auto& [l, f] : cycle_->blocks) h.add(l ^ f);
  }

 private:
  struct Op {
    std::uint64_t lba = 0;
    std::vector<Fingerprint> fps;
    bool flush = false;
    std::uint64_t order = 0;
    bool cached = false;
  };
  struct Cycle {
    std::map<std::uint64_t, Fingerprint> blocks;
    std::vector<std::uint64_t> ops;
  };

  void promote(SsdOutput& out) {
    while (!waiting_.empty()) {
      const auto [order, id] = *waiting_.begin();
      if (!uncached_.empty() && *uncached_.begin() < order) break;
      waiting_.erase(waiting_.begin());
      if (profile_.plp) {
        out.persisted.push_back(id);
        ops_.erase(id);
      } else {
        ready_.push_back(id);
      }
    }
    maybe_start_cycle(out);
  }

  void maybe_start_cycle(SsdOutput& out) {
    if (profile_.plp || cycle_ || ready_.empty()) return;
    Cycle c;
    c.blocks = cache_;
    std::set<std::uint64_t> behind_barrier;
    for (const auto& w : waiting_) behind_barrier.insert(w.second);
    for (const auto& [id, op] : ops_)
      if (op.cached && !behind_barrier.contains(id)) c.ops.push_back(id);
    ready_.clear();
    cycle_ = std::move(c);
    out.cycle_started = true;
  }

  SsdProfile profile_;
  std::map<std::uint64_t, Op> ops_;
  std::set<std::uint64_t> uncached_;                       // submit orders
  std::set<std::pair<std::uint64_t, std::uint64_t>> waiting_;  // (order, id) flushes behind the barrier
  std::vector<std::uint64_t> ready_;
  std::optional<Cycle> cycle_;
  std::map<std::uint64_t, Fingerprint> cache_;
  std::map<std::uint64_t, Fingerprint> media_;
  std::vector<SimTime> slots_ = std::vector<SimTime>(1);
  std::uint64_t order_ = 0;
  std::uint64_t epoch_ = 0;
};

// Circular log of 32-byte ordering records in the device's persistent memory
// region. Slots and the per-stream release watermarks are persistent; head
// and tail are volatile and rebuilt from slot contents on restart.
class PmrLog {
 public:
  static constexpr std::uint32_t kDefaultCapacity = 65536;
  static constexpr std::uint64_t kAppendTicks = 6;

  explicit PmrLog(std::uint32_t capacity = kDefaultCapacity) : slots_(capacity) {
    if (capacity == 0) throw std::invalid_argument("pmr capacity must be positive");
  }

  std::uint32_t capacity() const { return static_cast<std::uint32_t>(slots_.size()); }
  std::uint32_t head() const { return head_; }
  std::uint32_t tail() const { return tail_; }
  std::uint32_t used() const { return used_; }
  bool full() const { return used_ == capacity(); }
  std::uint64_t appends() const { return appends_; }
  std::uint64_t append_ticks() const { return appends_ * kAppendTicks; }

  std::optional<std::uint32_t> append(const RecordBytes& rec) {
    if (rec[0] == 0) throw ContractViolation("appending an unset record");
    if (full()) return std::nullopt;
    const std::uint32_t slot = tail_;
    RecordBytes staged = rec;
    staged[0] = 0;
    slots_[slot] = staged;
    slots_[slot][0] = rec[0];  // valid marker last
    tail_ = next(tail_);
    ++used_;
    ++appends_;
    return slot;
  }

  void set_persist(std::uint32_t slot) { slots_.at(slot)[record::kPersistByte] |= record::kFlagPersist; }

  // Persistently kills a record; the head moves over leading dead slots.
  void invalidate(std::uint32_t slot) {
    slots_.at(slot)[0] = 0;
    while (used_ > 0 && slots_[head_][0] == 0) {
      head_ = next(head_);
      --used_;
    }
  }

  // Invalidates the n oldest occupied slots.
  void release_head(std::uint32_t n) {
    for (std::uint32_t i = 0; i < n && used_ > 0; ++i) invalidate(head_);
  }

  const RecordBytes& slot(std::uint32_t i) const { return slots_.at(i); }

  // Raw write, for fault injection.
  void poke(std::uint32_t i, const RecordBytes& r) { slots_.at(i) = r; }

  struct ScanResult {
    std::vector<PersistenceRecord> records;
    bool corrupt = false;
    std::uint32_t corrupt_slot = 0;
    std::string error;
  };

  // Live records in log order. A record that fails to decode ends the scan.
  ScanResult scan() const {
    ScanResult r;
    for (std::uint32_t i = 0, s = head_; i < used_; ++i, s = next(s)) {
      if (slots_[s][0] == 0) continue;
      try {
        r.records.push_back({decode_attr(slots_[s]), s});
      } catch (const CodecError& e) {
        r.corrupt = true;
        r.corrupt_slot = s;
        r.error = std::string(e.field()) + ": " + e.what();
        break;
      }
    }
    return r;
  }

  // Pointer loss.
  void power_loss() {
    head_ = tail_ = 0;
    used_ = 0;
    lost_pointers_ = true;
  }

  // Re-derives head and tail: the occupied arc is the complement of the
  // longest circular run of empty slots.
  void restart() {
    const std::uint32_t n = capacity();
    std::uint32_t live = 0;
    for (const auto& s : slots_) live += s[0] != 0;
    lost_pointers_ = false;
    if (live == 0) {
      head_ = tail_ = used_ = 0;
      return;
    }
    std::uint32_t best_len = 0, best_start = 0;
    std::uint32_t first_live = 0;
    while (slots_[first_live][0] == 0) ++first_live;
    std::uint32_t run = 0, run_start = 0;
    for (std::uint32_t k = 1; k <= n; ++k) {
      const std::uint32_t s = (first_live + k) % n;
      if (slots_[s][0] == 0) {
        if (run == 0) run_start = s;
        ++run;
      } else {
        if (run > best_len) {
          best_len = run;
          best_start = run_start;
        }
        run = 0;
      }
    }
    if (best_len == 0) {
      head_ = tail_ = first_live;
      used_ = n;
      return;
    }
    tail_ = best_start;
    head_ = (best_start + best_len) % n;
    used_ = n - best_len;
  }

  Seq watermark(StreamId s) const {
    auto it = watermarks_.find(s);
    return it == watermarks_.end() ? 0 : it->second;
  }
  const std::map<StreamId, Seq>& watermarks() const { return watermarks_; }
  void set_watermark(StreamId s, Seq v) {
    Seq& w = watermarks_[s];
    w = std::max(w, v);
  }
  void reset_watermark(StreamId s, Seq v) { watermarks_[s] = v; }

  void clear_all() {
    for (auto& s : slots_) s[0] = 0;
    head_ = tail_ = used_ = 0;
  }

  void hash_into(Hasher& h) const {
    h.add(head_);
    h.add(used_);
    for (std::uint32_t i = 0, s = head_; i < used_; ++i, s = next(s)) h.add_bytes(slots_[s]);
    for (const auto& [k, v] : watermarks_) {
      h.add(k);
      h.add(v);
    }
  }

 private:
  std::uint32_t next(std::uint32_t i) const { return (i + 1) % capacity(); }

  std::vector<RecordBytes> slots_;
  std::map<StreamId, Seq> watermarks_;
  std::uint32_t head_ = 0;
  std::uint32_t tail_ = 0;
  std::uint32_t used_ = 0;
  std::uint64_t appends_ = 0;
  bool lost_pointers_ = false;
};

}  // namespace riosim
