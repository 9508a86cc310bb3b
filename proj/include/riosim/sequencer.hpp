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
#include <map>
#include <set>
#include <stdexcept>
#include <vector>

#include "riosim/core.hpp"
#include "riosim/layout.hpp"

namespace riosim {

struct SubmitFlags {
  bool group_end = false;
  bool flush = false;
  bool ipu = false;
};

struct SubmitHandle {
  StreamId stream_id = 0;
  Seq seq = 0;
  bool group_end = false;
  std::uint64_t token = 0;

  bool operator==(const SubmitHandle&) const = default;
};

enum class WaitStatus { kDone, kPending, kRetry };

struct Submission {
  SubmitHandle handle;
  WriteRequest request;
};

// Per-stream sequencing state. Streams share nothing, so distinct streams can
// be driven from distinct threads when each owns its Stream.
struct Stream {
  StreamId stream_id = 0;
  Seq next_seq = 1;
  std::uint32_t open_group_size = 0;
  std::map<TargetId, Seq> last_seq_per_target;
  std::map<TargetId, Seq> group_prev_per_target;  // prev handed to the open group, per target
  std::set<Seq> pending_completions;              // device-complete, not yet released
  Seq released_through = 0;
  std::uint16_t nic_queue_id = 0;
  bool connection_lost = false;
};

// Turns submissions into attributed requests and releases completions to the
// application in ascending group order.
class Sequencer {
 public:
  Sequencer(std::uint16_t num_streams, VolumeLayout volume, std::uint16_t num_nic_queues)
      : volume_(std::move(volume)) {
    if (num_streams == 0) throw std::invalid_argument("rio_setup: num_streams must be >= 1");
    if (num_nic_queues == 0) throw std::invalid_argument("rio_setup: need at least one NIC queue");
    if (volume_.num_targets() == 0) throw std::invalid_argument("rio_setup: empty volume");
    streams_.resize(num_streams);
    for (std::uint16_t i = 0; i < num_streams; ++i) {
      streams_[i].stream_id = i;
      streams_[i].nic_queue_id = static_cast<std::uint16_t>(i % num_nic_queues);
    }
  }

  std::size_t num_streams() const { return streams_.size(); }
  const Stream& stream(StreamId id) const { return streams_.at(checked(id)); }
  const VolumeLayout& volume() const { return volume_; }
  std::uint64_t flush_on_nonfinal() const { return flush_on_nonfinal_; }

  // Builds the attributed request. Never waits on earlier requests.
  Submission submit(StreamId id, std::uint64_t lba, std::uint32_t len, SubmitFlags flags,
                    std::vector<Fingerprint> payload = {}) {
    Stream& s = streams_[checked(id)];
    if (len == 0) throw std::invalid_argument("rio_submit: zero-length request");
    if (!payload.empty() && payload.size() != len)
      throw std::invalid_argument("rio_submit: payload size does not match len");

    const Seq seq = s.next_seq;
    const TargetId target = volume_.target_of(lba);

    Seq& last = s.last_seq_per_target[target];
    Seq prev;
    if (last == seq) {
      prev = s.group_prev_per_target[target];
    } else {
      prev = last;
      s.group_prev_per_target[target] = last;
      last = seq;
    }

    WriteRequest req;
    req.attr.seq_start = seq;
    req.attr.seq_end = seq;
    req.attr.prev = prev;
    req.attr.lba = lba;
    req.attr.len = len;
    req.attr.ipu = flags.ipu;
    req.attr.flush = flags.flush;
    req.attr.stream_id = id;
    req.attr.group_end = flags.group_end;
    req.ordered = true;
    req.target_id = target;
    req.group_start = s.open_group_size == 0;
    if (payload.empty()) {
      payload.reserve(len);
      for (std::uint32_t i = 0; i < len; ++i) payload.push_back(make_fingerprint(id, seq, lba + i));
    }
    req.payload = std::move(payload);

    if (flags.flush && !flags.group_end) ++flush_on_nonfinal_;

    if (flags.group_end) {
      req.attr.num = s.open_group_size + 1;
      s.open_group_size = 0;
      s.group_prev_per_target.clear();
      ++s.next_seq;
    } else {
      ++s.open_group_size;
    }
    return Submission{SubmitHandle{id, seq, flags.group_end, ++tokens_}, std::move(req)};
  }

  // Returns the newly releasable groups, in order.
  std::vector<Seq> on_device_completion(StreamId id, Seq seq) {
    Stream& s = streams_[checked(id)];
    if (seq == 0 || !group_submitted(s, seq))
      throw ContractViolation("completion for a group that was never submitted");
    std::vector<Seq> released;
    if (seq <= s.released_through) return released;
    s.pending_completions.insert(seq);
    while (!s.pending_completions.empty() &&
           *s.pending_completions.begin() == s.released_through + 1) {
      s.pending_completions.erase(s.pending_completions.begin());
      released.push_back(++s.released_through);
    }
    return released;
  }

  // A non-final request completes together with its group.
  WaitStatus wait(const SubmitHandle& h) const {
    const Stream& s = streams_.at(checked(h.stream_id));
    if (h.seq <= s.released_through) return WaitStatus::kDone;
    if (s.connection_lost) return WaitStatus::kRetry;
    return WaitStatus::kPending;
  }

  void set_connection_lost(StreamId id, bool lost) { streams_[checked(id)].connection_lost = lost; }

 private:
  std::size_t checked(StreamId id) const {
    if (id >= streams_.size()) throw std::out_of_range("unknown stream");
    return id;
  }

  static bool group_submitted(const Stream& s, Seq seq) {
    return seq < s.next_seq || (seq == s.next_seq && s.open_group_size > 0);
  }

  VolumeLayout volume_;
  std::vector<Stream> streams_;
  std::uint64_t tokens_ = 0;
  std::uint64_t flush_on_nonfinal_ = 0;
};

}  // namespace riosim
