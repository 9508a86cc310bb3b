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
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "riosim/sequencer.hpp"

namespace riosim {

enum class WorkloadKind { kJournal3, kRandom4k, kSeq, kBatch, kIpuMix, kChain };

struct WorkloadSpec {
  WorkloadKind kind = WorkloadKind::kJournal3;
  std::uint32_t seq_blocks = 4;    // seqNk: N KB / 4 KB
  std::uint32_t batch = 1;         // batch(k)
  double ipu_fraction = 0.0;       // ipu_mix(p)
  std::uint32_t groups_per_thread = 2000;
  bool flush = true;               // final request of each group carries FLUSH
  std::uint32_t num_targets = 2;   // chain workload spreads groups over targets
};

struct AppRequest {
  std::uint64_t lba = 0;
  std::uint32_t len = 1;
  SubmitFlags flags;
};

struct LbaRange {
  std::uint64_t start = 0;
  std::uint64_t blocks = 0;
};

inline void check_disjoint(const std::vector<LbaRange>& ranges) {
  std::vector<LbaRange> r = ranges;
  std::sort(r.begin(), r.end(), [](const LbaRange& a, const LbaRange& b) { return a.start < b.start; });
  for (std::size_t i = 1; i < r.size(); ++i)
    if (r[i - 1].start + r[i - 1].blocks > r[i].start)
      throw std::invalid_argument("workload: overlapping per-thread LBA ranges");
}

inline std::string workload_name(const WorkloadSpec& w) {
  switch (w.kind) {
    case WorkloadKind::kJournal3: return "journal3";
    case WorkloadKind::kRandom4k: return "random4k";
    case WorkloadKind::kSeq: return "seq" + std::to_string(w.seq_blocks * 4) + "k";
    case WorkloadKind::kBatch: return "batch(" + std::to_string(w.batch) + ")";
    case WorkloadKind::kIpuMix: return "ipu_mix(" + std::to_string(w.ipu_fraction) + ")";
    case WorkloadKind::kChain: return "chain";
  }
  return "?";
}

// Parses journal3, random4k, seq<N>k, batch(<k>), ipu_mix(<p>), chain.
inline WorkloadSpec parse_workload(const std::string& s, WorkloadSpec base = {}) {
  auto arg = [&](std::size_t open) {
    const auto close = s.find(')', open);
    if (close == std::string::npos) throw std::invalid_argument("workload: missing ')' in " + s);
    return s.substr(open + 1, close - open - 1);
  };
  if (s == "journal3") {
    base.kind = WorkloadKind::kJournal3;
  } else if (s == "random4k") {
    base.kind = WorkloadKind::kRandom4k;
  } else if (s == "chain") {
    base.kind = WorkloadKind::kChain;
  } else if (s.rfind("seq", 0) == 0 && s.size() > 4 && s.back() == 'k') {
    const std::uint32_t kb = static_cast<std::uint32_t>(std::stoul(s.substr(3, s.size() - 4)));
    if (kb == 0 || kb % 4 != 0) throw std::invalid_argument("workload: seqNk needs N a positive multiple of 4");
    base.kind = WorkloadKind::kSeq;
    base.seq_blocks = kb / 4;
  } else if (s.rfind("batch(", 0) == 0) {
    base.kind = WorkloadKind::kBatch;
    base.batch = static_cast<std::uint32_t>(std::stoul(arg(5)));
    if (base.batch == 0) throw std::invalid_argument("workload: batch size must be positive");
  } else if (s.rfind("ipu_mix(", 0) == 0) {
    base.kind = WorkloadKind::kIpuMix;
    base.ipu_fraction = std::stod(arg(7));
    if (base.ipu_fraction < 0 || base.ipu_fraction > 1) throw std::invalid_argument("workload: ipu_mix p outside [0,1]");
  } else {
    throw std::invalid_argument("workload: unknown kind " + s);
  }
  return base;
}

// Per-thread request streams over private LBA ranges. Out-of-place workloads
// never write a block twice, so rollback can erase without losing older data.
class Workload {
 public:
  Workload() = default;
  Workload(WorkloadSpec spec, std::uint32_t threads, std::uint64_t seed, std::uint32_t stripe_unit)
      : spec_(spec) {
    if (threads == 0) throw std::invalid_argument("threads must be >= 1");
    if (spec_.groups_per_thread == 0) throw std::invalid_argument("groups_per_thread must be >= 1");
    std::uint64_t need = std::uint64_t{spec_.groups_per_thread} * blocks_per_group();
    need = (need + stripe_unit - 1) / stripe_unit * stripe_unit;
    if (spec_.kind == WorkloadKind::kChain) need = std::uint64_t{spec_.groups_per_thread + 1} * 2 * stripe_unit * spec_.num_targets;
    for (std::uint32_t t = 0; t < threads; ++t) ranges_.push_back({t * need, need});
    check_disjoint(ranges_);
    state_.resize(threads);
    for (std::uint32_t t = 0; t < threads; ++t) {
      auto& st = state_[t];
      st.rng.seed(seed * 0x9E3779B97F4A7C15ull + t + 1);
      if (spec_.kind == WorkloadKind::kRandom4k || spec_.kind == WorkloadKind::kIpuMix) {
        st.perm.resize(need);
        for (std::uint64_t i = 0; i < need; ++i) st.perm[i] = i;
        std::shuffle(st.perm.begin(), st.perm.end(), st.rng);
      }
    }
    stripe_unit_ = stripe_unit;
  }

  const WorkloadSpec& spec() const { return spec_; }
  const std::vector<LbaRange>& ranges() const { return ranges_; }
  std::uint32_t groups_per_thread() const { return spec_.groups_per_thread; }

  std::uint32_t blocks_per_group() const {
    switch (spec_.kind) {
      case WorkloadKind::kJournal3: return 3;
      case WorkloadKind::kSeq: return spec_.seq_blocks;
      case WorkloadKind::kBatch: return spec_.batch;
      case WorkloadKind::kChain: return 2;
      default: return 1;
    }
  }

  // The g-th group (0-based) of a thread.
  std::vector<AppRequest> next_group(StreamId t, std::uint64_t g) {
    auto& st = state_.at(t);
    const LbaRange r = ranges_.at(t);
    std::vector<AppRequest> out;
    auto last = [&](std::vector<AppRequest>& v) {
      v.back().flags.group_end = true;
      v.back().flags.flush = spec_.flush;
    };
    switch (spec_.kind) {
      case WorkloadKind::kJournal3: {
        const std::uint64_t base = r.start + g * 3;
        out.push_back({base, 2, {}});
        out.push_back({base + 2, 1, {}});
        break;
      }
      case WorkloadKind::kRandom4k:
        out.push_back({r.start + st.perm[g], 1, {}});
        break;
      case WorkloadKind::kSeq:
        out.push_back({r.start + g * spec_.seq_blocks, spec_.seq_blocks, {}});
        break;
      case WorkloadKind::kBatch:
        for (std::uint32_t i = 0; i < spec_.batch; ++i) out.push_back({r.start + g * spec_.batch + i, 1, {}});
        break;
      case WorkloadKind::kIpuMix: {
        std::bernoulli_distribution coin(spec_.ipu_fraction);
        if (!st.written.empty() && coin(st.rng)) {
          std::uniform_int_distribution<std::size_t> pick(0, st.written.size() - 1);
          AppRequest a{st.written[pick(st.rng)], 1, {}};
          a.flags.ipu = true;
          out.push_back(a);
        } else {
          const std::uint64_t lba = r.start + st.perm[st.fresh++];
          st.written.push_back(lba);
          out.push_back({lba, 1, {}});
        }
        break;
      }
      case WorkloadKind::kChain: {
        // Group g of thread t writes on target (g + t) % n; every third group
        // adds a block on the next target. Odd groups flush.
        const std::uint32_t n = spec_.num_targets;
        const std::uint64_t row = r.start + g * 2 * stripe_unit_ * n;
        const std::uint32_t first = static_cast<std::uint32_t>((g + t) % n);
        out.push_back({row + std::uint64_t{first} * stripe_unit_, 1, {}});
        if (g % 3 == 2 && n > 1) out.push_back({row + std::uint64_t{(first + 1) % n} * stripe_unit_, 1, {}});
        last(out);
        out.back().flags.flush = spec_.flush && g % 2 == 1;
        return out;
      }
    }
    last(out);
    return out;
  }

 private:
  struct ThreadState {
    std::mt19937_64 rng;
    std::vector<std::uint64_t> perm;
    std::vector<std::uint64_t> written;
    std::uint64_t fresh = 0;
  };
  WorkloadSpec spec_;
  std::vector<LbaRange> ranges_;
  std::vector<ThreadState> state_;
  std::uint32_t stripe_unit_ = 32;
};

}  // namespace riosim
