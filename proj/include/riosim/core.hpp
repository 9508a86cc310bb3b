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

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace riosim {

using StreamId = std::uint16_t;
using TargetId = std::uint16_t;
using Seq = std::uint64_t;
using Fingerprint = std::uint64_t;

// Modeled time. One tick is 0.1 us.
struct SimTime {
  std::uint64_t ticks = 0;

  constexpr SimTime() = default;
  constexpr explicit SimTime(std::uint64_t t) : ticks(t) {}

  constexpr SimTime operator+(std::uint64_t d) const { return SimTime{ticks + d}; }
  constexpr auto operator<=>(const SimTime&) const = default;
};

inline constexpr std::uint64_t kTicksPerSecond = 10'000'000;

// Raised for contract violations (caller bugs), as opposed to modeled faults.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct SplitDesc {
  Seq parent_seq = 0;
  std::uint16_t part_index = 0;
  std::uint16_t part_count = 0;

  bool operator==(const SplitDesc&) const = default;
};

// Per-request ordering identity. The (stream_id, seq) pair is the global key;
// seq numbering is independent per stream.
struct OrderingAttribute {
  Seq seq_start = 0;
  Seq seq_end = 0;
  Seq prev = 0;            // latest preceding group on the same target, 0 = none
  std::uint32_t num = 0;   // records in the group, only on the group's final record
  bool persist = false;
  std::uint64_t lba = 0;   // 4 KB blocks
  std::uint32_t len = 0;
  std::optional<SplitDesc> split;
  bool ipu = false;
  bool flush = false;
  StreamId stream_id = 0;
  bool group_end = false;

  bool merged() const { return seq_start != seq_end; }
  bool operator==(const OrderingAttribute&) const = default;
};

// Where a volume block lives once the layout has been applied.
struct Route {
  TargetId target = 0;
  std::uint16_t ssd = 0;
  std::uint64_t device_lba = 0;

  bool operator==(const Route&) const = default;
};

struct WriteRequest {
  OrderingAttribute attr;
  std::vector<Fingerprint> payload;  // one fingerprint per 4 KB block
  bool ordered = true;
  TargetId target_id = 0;

  // Filled by the sequencer and scheduler; not part of the on-log record.
  bool group_start = false;     // carries the first request of its first group
  std::uint32_t members = 1;    // application requests coalesced into this one
  Route route;                  // valid after the scheduler emits the request
  std::uint32_t prev_count = 0; // records of group `prev` sent to this target
  std::uint32_t self_count = 0; // flush records: own-group records on this target
  std::uint64_t unit_id = 0;
};

inline constexpr std::size_t kRecordSize = 32;
using RecordBytes = std::array<std::uint8_t, kRecordSize>;

struct PersistenceRecord {
  OrderingAttribute attr;
  std::uint32_t log_slot = 0;
};

class CodecError : public std::runtime_error {
 public:
  CodecError(std::string field, const std::string& what)
      : std::runtime_error(what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

// On-log record layout, little-endian:
//
//   byte  0      magic (high nibble 0xA) | op code (low nibble). Written last;
//                a zero byte marks an empty or invalidated slot, which makes a
//                32-byte record appear atomically.
//   byte  1      flags: bit0 persist, bit1 group_end, bit2 flush, bit3 ipu,
//                bit4 split-present; bits 5-7 reserved (zero)
//   bytes 2-3    stream_id
//   bytes 4-11   seq_start
//   bytes 12-19  seq_end
//   bytes 20-23  prev (32 bits)
//   bytes 24-25  num (16 bits)
//   bytes 26-31  48-bit word: bits 0-33 lba, bits 34-41 len,
//                bits 42-44 split part_index, bits 45-47 split part_count - 1
//
// A split part's parent_seq is its seq_start and is not stored. len 0 is only
// legal on flush-only records.
namespace record {

inline constexpr std::uint8_t kMagic = 0xA0;
inline constexpr std::uint8_t kOpSubmit = 0x1;

inline constexpr std::uint8_t kFlagPersist = 1u << 0;
inline constexpr std::uint8_t kFlagGroupEnd = 1u << 1;
inline constexpr std::uint8_t kFlagFlush = 1u << 2;
inline constexpr std::uint8_t kFlagIpu = 1u << 3;
inline constexpr std::uint8_t kFlagSplit = 1u << 4;
inline constexpr std::uint8_t kFlagReserved = 0xE0;

inline constexpr std::size_t kPersistByte = 1;

inline constexpr std::uint64_t kMaxLba = (1ull << 34) - 1;
inline constexpr std::uint32_t kMaxLen = (1u << 8) - 1;
inline constexpr std::uint16_t kMaxParts = 8;

namespace detail {

inline void put_le(RecordBytes& out, std::size_t off, std::uint64_t v, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[off + i] = static_cast<std::uint8_t>(v >> (8 * i));
}

inline std::uint64_t get_le(const RecordBytes& in, std::size_t off, std::size_t n) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < n; ++i) v |= std::uint64_t{in[off + i]} << (8 * i);
  return v;
}

}  // namespace detail
}  // namespace record

inline RecordBytes encode_attr(const OrderingAttribute& a) {
  using namespace record;
  if (a.seq_start > a.seq_end) throw CodecError("seq_end", "seq_end precedes seq_start");
  if (a.prev > 0xFFFFFFFFull) throw CodecError("prev", "prev does not fit in 32 bits");
  if (a.num > 0xFFFFu) throw CodecError("num", "num does not fit in 16 bits");
  if (a.lba > kMaxLba) throw CodecError("lba", "lba does not fit in 34 bits");
  if (a.len > kMaxLen) throw CodecError("len", "len does not fit in 8 bits");
  if (a.len == 0 && !a.flush) throw CodecError("len", "zero-length record without flush");
  if (a.split) {
    if (a.merged()) throw CodecError("split", "merged attribute cannot carry a split descriptor");
    if (a.split->part_count == 0 || a.split->part_count > kMaxParts)
      throw CodecError("split", "split part_count out of range");
    if (a.split->part_index >= a.split->part_count)
      throw CodecError("split", "split part_index out of range");
    if (a.split->parent_seq != a.seq_start)
      throw CodecError("split", "split parent_seq must equal seq_start");
  }

  RecordBytes out{};
  std::uint8_t flags = 0;
  if (a.persist) flags |= kFlagPersist;
  if (a.group_end) flags |= kFlagGroupEnd;
  if (a.flush) flags |= kFlagFlush;
  if (a.ipu) flags |= kFlagIpu;
  if (a.split) flags |= kFlagSplit;
  out[1] = flags;
  detail::put_le(out, 2, a.stream_id, 2);
  detail::put_le(out, 4, a.seq_start, 8);
  detail::put_le(out, 12, a.seq_end, 8);
  detail::put_le(out, 20, a.prev, 4);
  detail::put_le(out, 24, a.num, 2);
  std::uint64_t word = a.lba | (std::uint64_t{a.len} << 34);
  if (a.split) {
    word |= std::uint64_t{a.split->part_index} << 42;
    word |= std::uint64_t(a.split->part_count - 1) << 45;
  }
  detail::put_le(out, 26, word, 6);
  out[0] = kMagic | kOpSubmit;
  return out;
}

inline OrderingAttribute decode_attr(const RecordBytes& in) {
  using namespace record;
  if (in[0] == 0) throw CodecError("magic", "unset magic/op code");
  if ((in[0] & 0xF0) != kMagic) throw CodecError("magic", "bad magic");
  if ((in[0] & 0x0F) != kOpSubmit) throw CodecError("op", "unknown op code");
  const std::uint8_t flags = in[1];
  if (flags & kFlagReserved) throw CodecError("flags", "reserved flag bits set");

  OrderingAttribute a;
  a.persist = flags & kFlagPersist;
  a.group_end = flags & kFlagGroupEnd;
  a.flush = flags & kFlagFlush;
  a.ipu = flags & kFlagIpu;
  a.stream_id = static_cast<StreamId>(detail::get_le(in, 2, 2));
  a.seq_start = detail::get_le(in, 4, 8);
  a.seq_end = detail::get_le(in, 12, 8);
  a.prev = detail::get_le(in, 20, 4);
  a.num = static_cast<std::uint32_t>(detail::get_le(in, 24, 2));
  const std::uint64_t word = detail::get_le(in, 26, 6);
  a.lba = word & kMaxLba;
  a.len = static_cast<std::uint32_t>((word >> 34) & 0xFF);
  const auto index = static_cast<std::uint16_t>((word >> 42) & 0x7);
  const auto count = static_cast<std::uint16_t>(((word >> 45) & 0x7) + 1);

  if (a.seq_start > a.seq_end) throw CodecError("seq_end", "seq_end precedes seq_start");
  if (flags & kFlagSplit) {
    if (a.merged()) throw CodecError("split", "merged record carries a split descriptor");
    a.split = SplitDesc{a.seq_start, index, count};
  } else if (index != 0 || count != 1) {
    throw CodecError("split", "split bits set without split flag");
  }
  if (a.len == 0 && !a.flush) throw CodecError("len", "zero-length record without flush");
  return a;
}

inline std::string to_hex(std::span<const std::uint8_t> bytes) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string s;
  s.reserve(bytes.size() * 2);
  for (auto b : bytes) {
    s.push_back(kDigits[b >> 4]);
    s.push_back(kDigits[b & 0xF]);
  }
  return s;
}

// Order-sensitive 64-bit state hasher (FNV-1a over words).
class Hasher {
 public:
  void add(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h_ ^= (v >> (8 * i)) & 0xFF;
      h_ *= 0x100000001B3ull;
    }
  }
  void add_bytes(std::span<const std::uint8_t> b) {
    for (auto x : b) {
      h_ ^= x;
      h_ *= 0x100000001B3ull;
    }
  }
  std::uint64_t value() const { return h_; }

 private:
  std::uint64_t h_ = 0xCBF29CE484222325ull;
};

// Deterministic block content fingerprint for generated payloads.
inline Fingerprint make_fingerprint(StreamId stream, Seq seq, std::uint64_t lba) {
  std::uint64_t x = (std::uint64_t{stream} << 48) ^ (seq * 0x9E3779B97F4A7C15ull) ^ (lba + 0x632BE59BD9B4E019ull);
  x ^= x >> 33;
  x *= 0xFF51AFD7ED558CCDull;
  x ^= x >> 33;
  x *= 0xC4CEB9FE1A85EC53ull;
  x ^= x >> 33;
  return x | 1;  // never zero
}

}  // namespace riosim
