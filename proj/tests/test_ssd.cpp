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

#include <gtest/gtest.h>

#include <algorithm>

#include "riosim/ssd.hpp"

using namespace riosim;

namespace {

RecordBytes rec(Seq seq, std::uint64_t lba = 0) {
  OrderingAttribute a;
  a.seq_start = a.seq_end = seq;
  a.lba = lba;
  a.len = 1;
  return encode_attr(a);
}

std::vector<Seq> seqs(const PmrLog& log) {
  std::vector<Seq> out;
  for (const auto& r : log.scan().records) out.push_back(r.attr.seq_start);
  return out;
}

bool has(const std::vector<std::uint64_t>& v, std::uint64_t x) { return std::find(v.begin(), v.end(), x) != v.end(); }

}  // namespace

TEST(Ssd, WritesLandInCacheOnly) {
  SsdModel d(SsdProfile::flash());
  d.submit(1, 10, {0xAA}, false);
  auto out = d.write_done(1);
  EXPECT_TRUE(has(out.cached, 1));
  EXPECT_TRUE(out.persisted.empty());
  EXPECT_EQ(d.read(10), Fingerprint{0xAA});
  EXPECT_TRUE(d.media().empty());
  d.power_loss();
  EXPECT_FALSE(d.read(10));
  EXPECT_EQ(d.epoch(), 1u);
}

TEST(Ssd, FlushIsABarrier) {
  SsdModel d(SsdProfile::flash());
  d.submit(1, 10, {0xA}, false);
  d.submit(2, 11, {0xB}, true);
  auto o = d.write_done(2);
  EXPECT_FALSE(o.cycle_started);  // op 1 is still in flight
  o = d.write_done(1);
  EXPECT_TRUE(o.cycle_started);
  EXPECT_TRUE(d.cycle_active());
  o = d.flush_end();
  EXPECT_TRUE(has(o.persisted, 1));
  EXPECT_TRUE(has(o.persisted, 2));
  EXPECT_EQ(d.media().at(10), Fingerprint{0xA});
  EXPECT_EQ(d.media().at(11), Fingerprint{0xB});
  EXPECT_TRUE(d.cache().empty());
  EXPECT_THROW(d.flush_end(), ContractViolation);
}

TEST(Ssd, LaterWritesMissTheCycleSnapshot) {
  SsdModel d(SsdProfile::flash());
  d.submit(1, 10, {0xA}, true);
  EXPECT_TRUE(d.write_done(1).cycle_started);
  d.submit(2, 12, {0xC}, false);
  d.write_done(2);
  auto o = d.flush_end();
  EXPECT_FALSE(has(o.persisted, 2));
  EXPECT_FALSE(d.media().contains(12));
  d.power_loss();
  EXPECT_TRUE(d.media().contains(10));
  EXPECT_FALSE(d.read(12));
}

TEST(Ssd, PlpDurableAtCacheTime) {
  SsdModel d(SsdProfile::optane());
  d.submit(1, 10, {0xA}, false);
  auto o = d.write_done(1);
  EXPECT_TRUE(has(o.persisted, 1));
  d.power_loss();
  EXPECT_EQ(d.read(10), Fingerprint{0xA});
}

TEST(Ssd, Contracts) {
  SsdModel d(SsdProfile::flash());
  EXPECT_THROW(d.submit(1, 0, std::vector<Fingerprint>(33, 1), false), ContractViolation);
  d.submit(1, 0, {1}, false);
  EXPECT_THROW(d.submit(1, 0, {1}, false), ContractViolation);
  EXPECT_THROW(d.write_done(9), ContractViolation);
}

TEST(Ssd, ReserveUsesFreeChannels) {
  SsdProfile p = SsdProfile::flash();
  p.parallelism = 2;
  SsdModel d(p);
  EXPECT_EQ(d.reserve(SimTime{}, 0), SimTime{100});
  EXPECT_EQ(d.reserve(SimTime{}, 0), SimTime{100});
  EXPECT_EQ(d.reserve(SimTime{}, 0), SimTime{200});
}

TEST(Pmr, Wraparound) {
  PmrLog log(4);
  for (Seq s = 1; s <= 4; ++s) ASSERT_TRUE(log.append(rec(s)));
  EXPECT_TRUE(log.full());
  EXPECT_FALSE(log.append(rec(9)));
  log.release_head(2);
  ASSERT_TRUE(log.append(rec(5)));
  ASSERT_TRUE(log.append(rec(6)));
  EXPECT_EQ(seqs(log), (std::vector<Seq>{3, 4, 5, 6}));
  // A full ring has no gap to anchor the head; contents survive, order may not.
  log.power_loss();
  log.restart();
  auto after = seqs(log);
  std::sort(after.begin(), after.end());
  EXPECT_EQ(after, (std::vector<Seq>{3, 4, 5, 6}));
  EXPECT_TRUE(log.full());
}

TEST(Pmr, ScanAfterRestart) {
  PmrLog log(16);
  for (Seq s = 1; s <= 3; ++s) log.append(rec(s));
  log.power_loss();
  EXPECT_TRUE(log.scan().records.empty());
  log.restart();
  EXPECT_EQ(seqs(log), (std::vector<Seq>{1, 2, 3}));
  EXPECT_EQ(log.head(), 0u);
  EXPECT_EQ(log.tail(), 3u);
}

TEST(Pmr, RestartAfterWrapFindsHead) {
  PmrLog log(8);
  for (Seq s = 1; s <= 7; ++s) log.append(rec(s));
  log.release_head(5);
  for (Seq s = 8; s <= 10; ++s) log.append(rec(s));
  const auto head = log.head(), tail = log.tail();
  log.power_loss();
  log.restart();
  EXPECT_EQ(log.head(), head);
  EXPECT_EQ(log.tail(), tail);
  EXPECT_EQ(seqs(log), (std::vector<Seq>{6, 7, 8, 9, 10}));
}

TEST(Pmr, EmptyLog) {
  PmrLog log(8);
  log.restart();
  EXPECT_TRUE(log.scan().records.empty());
  EXPECT_EQ(log.used(), 0u);
}

TEST(Pmr, PersistBitAndInvalidate) {
  PmrLog log(8);
  auto a = *log.append(rec(1));
  auto b = *log.append(rec(2));
  log.set_persist(b);
  auto r = log.scan().records;
  EXPECT_FALSE(r[0].attr.persist);
  EXPECT_TRUE(r[1].attr.persist);
  log.invalidate(a);
  EXPECT_EQ(log.used(), 1u);
  EXPECT_EQ(seqs(log), (std::vector<Seq>{2}));
}

TEST(Pmr, CorruptRecordStopsScan) {
  PmrLog log(8);
  for (Seq s = 1; s <= 3; ++s) log.append(rec(s));
  RecordBytes bad = rec(2);
  bad[1] = 0x80;
  log.poke(1, bad);
  auto r = log.scan();
  EXPECT_TRUE(r.corrupt);
  EXPECT_EQ(r.corrupt_slot, 1u);
  EXPECT_EQ(r.records.size(), 1u);
  EXPECT_NE(r.error.find("flags"), std::string::npos);
}

TEST(Pmr, Watermarks) {
  PmrLog log(4);
  log.set_watermark(0, 5);
  log.set_watermark(0, 3);
  EXPECT_EQ(log.watermark(0), 5u);
  log.reset_watermark(0, 2);
  EXPECT_EQ(log.watermark(0), 2u);
  EXPECT_EQ(log.watermark(1), 0u);
}
