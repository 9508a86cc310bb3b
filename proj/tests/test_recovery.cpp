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

#include "riosim/recovery.hpp"

using namespace riosim;

namespace {

OrderingAttribute attr(Seq key, Seq prev, std::uint64_t lba, std::uint32_t num = 1, StreamId s = 0) {
  OrderingAttribute a;
  a.stream_id = s;
  a.seq_start = a.seq_end = key;
  a.prev = prev;
  a.num = num;
  a.group_end = true;
  a.lba = lba;
  a.len = 1;
  return a;
}

void put(ServerList& sl, const OrderingAttribute& a, bool valid) {
  PersistenceRecord r{a, static_cast<std::uint32_t>(sl.live[a.stream_id].size())};
  sl.live[a.stream_id].push_back(r);
  if (valid) sl.valid[a.stream_id].push_back(r);
  ++sl.scanned;
}

ServerList server(TargetId t) {
  ServerList s;
  s.target = t;
  return s;
}

// Two servers. Groups 1 and 3 certified on server 0, group 2 on server 1,
// group 4 never reached a log and group 5 is on server 0 but uncertified.
std::vector<ServerList> crash_scene() {
  auto a = server(0), b = server(1);
  put(a, attr(1, 0, 0), true);
  put(a, attr(3, 1, 2), true);
  put(a, attr(5, 3, 4), false);
  put(b, attr(2, 0, 101), true);
  return {a, b};
}

}  // namespace

TEST(Merge, InitiatorPrefixAndDrop) {
  auto g = merge_lists(crash_scene(), RecoveryMode::kInitiator);
  const auto& so = g.streams.at(0);
  EXPECT_EQ(so.prefix, 3u);
  EXPECT_EQ(so.list, (std::vector<Seq>{1, 2, 3}));
  EXPECT_EQ(so.drop, (std::set<Seq>{5}));
  EXPECT_TRUE(so.replay.empty());
  EXPECT_FALSE(g.corrupt);
}

TEST(Merge, TargetFailureReplaysInsteadOfDropping) {
  auto a = server(0), b = server(1);
  put(a, attr(1, 0, 0), true);
  put(a, attr(3, 1, 2), true);
  put(a, attr(5, 3, 4), true);
  put(b, attr(2, 0, 101), true);
  put(b, attr(4, 2, 103), false);
  auto g = merge_lists({a, b}, RecoveryMode::kTargetFailure, {1});
  const auto& so = g.streams.at(0);
  EXPECT_EQ(so.prefix, 3u);
  EXPECT_TRUE(so.drop.empty());
  EXPECT_EQ(so.replay, (std::set<Seq>{4}));
}

TEST(Merge, EmptyLists) {
  EXPECT_TRUE(merge_lists({}, RecoveryMode::kInitiator).streams.empty());
  auto a = server(0);
  a.watermarks[0] = 7;
  auto g = merge_lists({a}, RecoveryMode::kInitiator);
  EXPECT_EQ(g.prefix(0), 7u);
  EXPECT_TRUE(g.streams.at(0).list.empty());
  EXPECT_EQ(g.prefix(3), 0u);
}

TEST(Merge, GroupNeedsEveryRecord) {
  auto a = server(0), b = server(1);
  put(a, attr(1, 0, 0, 2), true);
  auto g = merge_lists({a, b}, RecoveryMode::kInitiator);
  EXPECT_EQ(g.prefix(0), 0u);
  EXPECT_EQ(g.streams.at(0).drop, (std::set<Seq>{1}));
  put(b, attr(1, 0, 100, 2), true);
  EXPECT_EQ(merge_lists({a, b}, RecoveryMode::kInitiator).prefix(0), 1u);
}

TEST(Merge, FlushMemberCountsTowardGroup) {
  auto a = server(0), b = server(1);
  put(a, attr(1, 0, 0, 1), true);
  auto data = attr(2, 0, 100, 2);
  data.flush = true;
  put(b, data, true);
  auto member = attr(2, 1, 0, 0);
  member.len = 0;
  member.flush = true;
  member.group_end = false;
  put(a, member, true);
  EXPECT_EQ(merge_lists({a, b}, RecoveryMode::kInitiator).prefix(0), 2u);
}

TEST(Merge, MergedRecordCompletesRange) {
  auto a = server(0);
  auto m = attr(1, 0, 0, 3);
  m.seq_end = 3;
  m.len = 3;
  put(a, m, true);
  auto g = merge_lists({a}, RecoveryMode::kInitiator);
  EXPECT_EQ(g.prefix(0), 3u);
}

TEST(Merge, MergedRecordIsAllOrNothing) {
  auto a = server(0);
  auto m = attr(1, 0, 0, 3);
  m.seq_end = 3;
  m.len = 3;
  put(a, m, false);
  auto g = merge_lists({a}, RecoveryMode::kInitiator);
  EXPECT_EQ(g.prefix(0), 0u);
  EXPECT_EQ(g.streams.at(0).drop, (std::set<Seq>{1, 2, 3}));
}

TEST(Merge, SplitPartsRejoin) {
  auto a = server(0), b = server(1);
  auto p0 = attr(1, 0, 2, 1);
  p0.len = 2;
  p0.split = SplitDesc{1, 0, 2};
  auto p1 = attr(1, 0, 4, 1);
  p1.len = 2;
  p1.split = SplitDesc{1, 1, 2};
  put(a, p0, true);
  EXPECT_EQ(merge_lists({a, b}, RecoveryMode::kInitiator).prefix(0), 0u);
  put(b, p1, true);
  EXPECT_EQ(merge_lists({a, b}, RecoveryMode::kInitiator).prefix(0), 1u);
}

TEST(Merge, DetectsCorruption) {
  auto a = server(0), b = server(1);
  put(a, attr(1, 0, 0, 1), true);
  put(b, attr(1, 0, 100, 2), true);
  auto g = merge_lists({a, b}, RecoveryMode::kInitiator);
  EXPECT_TRUE(g.corrupt);
  EXPECT_FALSE(g.errors.empty());

  auto c = server(0);
  c.corrupt = true;
  c.error = "flags: reserved bits set";
  auto h = merge_lists({c}, RecoveryMode::kInitiator);
  ASSERT_EQ(h.errors.size(), 1u);
  EXPECT_NE(h.errors[0].find("target 0"), std::string::npos);
}

TEST(Merge, StreamsIndependent) {
  auto a = server(0);
  put(a, attr(1, 0, 0, 1, 0), true);
  put(a, attr(1, 0, 50, 2, 1), true);
  auto g = merge_lists({a}, RecoveryMode::kInitiator);
  EXPECT_EQ(g.prefix(0), 1u);
  EXPECT_EQ(g.prefix(1), 0u);
}

TEST(Rollback, ErasesBeyondPrefix) {
  auto servers = crash_scene();
  auto g = merge_lists(servers, RecoveryMode::kInitiator);
  auto plan = rollback(g, servers);
  ASSERT_EQ(plan.erase.size(), 1u);
  EXPECT_EQ(plan.erase[0], (EraseCommand{0, 4, 1, 0, 5}));
  EXPECT_TRUE(plan.ipu.empty());
}

TEST(Rollback, IpuGoesToPolicy) {
  auto servers = crash_scene();
  auto ipu = attr(4, 3, 200);
  ipu.ipu = true;
  put(servers[1], ipu, false);
  auto g = merge_lists(servers, RecoveryMode::kInitiator);
  ReportOnlyPolicy report;
  auto plan = rollback(g, servers, &report);
  EXPECT_EQ(plan.erase.size(), 1u);
  ASSERT_EQ(report.reported.size(), 1u);
  EXPECT_EQ(report.reported[0].attr.seq_end, 4u);

  EraseLaterMetadataPolicy keep;
  rollback(g, servers, &keep);
  EXPECT_EQ(keep.retained.size(), 1u);
  EXPECT_EQ(keep.discarded_after.at(0), (std::set<Seq>{5}));
}

TEST(Replay, SelectsUncertifiedUnitsForTarget) {
  ServerList sl = server(1);
  put(sl, attr(2, 0, 101), true);
  WriteRequest done, lost, elsewhere;
  done.attr = attr(2, 0, 101);
  done.target_id = 1;
  lost.attr = attr(4, 2, 103);
  lost.target_id = 1;
  elsewhere.attr = attr(3, 1, 2);
  elsewhere.target_id = 0;
  EXPECT_TRUE(unit_valid_on(done, sl));
  EXPECT_FALSE(unit_valid_on(lost, sl));
  auto r = select_replays({done, lost, elsewhere}, sl);
  ASSERT_EQ(r.size(), 1u);
  EXPECT_EQ(r[0].attr.seq_end, 4u);
}

TEST(RecoveryTime, ZeroWhenNothingToDo) {
  auto t = recovery_time_report({server(0)}, {}, 0);
  EXPECT_EQ(t.order_rebuild_ticks, 0u);
  EXPECT_EQ(t.data_recovery_ticks, 0u);
}

TEST(RecoveryTime, LinearInRecords) {
  RecoveryTimingParams p;
  for (std::uint32_t n : {100u, 1000u, 10000u}) {
    auto s = server(0);
    s.scanned = n;
    auto t = recovery_time_report({s, server(1)}, {}, 0, p);
    EXPECT_EQ(t.order_rebuild_ticks, n * (p.pmr_read_ticks + p.transfer_ticks) + p.fabric_base_ticks);
  }
  auto t = recovery_time_report({}, {{{0, 0}, 16}, {{1, 0}, 8}}, 5, p);
  EXPECT_EQ(t.data_recovery_ticks, (16 * p.write_ticks) / p.parallelism + 5);
}
