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

#include <set>
#include <tuple>

#include "riosim/layout.hpp"

using namespace riosim;

TEST(Layout, StripesRoundRobinOverDevices) {
  // 2 targets x 2 SSDs, 4-block stripe unit: devices in target, then SSD order.
  auto v = VolumeLayout::uniform(2, 2, SsdSpec{}, 4);
  EXPECT_EQ(v.num_devices(), 4u);
  EXPECT_EQ(v.route(0), (Route{0, 0, 0}));
  EXPECT_EQ(v.route(3), (Route{0, 0, 3}));
  EXPECT_EQ(v.route(4), (Route{0, 1, 0}));
  EXPECT_EQ(v.route(8), (Route{1, 0, 0}));
  EXPECT_EQ(v.route(13), (Route{1, 1, 1}));
  EXPECT_EQ(v.route(16), (Route{0, 0, 4}));
  EXPECT_EQ(v.target_of(9), 1);
}

TEST(Layout, RouteIsInjective) {
  auto v = VolumeLayout::uniform(3, 2, SsdSpec{}, 8);
  std::set<std::tuple<TargetId, std::uint16_t, std::uint64_t>> seen;
  for (std::uint64_t lba = 0; lba < 4096; ++lba) {
    const Route r = v.route(lba);
    EXPECT_TRUE(seen.insert({r.target, r.ssd, r.device_lba}).second) << lba;
  }
}

TEST(Layout, Contiguity) {
  auto v = VolumeLayout::uniform(2, 1, SsdSpec{}, 32);
  EXPECT_TRUE(v.contiguous(0, 32));
  EXPECT_FALSE(v.contiguous(16, 32));
  EXPECT_EQ(v.contiguous_prefix(16, 32), 16u);
  EXPECT_EQ(v.contiguous_prefix(0, 10), 10u);
  auto one = VolumeLayout::uniform(1, 1, SsdSpec{}, 4);
  EXPECT_TRUE(one.contiguous(2, 100));
  EXPECT_EQ(one.contiguous_prefix(2, 100), 100u);
}

TEST(Layout, RejectsBadShapes) {
  EXPECT_THROW(VolumeLayout({}, 4), std::invalid_argument);
  EXPECT_THROW(VolumeLayout::uniform(1, 1, SsdSpec{}, 0), std::invalid_argument);
  EXPECT_THROW(VolumeLayout::uniform(1, 0, SsdSpec{}, 4), std::invalid_argument);
  EXPECT_THROW(VolumeLayout::uniform(1, 1, SsdSpec{0, false}, 4), std::invalid_argument);
  EXPECT_THROW(VolumeLayout({TargetSpec{1, {SsdSpec{}}}}, 4), std::invalid_argument);
}

TEST(Layout, VolatileTargets) {
  VolumeLayout v({TargetSpec{0, {SsdSpec{32, true}}}, TargetSpec{1, {SsdSpec{32, true}, SsdSpec{32, false}}}}, 4);
  EXPECT_FALSE(v.any_volatile(0));
  EXPECT_TRUE(v.any_volatile(1));
}
