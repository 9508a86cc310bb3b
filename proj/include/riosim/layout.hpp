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
#include <stdexcept>
#include <vector>

#include "riosim/core.hpp"

namespace riosim {

struct SsdSpec {
  std::uint32_t max_transfer_blocks = 32;  // 128 KB
  bool plp = false;
};

struct TargetSpec {
  TargetId target_id = 0;
  std::vector<SsdSpec> ssds;
};

// Logical volume striped round-robin over every SSD of every target, in
// target order then SSD order.
class VolumeLayout {
 public:
  VolumeLayout() = default;

  VolumeLayout(std::vector<TargetSpec> targets, std::uint32_t stripe_unit_blocks)
      : targets_(std::move(targets)), stripe_unit_(stripe_unit_blocks) {
    if (targets_.empty()) throw std::invalid_argument("volume has no targets");
    if (stripe_unit_ == 0) throw std::invalid_argument("stripe_unit_blocks must be positive");
    for (std::size_t t = 0; t < targets_.size(); ++t) {
      if (targets_[t].ssds.empty()) throw std::invalid_argument("target has no SSDs");
      if (targets_[t].target_id != t) throw std::invalid_argument("target ids must be 0..n-1");
      for (std::size_t s = 0; s < targets_[t].ssds.size(); ++s) {
        const auto& spec = targets_[t].ssds[s];
        if (spec.max_transfer_blocks == 0 || spec.max_transfer_blocks > record::kMaxLen)
          throw std::invalid_argument("max_transfer_blocks out of range");
        devices_.push_back({static_cast<TargetId>(t), static_cast<std::uint16_t>(s)});
      }
    }
  }

  static VolumeLayout uniform(std::size_t num_targets, std::size_t ssds_per_target, SsdSpec spec,
                              std::uint32_t stripe_unit_blocks) {
    std::vector<TargetSpec> ts;
    for (std::size_t t = 0; t < num_targets; ++t)
      ts.push_back({static_cast<TargetId>(t), std::vector<SsdSpec>(ssds_per_target, spec)});
    return VolumeLayout(std::move(ts), stripe_unit_blocks);
  }

  const std::vector<TargetSpec>& targets() const { return targets_; }
  std::size_t num_targets() const { return targets_.size(); }
  std::size_t num_devices() const { return devices_.size(); }
  std::uint32_t stripe_unit() const { return stripe_unit_; }

  const SsdSpec& ssd(TargetId t, std::uint16_t s) const { return targets_.at(t).ssds.at(s); }

  Route route(std::uint64_t lba) const {
    const std::uint64_t unit = lba / stripe_unit_;
    const std::uint64_t n = devices_.size();
    const auto& dev = devices_[unit % n];
    return Route{dev.target, dev.ssd, (unit / n) * stripe_unit_ + lba % stripe_unit_};
  }

  TargetId target_of(std::uint64_t lba) const { return route(lba).target; }

  // True when [lba, lba+len) is one contiguous extent on a single device.
  bool contiguous(std::uint64_t lba, std::uint32_t len) const {
    if (len <= 1) return true;
    const Route first = route(lba);
    const Route last = route(lba + len - 1);
    return first.target == last.target && first.ssd == last.ssd &&
           last.device_lba == first.device_lba + len - 1 &&
           (devices_.size() == 1 || lba / stripe_unit_ == (lba + len - 1) / stripe_unit_);
  }

  // Length of the longest prefix of [lba, lba+len) that stays on one device contiguously.
  std::uint32_t contiguous_prefix(std::uint64_t lba, std::uint32_t len) const {
    if (devices_.size() == 1) return len;
    const std::uint64_t to_boundary = stripe_unit_ - lba % stripe_unit_;
    return static_cast<std::uint32_t>(std::min<std::uint64_t>(len, to_boundary));
  }

  bool any_volatile(TargetId t) const {
    for (const auto& s : targets_.at(t).ssds)
      if (!s.plp) return true;
    return false;
  }

 private:
  struct Device {
    TargetId target;
    std::uint16_t ssd;
  };
  std::vector<TargetSpec> targets_;
  std::uint32_t stripe_unit_ = 1;
  std::vector<Device> devices_;
};

}  // namespace riosim
