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
#include <cstdio>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "riosim/config.hpp"
#include "riosim/core.hpp"
#include "riosim/fabric.hpp"
#include "riosim/layout.hpp"
#include "riosim/recovery.hpp"
#include "riosim/scheduler.hpp"
#include "riosim/sequencer.hpp"
#include "riosim/ssd.hpp"
#include "riosim/target.hpp"
#include "riosim/workload.hpp"

namespace riosim {

struct EvIssue {
  StreamId stream = 0;
};
struct EvPlug {
  StreamId stream = 0;
  std::uint64_t window = 0;
};
struct EvDeliver {
  ChannelKey ch;
  std::uint64_t chan_seq = 0;
  std::uint64_t conn_epoch = 0;
  FabricCommand cmd;
};
struct EvWriteDone {
  TargetId target = 0;
  std::uint16_t ssd = 0;
  std::uint64_t op = 0;
  std::uint64_t epoch = 0;
};
struct EvFlushEnd {
  TargetId target = 0;
  std::uint16_t ssd = 0;
  std::uint64_t epoch = 0;
};
struct EvRetry {
  std::uint64_t unit_id = 0;
};
struct EvRestart {
  TargetId target = 0;
};

using Event = std::variant<EvIssue, EvPlug, EvDeliver, EvWriteDone, EvFlushEnd, EvRetry, EvRestart>;

struct PendingEvent {
  SimTime at;
  std::uint64_t id = 0;
  Event ev;
};

struct CrashPlan {
  enum class Kind { kNone, kTarget, kInitiator, kWholeCluster, kAllTargets };
  Kind kind = Kind::kNone;
  TargetId target = 0;
  std::optional<std::uint64_t> at_event;  // processed-event index
  std::optional<std::uint64_t> at_tick;
};

struct RecoveryOutcome {
  CrashPlan::Kind kind = CrashPlan::Kind::kNone;
  std::vector<ServerList> lists;
  GlobalOrderingList global;
  RollbackPlan plan;
  RecoveryTimes times;
  std::uint64_t replayed_units = 0;
  std::uint64_t erased_blocks = 0;
};

struct MetricsReport {
  std::string mode;
  std::string workload;
  std::uint32_t threads = 0;
  std::uint64_t elapsed_ticks = 0;
  std::uint64_t completed_requests = 0;
  std::uint64_t completed_groups = 0;
  double throughput_ops = 0;     // application requests per simulated second
  double throughput_groups = 0;
  double initiator_cpu_util = 0;
  double target_cpu_util = 0;
  double cpu_efficiency = 0;     // throughput / initiator CPU utilization
  double target_cpu_efficiency = 0;
  std::uint64_t initiator_cpu_ticks = 0;
  std::uint64_t target_cpu_ticks = 0;
  std::uint64_t commands = 0;
  std::uint64_t submit_commands = 0;
  std::uint64_t flush_commands = 0;
  std::uint64_t control_commands = 0;
  std::uint64_t pmr_appends = 0;
  std::uint64_t pmr_ticks = 0;
  std::uint64_t busy_retries = 0;
  bool stalled = false;  // PMR exhausted by records that cannot drain
  double p50_latency_us = 0;
  double p99_latency_us = 0;
  bool finished = false;
  std::optional<RecoveryOutcome> recovery;
};

struct BlockWrite {
  std::uint64_t lba = 0;
  Fingerprint fp = 0;
};

// One simulated cluster: an initiator driving `threads` streams against
// `targets` servers. State is a value: copying a Simulation forks the run.
class Simulation {
 public:
  explicit Simulation(SimConfig cfg, bool explore = false)
      : cfg_(std::move(cfg)),
        explore_(explore),
        layout_(std::make_shared<const VolumeLayout>(
            VolumeLayout::uniform(cfg_.targets, cfg_.ssds_per_target,
                                  SsdSpec{cfg_.ssd.max_transfer_blocks, cfg_.ssd.plp}, cfg_.stripe_unit_blocks))),
        workload_(with_targets(cfg_.workload, cfg_.targets), cfg_.threads, cfg_.seed, cfg_.stripe_unit_blocks),
        sequencer_(static_cast<std::uint16_t>(cfg_.threads), *layout_, cfg_.queues()),
        scheduler_(make_sched_cfg(cfg_), *layout_, stream_queues(cfg_)),
        fabric_(FabricConfig{cfg_.queues(), cfg_.base_latency_ticks, explore ? 0 : cfg_.jitter_ticks, cfg_.seed,
                             cfg_.two_sided_initiator_ticks, cfg_.two_sided_target_ticks,
                             cfg_.one_sided_initiator_ticks}),
        rng_(cfg_.seed ^ 0x5DEECE66Dull) {
    if (cfg_.mode == Mode::kSync) cfg_.iodepth = 1;
    auto layout = layout_;
    for (std::uint32_t t = 0; t < cfg_.targets; ++t) {
      TargetConfig tc;
      tc.id = static_cast<TargetId>(t);
      tc.ssds.assign(cfg_.ssds_per_target, cfg_.ssd);
      tc.pmr_capacity = cfg_.pmr_capacity;
      tc.gate_enabled = cfg_.gate;
      tc.eager_persist = cfg_.eager_persist;
      targets_.emplace_back(tc, [layout](std::uint64_t lba) {
        const Route r = layout->route(lba);
        return layout->ssd(r.target, r.ssd).plp;
      });
    }
    streams_.resize(cfg_.threads);
    history_.resize(cfg_.threads);
    target_cpu_.assign(cfg_.targets, 0);
    if (cfg_.trace) trace_header();
  }

  const SimConfig& config() const { return cfg_; }
  const VolumeLayout& layout() const { return *layout_; }
  const std::vector<TargetNode>& targets() const { return targets_; }
  std::vector<TargetNode>& targets() { return targets_; }
  const Sequencer& sequencer() const { return sequencer_; }
  const Fabric& fabric() const { return fabric_; }
  SimTime now() const { return now_; }
  std::uint64_t events_processed() const { return processed_; }
  const std::string& trace() const { return trace_; }
  bool initiator_up() const { return initiator_up_; }
  const std::vector<std::map<Seq, std::vector<BlockWrite>>>& history() const { return history_; }
  Seq max_acked_flush(StreamId s) const { return streams_.at(s).max_acked_flush; }
  Seq app_released(StreamId s) const { return streams_.at(s).app_done; }
  const std::vector<Seq>& app_completion_log(StreamId s) const { return streams_.at(s).completion_log; }
  const std::vector<std::pair<std::uint64_t, std::string>>& dispatch_log() const { return dispatch_log_; }

  // Visible content of a volume block.
  std::optional<Fingerprint> read_block(std::uint64_t lba) const {
    const Route r = layout_->route(lba);
    return targets_.at(r.target).ssds().at(r.ssd).read(r.device_lba);
  }

  // All durable media, keyed by (target, ssd, device lba).
  std::map<std::tuple<TargetId, std::uint16_t, std::uint64_t>, Fingerprint> media_image() const {
    std::map<std::tuple<TargetId, std::uint16_t, std::uint64_t>, Fingerprint> img;
    for (const auto& t : targets_)
      for (std::uint16_t s = 0; s < t.ssds().size(); ++s)
        for (const auto& [l, f] : t.ssds()[s].media()) img[{t.id(), s, l}] = f;
    return img;
  }

  void start() {
    if (started_) return;
    started_ = true;
    for (StreamId s = 0; s < cfg_.threads; ++s) {
      if (explore_)
        issue(s);
      else
        push(now_, EvIssue{s});
    }
  }

  bool finished() const {
    for (const auto& st : streams_)
      if (st.completed_groups < workload_.groups_per_thread()) return false;
    return true;
  }

  // Runs to completion or to the crash trigger.
  MetricsReport run(const CrashPlan& plan = {}) {
    start();
    bool crashed = false;
    while (!events_.empty() && processed_ < cfg_.max_events) {
      if (!crashed && plan.kind != CrashPlan::Kind::kNone &&
          ((plan.at_event && processed_ >= *plan.at_event) || (plan.at_tick && events_.front().at.ticks >= *plan.at_tick))) {
        crashed = true;
        if (!crash(plan)) break;
        continue;
      }
      std::pop_heap(events_.begin(), events_.end(), later);
      PendingEvent pe = std::move(events_.back());
      events_.pop_back();
      now_ = std::max(now_, pe.at);
      dispatch_event(pe.ev);
      if (finished() && !crashed_target_pending()) break;
      if (stalled_) break;
    }
    return report();
  }

  // Applies a crash now. Returns false when the run ends with it.
  bool crash(const CrashPlan& plan) {
    note_plain("crash", crash_name(plan.kind));
    switch (plan.kind) {
      case CrashPlan::Kind::kTarget:
        crash_target(plan.target);
        return true;
      case CrashPlan::Kind::kInitiator:
        crash_initiator();
        return false;
      case CrashPlan::Kind::kWholeCluster:
        crash_whole_cluster();
        return false;
      case CrashPlan::Kind::kAllTargets:
        if (cfg_.recovery_policy == RecoveryPolicy::kReplayIfBuffered) {
          for (TargetId t = 0; t < cfg_.targets; ++t) crash_target(t);
          return true;
        }
        for (auto& t : targets_) t.power_loss();
        initiator_up_ = false;
        events_.clear();
        recover_initiator_mode(true, plan.kind);
        return false;
      case CrashPlan::Kind::kNone:
        return true;
    }
    return true;
  }

  void crash_whole_cluster() {
    initiator_up_ = false;
    events_.clear();
    for (auto& t : targets_) t.power_loss();
    recover_initiator_mode(true, CrashPlan::Kind::kWholeCluster);
  }

  // Initiator loss: in-flight messages vanish, targets drain their devices,
  // then the restarted initiator runs recovery against live targets.
  void crash_initiator() {
    initiator_up_ = false;
    std::vector<PendingEvent> keep;
    for (auto& e : events_)
      if (std::holds_alternative<EvWriteDone>(e.ev) || std::holds_alternative<EvFlushEnd>(e.ev)) keep.push_back(e);
    events_ = std::move(keep);
    if (explore_) {
      while (!events_.empty()) fire(0);
    } else {
      std::make_heap(events_.begin(), events_.end(), later);
      while (!events_.empty()) {
        std::pop_heap(events_.begin(), events_.end(), later);
        PendingEvent pe = std::move(events_.back());
        events_.pop_back();
        now_ = std::max(now_, pe.at);
        dispatch_event(pe.ev);
      }
    }
    recover_initiator_mode(false, CrashPlan::Kind::kInitiator);
  }

  void crash_target(TargetId t) {
    targets_.at(t).power_loss();
    fabric_.set_crashed(t, true);
    for (StreamId s = 0; s < cfg_.threads; ++s) sequencer_.set_connection_lost(s, true);
    ++down_targets_;
    if (explore_)
      restart_target(t);
    else
      push(now_ + cfg_.target_downtime_ticks, EvRestart{t});
  }

  const std::optional<RecoveryOutcome>& recovery() const { return recovery_; }

  // ---- exploration interface (untimed) ----

  const std::vector<PendingEvent>& pending() const { return events_; }

  // Indices of events that may fire next: anything except a delivery that is
  // not at the head of its channel.
  std::vector<std::size_t> enabled() const {
    std::map<ChannelKey, std::uint64_t> head;
    for (const auto& e : events_)
      if (const auto* d = std::get_if<EvDeliver>(&e.ev)) {
        auto [it, fresh] = head.insert({d->ch, d->chan_seq});
        if (!fresh) it->second = std::min(it->second, d->chan_seq);
      }
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < events_.size(); ++i) {
      if (const auto* d = std::get_if<EvDeliver>(&events_[i].ev))
        if (head.at(d->ch) != d->chan_seq) continue;
      out.push_back(i);
    }
    return out;
  }

  void fire(std::size_t idx) {
    PendingEvent pe = std::move(events_.at(idx));
    events_.erase(events_.begin() + static_cast<std::ptrdiff_t>(idx));
    dispatch_event(pe.ev);
  }

  std::uint64_t state_hash() const {
    Hasher h;
    for (const auto& t : targets_) t.hash_into(h);
    for (StreamId s = 0; s < streams_.size(); ++s) {
      const auto& st = streams_[s];
      h.add(sequencer_.stream(s).released_through);
      h.add(st.durable_prefix);
      h.add(st.released_sent);
      h.add(st.completed_groups);
      for (const auto& [g, gs] : st.groups) {
        h.add(g);
        h.add(gs.pending);
        h.add(gs.undurable);
        h.add(gs.closed);
        h.add(gs.device_done);
      }
    }
    for (const auto& [id, u] : units_) {
      h.add(id);
      h.add(u.acked);
      h.add(u.durable);
    }
    std::map<ChannelKey, std::vector<std::pair<std::uint64_t, std::uint64_t>>> chans;
    std::vector<std::uint64_t> others;
    for (const auto& e : events_) {
      if (const auto* d = std::get_if<EvDeliver>(&e.ev)) {
        Hasher c;
        c.add(static_cast<std::uint64_t>(d->cmd.op));
        c.add(d->cmd.req.unit_id);
        c.add(d->cmd.cpl.unit_id);
        c.add(d->cmd.cpl.durable);
        c.add(d->cmd.cpl.certifies_through);
        c.add(d->cmd.release_through);
        chans[d->ch].push_back({d->chan_seq, c.value()});
      } else {
        Hasher c;
        c.add(e.ev.index());
        std::visit([&](const auto& v) { hash_event(c, v); }, e.ev);
        others.push_back(c.value());
      }
    }
    for (auto& [ch, v] : chans) {
      h.add(ch.queue);
      h.add(ch.target);
      h.add(static_cast<std::uint64_t>(ch.dir));
      std::sort(v.begin(), v.end());
      for (const auto& x : v) h.add(x.second);
    }
    std::sort(others.begin(), others.end());
    for (auto x : others) h.add(x);
    return h.value();
  }

  MetricsReport report() const {
    MetricsReport r;
    r.mode = mode_name(cfg_.mode);
    r.workload = workload_name(workload_.spec());
    r.threads = cfg_.threads;
    r.elapsed_ticks = last_app_completion_.ticks;
    r.completed_requests = completed_requests_;
    std::uint64_t groups = 0;
    for (const auto& st : streams_) groups += st.completed_groups;
    r.completed_groups = groups;
    const double secs = static_cast<double>(r.elapsed_ticks) / static_cast<double>(kTicksPerSecond);
    if (secs > 0) {
      r.throughput_ops = static_cast<double>(completed_requests_) / secs;
      r.throughput_groups = static_cast<double>(groups) / secs;
    }
    std::uint64_t tcpu = 0;
    for (auto x : target_cpu_) tcpu += x;
    r.initiator_cpu_ticks = initiator_cpu_;
    r.target_cpu_ticks = tcpu;
    const double budget = static_cast<double>(r.elapsed_ticks) * cfg_.cores();
    if (budget > 0) {
      r.initiator_cpu_util = static_cast<double>(initiator_cpu_) / budget;
      r.target_cpu_util = static_cast<double>(tcpu) / (static_cast<double>(r.elapsed_ticks) * cfg_.targets);
    }
    if (r.initiator_cpu_util > 0) r.cpu_efficiency = r.throughput_ops / r.initiator_cpu_util;
    if (r.target_cpu_util > 0) r.target_cpu_efficiency = r.throughput_ops / r.target_cpu_util;
    r.submit_commands = fabric_.sent(Op::kWriteSubmit) + fabric_.sent(Op::kReplay);
    r.flush_commands = fabric_.sent(Op::kFlush);
    r.control_commands = fabric_.sent(Op::kControl);
    r.commands = r.submit_commands + r.flush_commands + r.control_commands;
    for (const auto& t : targets_) r.pmr_appends += t.pmr().appends();
    r.pmr_ticks = pmr_ticks_;
    r.busy_retries = busy_retries_;
    r.stalled = stalled_;
    if (!latencies_.empty()) {
      std::vector<std::uint64_t> l = latencies_;
      std::sort(l.begin(), l.end());
      auto pct = [&](double p) {
        const std::size_t i = std::min(l.size() - 1, static_cast<std::size_t>(p * static_cast<double>(l.size())));
        return static_cast<double>(l[i]) / 10.0;
      };
      r.p50_latency_us = pct(0.50);
      r.p99_latency_us = pct(0.99);
    }
    r.finished = finished();
    r.recovery = recovery_;
    return r;
  }

  std::string report_json() const;

 private:
  struct GroupState {
    std::uint32_t requests = 0;
    std::uint32_t enqueued = 0;
    std::uint32_t pending = 0;
    std::uint32_t undurable = 0;
    bool ended = false;  // group_end request submitted
    bool closed = false;
    bool flush = false;
    bool device_done = false;
    SimTime issued;
  };
  struct StreamState {
    std::uint64_t issued_groups = 0;
    std::uint32_t outstanding = 0;
    std::uint64_t completed_groups = 0;
    std::map<Seq, GroupState> groups;
    std::set<Seq> open;  // not yet closed
    Seq app_done = 0;    // contiguous prefix delivered to the application
    Seq durable_prefix = 0;
    Seq released_sent = 0;
    Seq max_acked_flush = 0;
    std::map<TargetId, std::map<Seq, std::vector<std::uint64_t>>> undurable_by_target;
    std::uint64_t plug_window = 0;
    // sync mode
    std::deque<AppRequest> sync_pending;
    std::uint32_t sync_wait = 0;
    Seq sync_group = 0;
    std::set<TargetId> sync_targets;
    bool sync_flush = false;
    // horae mode
    std::deque<WriteRequest> control;
    bool control_inflight = false;
    std::vector<Seq> completion_log;
  };
  struct UnitState {
    WriteRequest req;
    std::uint16_t queue = 0;
    bool acked = false;
    bool durable = false;
    bool sync_flush = false;
  };

  static WorkloadSpec with_targets(WorkloadSpec w, std::uint32_t n) {
    w.num_targets = n;
    return w;
  }
  static SchedulerConfig make_sched_cfg(const SimConfig& c) {
    SchedulerConfig s;
    s.plug_depth = c.plug_depth;
    s.plug_timeout_ticks = c.plug_timeout_ticks;
    s.merge_enabled = c.merge;
    s.queue_affinity = c.queue_affinity;
    s.flush_members = c.flush_members && c.mode == Mode::kRio;
    s.num_queues = c.queues();
    return s;
  }
  static std::vector<std::uint16_t> stream_queues(const SimConfig& c) {
    std::vector<std::uint16_t> q;
    for (std::uint32_t i = 0; i < c.threads; ++i) q.push_back(static_cast<std::uint16_t>(i % c.queues()));
    return q;
  }
  static bool later(const PendingEvent& a, const PendingEvent& b) {
    return a.at != b.at ? a.at > b.at : a.id > b.id;
  }
  static const char* crash_name(CrashPlan::Kind k) {
    switch (k) {
      case CrashPlan::Kind::kTarget: return "target";
      case CrashPlan::Kind::kInitiator: return "initiator";
      case CrashPlan::Kind::kWholeCluster: return "whole-cluster";
      case CrashPlan::Kind::kAllTargets: return "targets";
      case CrashPlan::Kind::kNone: return "none";
    }
    return "?";
  }

  static void hash_event(Hasher& h, const EvIssue& e) { h.add(e.stream); }
  static void hash_event(Hasher& h, const EvPlug& e) { h.add(e.stream); }
  static void hash_event(Hasher&, const EvDeliver&) {}
  static void hash_event(Hasher& h, const EvWriteDone& e) {
    h.add(e.target);
    h.add(e.ssd);
    h.add(e.op);
  }
  static void hash_event(Hasher& h, const EvFlushEnd& e) {
    h.add(e.target);
    h.add(e.ssd);
  }
  static void hash_event(Hasher& h, const EvRetry& e) { h.add(e.unit_id); }
  static void hash_event(Hasher& h, const EvRestart& e) { h.add(e.target); }

  bool crashed_target_pending() const { return down_targets_ > 0; }

  void push(SimTime at, Event ev) {
    events_.push_back(PendingEvent{at, ++next_event_id_, std::move(ev)});
    if (!explore_) std::push_heap(events_.begin(), events_.end(), later);
  }

  void dispatch_event(const Event& ev) {
    ++processed_;
    std::visit([this](const auto& e) { on_event(e); }, ev);
  }

  // ---- application side ----

  void on_event(const EvIssue& e) { issue(e.stream); }

  void on_event(const EvPlug& e) {
    if (streams_[e.stream].plug_window == e.window) unplug(e.stream);
  }

  void issue(StreamId s) {
    if (!initiator_up_) return;
    StreamState& st = streams_[s];
    if (cfg_.mode == Mode::kSync) {
      if (st.outstanding == 0 && st.issued_groups < workload_.groups_per_thread()) sync_start_group(s);
      return;
    }
    const std::uint32_t depth = explore_ ? workload_.groups_per_thread() : cfg_.iodepth;
    bool any = false;
    while (st.outstanding < depth && st.issued_groups < workload_.groups_per_thread()) {
      auto reqs = workload_.next_group(s, st.issued_groups++);
      ++st.outstanding;
      any = true;
      Seq g = 0;
      for (const auto& a : reqs) {
        Submission sub = submit_app(s, a);
        g = sub.handle.seq;
        WriteRequest req = std::move(sub.request);
        if (cfg_.mode == Mode::kOrderless) {
          req.ordered = false;
          req.attr.flush = false;
        }
        if (cfg_.mode == Mode::kHorae) {
          req.ordered = false;
          st.control.push_back(std::move(req));
        } else {
          GroupState& gs = st.groups[g];
          ++gs.enqueued;
          auto res = scheduler_.enqueue(std::move(req));
          if (!cfg_.unplug_per_group) {
            if (res.depth_reached)
              unplug(s);
            else if (res.window_opened)
              push(now_ + cfg_.plug_timeout_ticks, EvPlug{s, ++st.plug_window});
          }
        }
      }
      (void)g;
      if (cfg_.mode != Mode::kHorae && cfg_.unplug_per_group) unplug(s);
    }
    if (any && cfg_.mode == Mode::kHorae) pump_control(s);
  }

  Submission submit_app(StreamId s, const AppRequest& a) {
    StreamState& st = streams_[s];
    Submission sub = sequencer_.submit(s, a.lba, a.len, a.flags);
    const Seq g = sub.handle.seq;
    initiator_cpu_ += cfg_.sw_request_ticks;
    if (cfg_.mode == Mode::kRio || cfg_.mode == Mode::kHorae) initiator_cpu_ += cfg_.attr_ticks;
    GroupState& gs = st.groups[g];
    if (gs.requests == 0) {
      gs.issued = now_;
      st.open.insert(g);
    }
    ++gs.requests;
    gs.flush = gs.flush || a.flags.flush;
    gs.ended = gs.ended || a.flags.group_end;
    auto& h = history_[s][g];
    for (std::uint32_t i = 0; i < a.len; ++i) h.push_back({a.lba + i, sub.request.payload[i]});
    note("submit", s, g, 0, -1);
    return sub;
  }

  void unplug(StreamId s) {
    StreamState& st = streams_[s];
    ++st.plug_window;
    auto ds = scheduler_.dispatch(s);
    for (auto& d : ds) send_unit(std::move(d));
    close_groups(s);
  }

  void close_groups(StreamId s) {
    StreamState& st = streams_[s];
    std::vector<Seq> closed;
    for (Seq g : st.open) {
      const GroupState& gs = st.groups.at(g);
      if (gs.ended && gs.enqueued == gs.requests) closed.push_back(g);
    }
    for (Seq g : closed) {
      st.open.erase(g);
      st.groups.at(g).closed = true;
    }
    for (Seq g : closed) check_group(s, g);
  }

  void send_unit(Dispatch d) {
    WriteRequest& req = d.req;
    const StreamId s = req.attr.stream_id;
    StreamState& st = streams_[s];
    const std::uint64_t id = req.unit_id;
    const bool durability = cfg_.mode == Mode::kRio;
    for (Seq g = req.attr.seq_start; g <= req.attr.seq_end; ++g) {
      GroupState& gs = st.groups.at(g);
      ++gs.pending;
      if (durability) ++gs.undurable;
    }
    if (durability) st.undurable_by_target[req.target_id][req.attr.seq_end].push_back(id);
    FabricCommand cmd;
    cmd.op = Op::kWriteSubmit;
    cmd.stream = s;
    if (req.ordered) cmd.record = encode_attr(req.attr);
    cmd.req = req;
    units_[id] = UnitState{std::move(req), d.queue_id, false, false, false};
    send_to_target(d.queue_id, units_[id].req.target_id, std::move(cmd));
  }

  void send_to_target(std::uint16_t queue, TargetId t, FabricCommand cmd) {
    if (!initiator_up_) return;
    const ChannelKey ch{queue, t, Direction::kToTarget};
    const CpuCost cost = fabric_.cpu_cost(cmd);
    initiator_cpu_ += cost.initiator;
    target_cpu_[t] += cost.target;
    note("send", cmd.stream, cmd.req.attr.seq_end, cmd.req.unit_id, t, op_name(cmd.op));
    auto at = fabric_.send(ch, cmd, now_);
    if (!at) return;
    push(*at, EvDeliver{ch, fabric_.next_channel_seq(ch), targets_[t].epoch(), std::move(cmd)});
  }

  void send_to_initiator(std::uint16_t queue, TargetId t, FabricCommand cmd) {
    const ChannelKey ch{queue, t, Direction::kToInitiator};
    auto at = fabric_.send(ch, cmd, now_);
    if (!at) return;
    push(*at, EvDeliver{ch, fabric_.next_channel_seq(ch), targets_[t].epoch(), std::move(cmd)});
  }

  void on_event(const EvDeliver& e) {
    const TargetId t = e.ch.target;
    if (e.conn_epoch != targets_[t].epoch()) return;  // connection reset by a crash
    if (e.ch.dir == Direction::kToTarget) {
      TargetOutput out;
      note("deliver", e.cmd.stream, e.cmd.req.attr.seq_end, e.cmd.req.unit_id, t, op_name(e.cmd.op));
      targets_[t].on_command(e.cmd, e.ch.queue, out);
      apply(t, out);
    } else {
      if (!initiator_up_) return;
      on_reply(t, e.cmd);
    }
  }

  void on_event(const EvWriteDone& e) {
    TargetNode& tn = targets_[e.target];
    if (!tn.up() || tn.ssds()[e.ssd].epoch() != e.epoch) return;
    TargetOutput out;
    tn.on_write_done(e.ssd, e.op, out);
    apply(e.target, out);
  }

  void on_event(const EvFlushEnd& e) {
    TargetNode& tn = targets_[e.target];
    if (!tn.up() || tn.ssds()[e.ssd].epoch() != e.epoch) return;
    TargetOutput out;
    tn.on_flush_end(e.ssd, out);
    apply(e.target, out);
  }

  void on_event(const EvRetry& e) {
    auto it = units_.find(e.unit_id);
    if (it == units_.end() || it->second.acked) return;
    FabricCommand cmd;
    cmd.op = Op::kWriteSubmit;
    cmd.stream = it->second.req.attr.stream_id;
    if (it->second.req.ordered) cmd.record = encode_attr(it->second.req.attr);
    cmd.req = it->second.req;
    send_to_target(it->second.queue, it->second.req.target_id, std::move(cmd));
  }

  void on_event(const EvRestart& e) { restart_target(e.target); }

  void apply(TargetId t, TargetOutput& out) {
    pmr_ticks_ += out.pmr_ticks;
    for (const auto& n : out.notes) {
      note(n.action.c_str(), n.stream, n.seq, n.unit_id, t);
      if (n.action == "ssd-dispatch" && cfg_.trace) dispatch_log_.push_back({n.unit_id, std::to_string(t)});
    }
    TargetNode& tn = targets_[t];
    for (const auto& sub : out.submits) {
      SsdModel& ssd = tn.ssds()[sub.ssd];
      SimTime at = now_;
      if (!explore_) {
        const std::uint64_t j = ssd.profile().write_jitter_ticks ? rng_() % (ssd.profile().write_jitter_ticks + 1) : 0;
        at = ssd.reserve(now_ + sub.delay, j);
      }
      push(at, EvWriteDone{t, sub.ssd, sub.op_id, ssd.epoch()});
    }
    for (auto s : out.cycles) push(now_ + tn.ssds()[s].profile().flush_ticks, EvFlushEnd{t, s, tn.ssds()[s].epoch()});
    for (auto& r : out.replies) {
      if (!initiator_up_) continue;
      send_to_initiator(r.queue, t, std::move(r.cmd));
    }
  }

  // ---- initiator completion path ----

  void on_reply(TargetId t, const FabricCommand& c) {
    switch (c.op) {
      case Op::kCompletion:
        on_completion(t, c);
        break;
      case Op::kBusy:
        ++busy_retries_;
        // Every held record waits on one that cannot get a PMR slot.
        if (++busy_streak_ > kStallRetries) stalled_ = true;
        push(now_ + cfg_.retry_ticks, EvRetry{c.cpl.unit_id});
        break;
      case Op::kControlReply:
        on_control_reply(c.stream);
        break;
      default:
        break;
    }
  }

  void on_completion(TargetId t, const FabricCommand& c) {
    auto it = units_.find(c.cpl.unit_id);
    if (it == units_.end()) return;
    UnitState& u = it->second;
    const StreamId s = u.req.attr.stream_id;
    StreamState& st = streams_[s];
    note("ack", s, u.req.attr.seq_end, c.cpl.unit_id, t);
    if (cfg_.mode == Mode::kSync) {
      if (!u.acked) {
        u.acked = true;
        units_.erase(it);
        if (st.sync_wait > 0 && --st.sync_wait == 0) sync_next(s);
      }
      return;
    }
    if (!u.acked) ack_unit(c.cpl.unit_id);
    if (cfg_.mode != Mode::kRio) {
      auto again = units_.find(c.cpl.unit_id);
      if (again != units_.end() && again->second.acked) units_.erase(again);
      return;
    }
    if (c.cpl.durable) mark_durable(c.cpl.unit_id);
    if (c.cpl.certifies_through) certify(t, s, c.cpl.certifies_through);
    advance_durable(s);
  }

  void ack_unit(std::uint64_t id) {
    UnitState& u = units_.at(id);
    u.acked = true;
    const StreamId s = u.req.attr.stream_id;
    StreamState& st = streams_[s];
    const Seq first = u.req.attr.seq_start, last = u.req.attr.seq_end;
    for (Seq g = first; g <= last; ++g) {
      auto git = st.groups.find(g);
      if (git != st.groups.end() && git->second.pending > 0) --git->second.pending;
    }
    for (Seq g = first; g <= last; ++g) check_group(s, g);
  }

  void check_group(StreamId s, Seq g) {
    StreamState& st = streams_[s];
    auto it = st.groups.find(g);
    if (it == st.groups.end()) return;
    GroupState& gs = it->second;
    if (!gs.closed || gs.pending > 0 || gs.device_done) return;
    gs.device_done = true;
    if (cfg_.mode == Mode::kOrderless) {
      app_complete(s, g);
      return;
    }
    for (Seq r : sequencer_.on_device_completion(s, g)) app_complete(s, r);
  }

  void app_complete(StreamId s, Seq g) {
    StreamState& st = streams_[s];
    GroupState& gs = st.groups.at(g);
    --st.outstanding;
    ++st.completed_groups;
    completed_requests_ += gs.requests;
    latencies_.push_back(now_.ticks - gs.issued.ticks);
    last_app_completion_ = now_;
    st.completion_log.push_back(g);
    busy_streak_ = 0;
    if (gs.flush) st.max_acked_flush = std::max(st.max_acked_flush, g);
    if (g == st.app_done + 1) st.app_done = g;
    note("app-complete", s, g, 0, -1);
    if (cfg_.mode != Mode::kRio) st.groups.erase(g);
    else advance_durable(s);
    if (st.issued_groups < workload_.groups_per_thread()) {
      if (explore_)
        issue(s);
      else
        push(now_, EvIssue{s});
    }
  }

  void mark_durable(std::uint64_t id) {
    auto it = units_.find(id);
    if (it == units_.end() || it->second.durable) return;
    it->second.durable = true;
    StreamState& st = streams_[it->second.req.attr.stream_id];
    for (Seq g = it->second.req.attr.seq_start; g <= it->second.req.attr.seq_end; ++g) {
      auto git = st.groups.find(g);
      if (git != st.groups.end() && git->second.undurable > 0) --git->second.undurable;
    }
  }

  // A persisted FLUSH on (t, s) covers every earlier unit of the stream there.
  void certify(TargetId t, StreamId s, Seq f) {
    auto& m = streams_[s].undurable_by_target[t];
    std::vector<std::uint64_t> ids;
    for (auto it = m.begin(); it != m.end() && it->first <= f;) {
      ids.insert(ids.end(), it->second.begin(), it->second.end());
      it = m.erase(it);
    }
    for (auto id : ids) mark_durable(id);
  }

  void advance_durable(StreamId s) {
    StreamState& st = streams_[s];
    while (true) {
      auto it = st.groups.find(st.durable_prefix + 1);
      if (it == st.groups.end() || !it->second.closed || it->second.undurable > 0 || it->second.pending > 0) break;
      ++st.durable_prefix;
    }
    const Seq through = std::min(st.durable_prefix, st.app_done);
    if (through <= st.released_sent) return;
    st.released_sent = through;
    for (TargetId t = 0; t < cfg_.targets; ++t) {
      FabricCommand rel;
      rel.op = Op::kRelease;
      rel.stream = s;
      rel.release_through = through;
      rel.cost = CostClass::kOneSided;
      send_to_target(sequencer_.stream(s).nic_queue_id, t, std::move(rel));
    }
    for (auto it = units_.begin(); it != units_.end();) {
      if (it->second.req.attr.stream_id == s && it->second.req.attr.seq_end <= through)
        it = units_.erase(it);
      else
        ++it;
    }
    st.groups.erase(st.groups.begin(), st.groups.upper_bound(through));
    for (auto& [t, m] : st.undurable_by_target) m.erase(m.begin(), m.upper_bound(through));
  }

  // ---- sync baseline: one request at a time, explicit FLUSH per group ----

  void sync_start_group(StreamId s) {
    StreamState& st = streams_[s];
    auto reqs = workload_.next_group(s, st.issued_groups++);
    ++st.outstanding;
    st.sync_pending.assign(reqs.begin(), reqs.end());
    st.sync_targets.clear();
    st.sync_flush = false;
    st.sync_group = 0;
    sync_next(s);
  }

  void sync_next(StreamId s) {
    StreamState& st = streams_[s];
    if (!st.sync_pending.empty()) {
      AppRequest a = st.sync_pending.front();
      st.sync_pending.pop_front();
      st.sync_flush = st.sync_flush || a.flags.flush;
      Submission sub = submit_app(s, a);
      st.sync_group = sub.handle.seq;
      st.groups[st.sync_group].enqueued++;
      WriteRequest req = std::move(sub.request);
      req.ordered = false;
      req.attr.flush = false;
      scheduler_.enqueue(std::move(req));
      auto ds = scheduler_.dispatch(s);
      st.sync_wait = static_cast<std::uint32_t>(ds.size());
      for (auto& d : ds) {
        st.sync_targets.insert(d.req.target_id);
        const std::uint64_t id = d.req.unit_id;
        FabricCommand cmd;
        cmd.op = Op::kWriteSubmit;
        cmd.stream = s;
        cmd.req = d.req;
        units_[id] = UnitState{std::move(d.req), d.queue_id, false, false, false};
        send_to_target(d.queue_id, units_[id].req.target_id, std::move(cmd));
      }
      return;
    }
    // Group fully written: FLUSH every volatile target it touched.
    if (st.sync_flush) {
      std::vector<TargetId> vol;
      for (TargetId t : st.sync_targets)
        if (layout_->any_volatile(t)) vol.push_back(t);
      st.sync_flush = false;
      if (!vol.empty()) {
        st.sync_wait = static_cast<std::uint32_t>(vol.size());
        for (TargetId t : vol) {
          const std::uint64_t id = (1ull << 62) + ++sync_flush_ids_;
          FabricCommand cmd;
          cmd.op = Op::kFlush;
          cmd.stream = s;
          cmd.req.attr.stream_id = s;
          cmd.req.attr.seq_start = cmd.req.attr.seq_end = st.sync_group;
          cmd.req.unit_id = id;
          cmd.req.target_id = t;
          const std::uint16_t q = sequencer_.stream(s).nic_queue_id;
          units_[id] = UnitState{cmd.req, q, false, false, true};
          send_to_target(q, t, std::move(cmd));
        }
        return;
      }
    }
    GroupState& gs = st.groups.at(st.sync_group);
    gs.closed = true;
    st.open.erase(st.sync_group);
    gs.device_done = true;
    for (Seq r : sequencer_.on_device_completion(s, st.sync_group)) app_complete(s, r);
  }

  // ---- horae baseline: synchronous control path per request ----

  void pump_control(StreamId s) {
    StreamState& st = streams_[s];
    if (st.control_inflight || st.control.empty()) return;
    st.control_inflight = true;
    const WriteRequest& r = st.control.front();
    FabricCommand cmd;
    cmd.op = Op::kControl;
    cmd.stream = s;
    OrderingAttribute a = r.attr;
    a.lba &= record::kMaxLba;
    cmd.record = encode_attr(a);
    cmd.req.attr = r.attr;
    send_to_target(sequencer_.stream(s).nic_queue_id, r.target_id, std::move(cmd));
  }

  void on_control_reply(StreamId s) {
    StreamState& st = streams_[s];
    if (!st.control_inflight || st.control.empty()) return;
    st.control_inflight = false;
    WriteRequest req = std::move(st.control.front());
    st.control.pop_front();
    const Seq g = req.attr.seq_end;
    const bool last = req.attr.group_end;
    ++st.groups.at(g).enqueued;
    auto res = scheduler_.enqueue(std::move(req));
    if (cfg_.unplug_per_group) {
      if (last) unplug(s);
    } else if (res.depth_reached) {
      unplug(s);
    } else if (res.window_opened) {
      push(now_ + cfg_.plug_timeout_ticks, EvPlug{s, ++st.plug_window});
    }
    pump_control(s);
  }

  // ---- recovery ----

  void recover_initiator_mode(bool restart_targets, CrashPlan::Kind kind) {
    RecoveryOutcome ro;
    ro.kind = kind;
    for (auto& t : targets_) ro.lists.push_back(restart_targets ? t.restart() : t.snapshot_list());
    ro.global = merge_lists(ro.lists, RecoveryMode::kInitiator);
    std::unique_ptr<IpuPolicy> policy;
    if (cfg_.ipu_policy == "erase-later-metadata")
      policy = std::make_unique<EraseLaterMetadataPolicy>();
    else
      policy = std::make_unique<ReportOnlyPolicy>();
    ro.plan = rollback(ro.global, ro.lists, policy.get());
    std::map<std::pair<TargetId, std::uint16_t>, std::uint64_t> erased;
    for (const auto& e : ro.plan.erase)
      for (std::uint32_t i = 0; i < e.len; ++i) {
        const Route r = layout_->route(e.lba + i);
        targets_[r.target].ssds()[r.ssd].erase(r.device_lba);
        ++erased[{r.target, r.ssd}];
        ++ro.erased_blocks;
      }
    RecoveryTimingParams p;
    p.fabric_base_ticks = cfg_.base_latency_ticks;
    p.write_ticks = cfg_.ssd.write_ticks;
    p.parallelism = cfg_.ssd.parallelism;
    ro.times = recovery_time_report(ro.lists, erased, 0, p);
    std::map<StreamId, Seq> prefix;
    for (StreamId s = 0; s < cfg_.threads; ++s) prefix[s] = ro.global.prefix(s);
    for (auto& t : targets_) t.finish_recovery(prefix);
    note_recovery(ro);
    recovery_ = std::move(ro);
  }

  void restart_target(TargetId t) {
    fabric_.set_crashed(t, false);
    ServerList list = targets_[t].restart();
    if (down_targets_ > 0) --down_targets_;
    if (down_targets_ == 0)
      for (StreamId s = 0; s < cfg_.threads; ++s) sequencer_.set_connection_lost(s, false);
    RecoveryOutcome ro;
    ro.kind = CrashPlan::Kind::kTarget;
    for (auto& other : targets_) ro.lists.push_back(other.id() == t ? list : other.snapshot_list());
    ro.global = merge_lists(ro.lists, RecoveryMode::kTargetFailure, {t});

    std::vector<std::uint64_t> ids;
    for (const auto& [id, u] : units_)
      if (u.req.target_id == t) ids.push_back(id);
    std::uint64_t replay_ticks = 0;
    for (auto id : ids) {
      auto uit = units_.find(id);
      if (uit == units_.end()) continue;  // released by an earlier local ack
      UnitState& u = uit->second;
      if (cfg_.mode == Mode::kRio) {
        if (unit_valid_on(u.req, list)) {
          // Certified there; its completion may have died with the target.
          mark_durable(id);
          if (!u.acked) ack_unit(id);
          continue;
        }
      } else if (u.acked) {
        continue;
      }
      for (std::uint32_t c = 0; c < cfg_.replay_copies; ++c) {
        FabricCommand cmd;
        cmd.op = Op::kReplay;
        cmd.stream = u.req.attr.stream_id;
        if (u.req.ordered) cmd.record = encode_attr(u.req.attr);
        cmd.req = u.req;
        send_to_target(u.queue, t, std::move(cmd));
        ++ro.replayed_units;
      }
      replay_ticks += cfg_.ssd.write_ticks;
    }
    for (StreamId s = 0; s < cfg_.threads; ++s)
      if (cfg_.mode == Mode::kRio) advance_durable(s);
    RecoveryTimingParams p;
    p.fabric_base_ticks = cfg_.base_latency_ticks;
    ro.times = recovery_time_report(ro.lists, {}, replay_ticks / std::max<std::uint32_t>(cfg_.ssd.parallelism, 1), p);
    note_recovery(ro);
    recovery_ = std::move(ro);
  }

  // ---- trace ----

  void trace_header();

  void note(const char* ev, StreamId s, Seq seq, std::uint64_t unit, int target, std::string_view op = {}) {
    if (!cfg_.trace) return;
    char buf[256];
    int n = std::snprintf(buf, sizeof buf, "{\"t\":%llu,\"ev\":\"%s\",\"stream\":%u,\"seq\":%llu",
                          static_cast<unsigned long long>(now_.ticks), ev, static_cast<unsigned>(s),
                          static_cast<unsigned long long>(seq));
    trace_.append(buf, static_cast<std::size_t>(n));
    if (unit) {
      n = std::snprintf(buf, sizeof buf, ",\"unit\":%llu", static_cast<unsigned long long>(unit));
      trace_.append(buf, static_cast<std::size_t>(n));
    }
    if (target >= 0) {
      n = std::snprintf(buf, sizeof buf, ",\"target\":%d", target);
      trace_.append(buf, static_cast<std::size_t>(n));
    }
    if (!op.empty()) {
      trace_ += ",\"op\":\"";
      trace_ += op;
      trace_ += '"';
    }
    trace_ += "}\n";
  }

  void note_plain(const char* ev, const char* what) {
    if (!cfg_.trace) return;
    char buf[160];
    const int n = std::snprintf(buf, sizeof buf, "{\"t\":%llu,\"ev\":\"%s\",\"kind\":\"%s\"}\n",
                                static_cast<unsigned long long>(now_.ticks), ev, what);
    trace_.append(buf, static_cast<std::size_t>(n));
  }

  void note_recovery(const RecoveryOutcome& ro);

  SimConfig cfg_;
  bool explore_ = false;
  std::shared_ptr<const VolumeLayout> layout_;
  Workload workload_;
  Sequencer sequencer_;
  Scheduler scheduler_;
  Fabric fabric_;
  std::vector<TargetNode> targets_;
  std::mt19937_64 rng_;

  std::vector<PendingEvent> events_;
  std::uint64_t next_event_id_ = 0;
  std::uint64_t processed_ = 0;
  SimTime now_;
  bool started_ = false;
  bool initiator_up_ = true;
  std::uint32_t down_targets_ = 0;

  std::vector<StreamState> streams_;
  std::map<std::uint64_t, UnitState> units_;
  std::vector<std::map<Seq, std::vector<BlockWrite>>> history_;
  std::uint64_t sync_flush_ids_ = 0;

  std::uint64_t initiator_cpu_ = 0;
  std::vector<std::uint64_t> target_cpu_;
  std::uint64_t pmr_ticks_ = 0;
  std::uint64_t busy_retries_ = 0;
  std::uint64_t busy_streak_ = 0;
  bool stalled_ = false;
  static constexpr std::uint64_t kStallRetries = 100'000;
  std::uint64_t completed_requests_ = 0;
  SimTime last_app_completion_;
  std::vector<std::uint64_t> latencies_;
  std::vector<std::pair<std::uint64_t, std::string>> dispatch_log_;
  std::optional<RecoveryOutcome> recovery_;
  std::string trace_;
};

inline nlohmann::json to_json(const RecoveryOutcome& ro) {
  nlohmann::json j;
  j["order_rebuild_ticks"] = ro.times.order_rebuild_ticks;
  j["data_recovery_ticks"] = ro.times.data_recovery_ticks;
  j["replayed_units"] = ro.replayed_units;
  j["erased_blocks"] = ro.erased_blocks;
  j["ipu_records"] = ro.plan.ipu.size();
  j["corrupt"] = ro.global.corrupt;
  j["errors"] = ro.global.errors;
  nlohmann::json streams = nlohmann::json::array();
  for (const auto& [s, so] : ro.global.streams) {
    streams.push_back({{"stream", s},
                       {"base", so.base},
                       {"prefix", so.prefix},
                       {"drop", std::vector<Seq>(so.drop.begin(), so.drop.end())},
                       {"replay", std::vector<Seq>(so.replay.begin(), so.replay.end())}});
  }
  j["streams"] = std::move(streams);
  nlohmann::json lists = nlohmann::json::array();
  for (const auto& sl : ro.lists) {
    nlohmann::json per;
    for (const auto& [s, recs] : sl.valid) {
      std::vector<Seq> keys;
      for (const auto& r : recs)
        if (keys.empty() || keys.back() != r.attr.seq_end) keys.push_back(r.attr.seq_end);
      per[std::to_string(s)] = keys;
    }
    lists.push_back({{"target", sl.target}, {"scanned", sl.scanned}, {"corrupt", sl.corrupt}, {"valid", per}});
  }
  j["lists"] = std::move(lists);
  return j;
}

inline nlohmann::json to_json(const MetricsReport& r) {
  nlohmann::json j;
  j["type"] = "report";
  j["mode"] = r.mode;
  j["workload"] = r.workload;
  j["threads"] = r.threads;
  j["finished"] = r.finished;
  j["elapsed_ticks"] = r.elapsed_ticks;
  j["completed_requests"] = r.completed_requests;
  j["completed_groups"] = r.completed_groups;
  j["throughput_ops"] = r.throughput_ops;
  j["throughput_groups"] = r.throughput_groups;
  j["initiator_cpu_util"] = r.initiator_cpu_util;
  j["target_cpu_util"] = r.target_cpu_util;
  j["cpu_efficiency"] = r.cpu_efficiency;
  j["target_cpu_efficiency"] = r.target_cpu_efficiency;
  j["initiator_cpu_ticks"] = r.initiator_cpu_ticks;
  j["target_cpu_ticks"] = r.target_cpu_ticks;
  j["commands"] = r.commands;
  j["submit_commands"] = r.submit_commands;
  j["flush_commands"] = r.flush_commands;
  j["control_commands"] = r.control_commands;
  j["pmr_appends"] = r.pmr_appends;
  j["pmr_ticks"] = r.pmr_ticks;
  j["busy_retries"] = r.busy_retries;
  j["stalled"] = r.stalled;
  j["p50_latency_us"] = r.p50_latency_us;
  j["p99_latency_us"] = r.p99_latency_us;
  if (r.recovery) j["recovery"] = to_json(*r.recovery);
  return j;
}

inline nlohmann::json config_json(const SimConfig& c) {
  return {{"mode", mode_name(c.mode)},
          {"workload", workload_name(c.workload)},
          {"groups_per_thread", c.workload.groups_per_thread},
          {"threads", c.threads},
          {"targets", c.targets},
          {"ssds_per_target", c.ssds_per_target},
          {"ssd_profile", c.ssd_profile},
          {"write_ticks", c.ssd.write_ticks},
          {"flush_ticks", c.ssd.flush_ticks},
          {"plp", c.ssd.plp},
          {"ssd_parallelism", c.ssd.parallelism},
          {"max_transfer_blocks", c.ssd.max_transfer_blocks},
          {"stripe_unit_blocks", c.stripe_unit_blocks},
          {"iodepth", c.iodepth},
          {"num_queues", c.queues()},
          {"base_latency_ticks", c.base_latency_ticks},
          {"jitter_ticks", c.jitter_ticks},
          {"merge", c.merge},
          {"queue_affinity", c.queue_affinity},
          {"unplug_per_group", c.unplug_per_group},
          {"pmr_capacity", c.pmr_capacity},
          {"recovery_policy", c.recovery_policy == RecoveryPolicy::kDrop ? "drop" : "replay_if_buffered"},
          {"gate", c.gate}};
}

inline void Simulation::trace_header() {
  nlohmann::json h;
  h["type"] = "header";
  h["seed"] = cfg_.seed;
  h["config"] = config_json(cfg_);
  h["queue_pairing"] = "completions return on the queue paired 1:1 with the send queue";
  trace_ += h.dump();
  trace_ += '\n';
}

inline void Simulation::note_recovery(const RecoveryOutcome& ro) {
  if (!cfg_.trace) return;
  nlohmann::json j = to_json(ro);
  j["t"] = now_.ticks;
  j["ev"] = "recovery";
  trace_ += j.dump();
  trace_ += '\n';
}

inline std::string Simulation::report_json() const { return to_json(report()).dump(); }

}  // namespace riosim
