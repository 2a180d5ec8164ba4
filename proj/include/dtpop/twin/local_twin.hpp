#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "dtpop/sim/clock.hpp"
#include "dtpop/sim/fifo_server.hpp"
#include "dtpop/twin/policy.hpp"
#include "dtpop/world/mobility.hpp"

namespace dtpop::twin {

using sim::Duration;
using sim::SimTime;
using world::Vec2;

using DeviceId = std::uint32_t;

struct RawSample {
  SimTime t;
  Vec2 position;
  double speed = 0.0;
  double energy = 0.0;
  double channel_quality = 0.0;
};

// 1 - d / radius to the serving RSU, clamped to [0, 1]; 0 when unserved.
inline double channel_quality(const world::RoadNetwork& net, Vec2 position,
                              std::optional<world::RsuId> serving) {
  if (!serving) return 0.0;
  const double d = world::distance(position, net.rsu_position(*serving));
  return std::clamp(1.0 - d / net.rsus[*serving].radius_m, 0.0, 1.0);
}

inline RawSample sense(const world::VehicleState& v, SimTime now, const world::RoadNetwork& net,
                       std::optional<world::RsuId> serving) {
  return {now, v.position, v.speed, v.energy, channel_quality(net, v.position, serving)};
}

constexpr double ewma_step(double prev, double x, double alpha) { return alpha * x + (1.0 - alpha) * prev; }

struct FeatureRecord {
  SimTime t_start;
  SimTime t_end;
  double mean_speed = 0.0;
  double ewma_speed = 0.0;
  Vec2 position_last;
  double energy_last = 0.0;
  double channel_quality_last = 0.0;
};

/**
 * Collapses one reporting window of samples into a single record: mean
 * speed, EWMA-smoothed speed seeded with the first sample, and the last
 * known position, energy and channel quality. The window runs from
 * `window_start` to the last sample.
 */
inline FeatureRecord preprocess(std::span<const RawSample> samples, double alpha, SimTime window_start) {
  if (samples.empty()) throw std::invalid_argument("preprocess: empty window");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("preprocess: alpha must be in (0, 1]");
  double sum = 0.0;
  double ewma = samples.front().speed;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    sum += samples[i].speed;
    if (i > 0) ewma = ewma_step(ewma, samples[i].speed, alpha);
  }
  const RawSample& last = samples.back();
  return {std::min(window_start, samples.front().t),
          last.t,
          sum / static_cast<double>(samples.size()),
          ewma,
          last.position,
          last.energy,
          last.channel_quality};
}

inline FeatureRecord preprocess(std::span<const RawSample> samples, double alpha) {
  if (samples.empty()) throw std::invalid_argument("preprocess: empty window");
  return preprocess(samples, alpha, samples.front().t);
}

struct Task {
  std::uint64_t id = 0;
  DeviceId origin = 0;
  double cost_cu = 1.0;
  std::uint32_t request_bytes = 2000;
  std::uint32_t response_bytes = 1000;
  SimTime created_at;
};

enum class Placement : std::uint8_t { Local, Edge };

// Local iff the task is cheap enough for the policy and the local queue is short.
inline Placement decide_local(const Task& task, const LocalPolicy& policy, double backlog_cu,
                              double local_capacity_cu_per_s, double max_backlog_s = 2.0) {
  const bool cheap = task.cost_cu <= policy.local_serve_threshold();
  const bool short_queue = backlog_cu / local_capacity_cu_per_s <= max_backlog_s;
  return cheap && short_queue ? Placement::Local : Placement::Edge;
}

struct StatusReport {
  DeviceId device_id = 0;
  FeatureRecord features;
  world::IntersectionId nav_intent = 0;
  double backlog_cu = 0.0;
  Role role = Role::Acquisition;
};

// Canonical wire form; field order is fixed.
inline nlohmann::ordered_json to_json(const StatusReport& r) {
  nlohmann::ordered_json j;
  j["device_id"] = r.device_id;
  j["window"] = {sim::to_us(r.features.t_start), sim::to_us(r.features.t_end)};
  j["mean_speed"] = r.features.mean_speed;
  j["ewma_speed"] = r.features.ewma_speed;
  j["position"] = {r.features.position_last.x, r.features.position_last.y};
  j["energy"] = r.features.energy_last;
  j["channel_quality"] = r.features.channel_quality_last;
  j["nav_intent"] = r.nav_intent;
  j["backlog"] = r.backlog_cu;
  j["role"] = std::string(to_string(r.role));
  return j;
}

enum class ReportTrigger : std::uint8_t { None = 0, Periodic = 1, Handover = 2, Backlog = 4 };

constexpr ReportTrigger operator|(ReportTrigger a, ReportTrigger b) {
  return static_cast<ReportTrigger>(static_cast<std::uint8_t>(a) | static_cast<std::uint8_t>(b));
}
constexpr bool has(ReportTrigger set, ReportTrigger bit) {
  return (static_cast<std::uint8_t>(set) & static_cast<std::uint8_t>(bit)) != 0;
}

/**
 * Report cadence: one report per period, plus an immediate report on RSU
 * handover or when the local backlog rises above the threshold (edge
 * triggered; it re-arms once the backlog falls back).
 */
class ReportScheduler {
 public:
  ReportScheduler(Duration period, double backlog_threshold_s)
      : period_(period), next_periodic_(SimTime{} + period), backlog_threshold_s_(backlog_threshold_s) {}

  ReportTrigger poll(SimTime now, bool handover, double backlog_s) {
    ReportTrigger due = ReportTrigger::None;
    if (now >= next_periodic_) {
      due = due | ReportTrigger::Periodic;
      while (next_periodic_ <= now) next_periodic_ += period_;
    }
    if (handover) due = due | ReportTrigger::Handover;
    const bool high = backlog_s > backlog_threshold_s_;
    if (high && !backlog_high_) due = due | ReportTrigger::Backlog;
    backlog_high_ = high;
    if (has(due, ReportTrigger::Periodic)) ++periodic_;
    if (has(due, ReportTrigger::Handover)) ++handover_;
    if (has(due, ReportTrigger::Backlog)) ++backlog_;
    return due;
  }

  SimTime next_periodic() const { return next_periodic_; }
  std::uint64_t periodic_count() const { return periodic_; }
  std::uint64_t handover_triggers() const { return handover_; }
  std::uint64_t backlog_triggers() const { return backlog_; }

 private:
  Duration period_;
  SimTime next_periodic_;
  double backlog_threshold_s_;
  bool backlog_high_ = false;
  std::uint64_t periodic_ = 0;
  std::uint64_t handover_ = 0;
  std::uint64_t backlog_ = 0;
};

struct Beacon {
  DeviceId sender = 0;
  Vec2 position;
  double speed = 0.0;
  Role role = Role::Acquisition;
  double backlog_s = 0.0;
  SimTime sent_at;
};

inline bool in_v2v_range(Vec2 a, Vec2 b, double range_m) { return world::distance(a, b) <= range_m; }

struct NeighborEntry {
  DeviceId id = 0;
  Vec2 position;
  double speed = 0.0;
  Role role = Role::Acquisition;
  double backlog_s = 0.0;
  SimTime heard_at;
};

// Neighbour cache filled from V2V beacons, ordered by id; entries older than `expiry` are evicted.
class NeighborTable {
 public:
  explicit NeighborTable(Duration expiry = std::chrono::seconds(3)) : expiry_(expiry) {}

  void observe(const Beacon& b, SimTime received_at) {
    NeighborEntry e{b.sender, b.position, b.speed, b.role, b.backlog_s, received_at};
    auto it = std::lower_bound(entries_.begin(), entries_.end(), b.sender,
                               [](const NeighborEntry& x, DeviceId id) { return x.id < id; });
    if (it != entries_.end() && it->id == b.sender) {
      *it = e;
    } else {
      entries_.insert(it, e);
    }
  }

  void evict(SimTime now) {
    std::erase_if(entries_, [&](const NeighborEntry& e) { return now - e.heard_at > expiry_; });
  }

  std::size_t size() const { return entries_.size(); }
  bool contains(DeviceId id) const {
    return std::any_of(entries_.begin(), entries_.end(), [id](const NeighborEntry& e) { return e.id == id; });
  }
  std::span<const NeighborEntry> entries() const { return entries_; }

  // Processing-role neighbour with the smallest backlog that is at least
  // `margin_s` below ours; lowest id on ties.
  std::optional<DeviceId> handoff_target(double own_backlog_s, SimTime now, double margin_s = 1.0) const {
    std::optional<DeviceId> best;
    double best_backlog = 0.0;
    for (const auto& e : entries_) {
      if (now - e.heard_at > expiry_) continue;
      if (e.role != Role::Processing) continue;
      if (!(e.backlog_s < own_backlog_s - margin_s)) continue;
      if (!best || e.backlog_s < best_backlog) {
        best = e.id;
        best_backlog = e.backlog_s;
      }
    }
    return best;
  }

 private:
  Duration expiry_;
  std::vector<NeighborEntry> entries_;
};

// Handoff acceptance rule evaluated by the receiving neighbour.
inline bool accepts_handoff(Role role, double own_backlog_s, double sender_backlog_s, double margin_s = 1.0) {
  return role == Role::Processing && own_backlog_s < sender_backlog_s - margin_s;
}

/**
 * Per-vehicle twin state: sample buffer, compute queue, current policy and
 * role, neighbour cache and report cadence. Kinematics live in the world.
 */
class LocalTwin {
 public:
  LocalTwin(DeviceId id, double local_capacity_cu_per_s, Duration report_period, double backlog_trigger_s,
            Duration neighbor_expiry)
      : id_(id),
        compute_(local_capacity_cu_per_s),
        reports_(report_period, backlog_trigger_s),
        neighbors_(neighbor_expiry) {}

  DeviceId id() const { return id_; }

  void record(const RawSample& s) { samples_.push_back(s); }
  const std::vector<RawSample>& pending_samples() const { return samples_; }

  // Builds a report from the samples since the previous one and clears the buffer.
  std::optional<StatusReport> make_report(SimTime now, double alpha, world::IntersectionId nav_intent) {
    if (samples_.empty()) return std::nullopt;
    StatusReport r;
    r.device_id = id_;
    r.features = preprocess(samples_, alpha, last_report_);
    r.nav_intent = nav_intent;
    r.backlog_cu = compute_.backlog_cu(now);
    r.role = role_;
    samples_.clear();
    last_report_ = now;
    return r;
  }

  sim::FifoServer& compute() { return compute_; }
  const sim::FifoServer& compute() const { return compute_; }
  ReportScheduler& reports() { return reports_; }
  const ReportScheduler& reports() const { return reports_; }
  NeighborTable& neighbors() { return neighbors_; }

  const std::optional<LocalPolicy>& policy() const { return policy_; }
  void set_policy(LocalPolicy p) { policy_ = std::move(p); }

  Role role() const { return role_; }
  void set_role(Role r) { role_ = r; }

  std::optional<world::RsuId> serving() const { return serving_; }
  void set_serving(std::optional<world::RsuId> r) { serving_ = r; }

 private:
  DeviceId id_;
  sim::FifoServer compute_;
  ReportScheduler reports_;
  NeighborTable neighbors_;
  std::vector<RawSample> samples_;
  SimTime last_report_{};
  std::optional<LocalPolicy> policy_;
  Role role_ = Role::Acquisition;
  std::optional<world::RsuId> serving_;
};

}  // namespace dtpop::twin
