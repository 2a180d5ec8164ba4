#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "dtpop/sim/clock.hpp"
#include "dtpop/sim/rng.hpp"
#include "dtpop/stats.hpp"
#include "dtpop/twin/blueprint.hpp"
#include "dtpop/twin/edge_twin.hpp"
#include "dtpop/twin/policy.hpp"

namespace dtpop::twin {

// ---------------------------------------------------------------------------
// Knowledge graph

struct RegionNode {
  std::deque<UplinkPackage> history;  // ring buffer, oldest first
  LabelSet labels{EventLabel::Normal};
  double utilization = 0.0;
  bool seen = false;
};

/**
 * Cross-regional state graph: one node per RSU region holding a bounded
 * history of uplink summaries, and RSU adjacency annotated with the active
 * offload pairing of each region.
 */
class KnowledgeGraph {
 public:
  KnowledgeGraph(std::vector<std::vector<world::RsuId>> adjacency, std::size_t ring_capacity = 100)
      : adjacency_(std::move(adjacency)), nodes_(adjacency_.size()), pairing_(adjacency_.size()),
        capacity_(ring_capacity) {}

  std::size_t regions() const { return nodes_.size(); }
  std::size_t ring_capacity() const { return capacity_; }
  const RegionNode& node(world::RsuId r) const { return nodes_.at(r); }
  const std::vector<std::vector<world::RsuId>>& adjacency() const { return adjacency_; }

  // Appends a schema-valid package; unknown regions are rejected and counted.
  bool ingest(const UplinkPackage& p) {
    if (p.rsu_id >= nodes_.size()) {
      ++rejected_;
      return false;
    }
    auto& n = nodes_[p.rsu_id];
    n.history.push_back(p);
    while (n.history.size() > capacity_) n.history.pop_front();
    n.labels = p.labels;
    n.utilization = p.utilization;
    n.seen = true;
    return true;
  }

  bool ingest(const std::string& wire) {
    auto p = parse_uplink(wire);
    if (!p) {
      ++rejected_;
      return false;
    }
    return ingest(*p);
  }

  std::uint64_t rejected() const { return rejected_; }

  std::optional<world::RsuId> pairing(world::RsuId r) const { return pairing_.at(r); }
  void pair(world::RsuId a, world::RsuId b) {
    pairing_.at(a) = b;
    pairing_.at(b) = a;
  }
  void unpair(world::RsuId a) {
    if (auto b = pairing_.at(a)) pairing_.at(*b).reset();
    pairing_.at(a).reset();
  }

 private:
  std::vector<std::vector<world::RsuId>> adjacency_;
  std::vector<RegionNode> nodes_;
  std::vector<std::optional<world::RsuId>> pairing_;
  std::size_t capacity_;
  std::uint64_t rejected_ = 0;
};

inline double trend(std::span<const double> series) { return ols_slope(series); }

// ---------------------------------------------------------------------------
// Multi-population coordination

struct RegionView {
  LabelSet labels;
  double utilization = 0.0;
  bool busy = false;     // already in an active pairing
  double fraction = 0.0; // offload fraction of the region's current blueprint
};

/**
 * Pairs each Overload region (ascending id) with its lowest-utilisation
 * adjacent Underload region, ties by id. A region joins at most one pairing.
 */
inline std::vector<OffloadDirective> coordinate(std::span<const RegionView> regions,
                                                const std::vector<std::vector<world::RsuId>>& adjacency,
                                                SimTime now, SimTime expires_at) {
  std::vector<OffloadDirective> out;
  std::vector<bool> taken(regions.size());
  for (std::size_t i = 0; i < regions.size(); ++i) taken[i] = regions[i].busy;
  for (world::RsuId a = 0; a < regions.size(); ++a) {
    if (taken[a] || !regions[a].labels.contains(EventLabel::Overload)) continue;
    std::optional<world::RsuId> best;
    for (world::RsuId b : adjacency[a]) {
      if (b == a || taken[b] || !regions[b].labels.contains(EventLabel::Underload)) continue;
      if (!best || regions[b].utilization < regions[*best].utilization ||
          (regions[b].utilization == regions[*best].utilization && b < *best)) {
        best = b;
      }
    }
    if (!best) continue;
    taken[a] = true;
    taken[*best] = true;
    out.push_back({a, *best, regions[a].fraction, now, expires_at});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Strategy generation: (1+1)-ES, one coordinate per epoch

enum class MutatedParam : std::uint8_t { LocalThreshold = 0, OffloadFraction = 1, CongestionSpeed = 2, RoleQuotas = 3 };

// Parameter perturbed when producing the blueprint of `child_epoch` (>= 1).
constexpr MutatedParam param_for_epoch(std::int64_t child_epoch) {
  return static_cast<MutatedParam>(((child_epoch - 1) % 4 + 4) % 4);
}

/**
 * Child of `parent`: the round-robin coordinate is perturbed by a Gaussian
 * with sigma = sigma_frac * range width and clamped to its range. Quotas are
 * perturbed jointly and renormalised.
 */
inline PolicyBlueprint generate_blueprint(const PolicyBlueprint& parent, sim::RngStream& rng,
                                          double sigma_frac = 0.1) {
  PolicyBlueprint child = parent;
  child.epoch = parent.epoch + 1;
  child.parent = parent.id();
  auto& p = child.params;
  switch (param_for_epoch(child.epoch)) {
    case MutatedParam::LocalThreshold:
      p.local_serve_threshold = kLocalThresholdRange.clamp(
          p.local_serve_threshold + rng.normal(0.0, sigma_frac * kLocalThresholdRange.width()));
      break;
    case MutatedParam::OffloadFraction:
      p.offload_fraction =
          kOffloadFractionRange.clamp(p.offload_fraction + rng.normal(0.0, sigma_frac * kOffloadFractionRange.width()));
      break;
    case MutatedParam::CongestionSpeed:
      p.congestion_speed_threshold = kCongestionSpeedRange.clamp(
          p.congestion_speed_threshold + rng.normal(0.0, sigma_frac * kCongestionSpeedRange.width()));
      break;
    case MutatedParam::RoleQuotas: {
      RoleQuotas q = p.role_quotas;
      for (double& v : q) v = kQuotaRange.clamp(v + rng.normal(0.0, sigma_frac * kQuotaRange.width()));
      if (auto n = normalized_quotas(q)) p.role_quotas = *n;
      break;
    }
  }
  return child;
}

// Applies a single drawn perturbation to the round-robin coordinate (used to
// check clamping independently of the RNG).
inline PolicyBlueprint mutate_with(const PolicyBlueprint& parent, double delta) {
  PolicyBlueprint child = parent;
  child.epoch = parent.epoch + 1;
  child.parent = parent.id();
  auto& p = child.params;
  switch (param_for_epoch(child.epoch)) {
    case MutatedParam::LocalThreshold: p.local_serve_threshold = kLocalThresholdRange.clamp(p.local_serve_threshold + delta); break;
    case MutatedParam::OffloadFraction: p.offload_fraction = kOffloadFractionRange.clamp(p.offload_fraction + delta); break;
    case MutatedParam::CongestionSpeed:
      p.congestion_speed_threshold = kCongestionSpeedRange.clamp(p.congestion_speed_threshold + delta);
      break;
    case MutatedParam::RoleQuotas: {
      RoleQuotas q = p.role_quotas;
      q[0] = kQuotaRange.clamp(q[0] + delta);
      if (auto n = normalized_quotas(q)) p.role_quotas = *n;
      break;
    }
  }
  return child;
}

// ---------------------------------------------------------------------------
// Evolutionary governance

enum class EpochDecision : std::uint8_t { Keep, Rollback };

constexpr std::string_view to_string(EpochDecision d) { return d == EpochDecision::Keep ? "keep" : "rollback"; }

// Rollback iff the candidate's median is worse than the kept median by more than the ratio.
constexpr EpochDecision evaluate_epoch(double kept_median, double candidate_median, double ratio = 1.05) {
  return candidate_median > ratio * kept_median ? EpochDecision::Rollback : EpochDecision::Keep;
}

struct EpochRecord {
  std::int64_t epoch = 0;
  world::RsuId region = 0;
  PolicyBlueprint blueprint;  // the candidate evaluated
  double median_rt_us = -1.0;
  double autonomy = 0.0;
  EpochDecision decision = EpochDecision::Keep;
  PolicyParams active_after;  // parameters in force after the decision
  SimTime decided_at;
};

inline nlohmann::ordered_json to_json(const EpochRecord& r) {
  nlohmann::ordered_json j;
  j["epoch"] = r.epoch;
  j["region"] = r.region;
  j["blueprint"] = r.blueprint.id();
  j["parent"] = r.blueprint.parent ? nlohmann::ordered_json(*r.blueprint.parent) : nlohmann::ordered_json(nullptr);
  j["params"] = params_to_json(r.blueprint.params);
  j["median_rt_us"] = r.median_rt_us;
  j["autonomy"] = r.autonomy;
  j["decision"] = std::string(to_string(r.decision));
  j["active_params"] = params_to_json(r.active_after);
  j["decided_us"] = sim::to_us(r.decided_at);
  return j;
}

/**
 * Per-region governor. The candidate blueprint is the one currently deployed;
 * `kept` is the last blueprint that survived evaluation and the parent of the
 * next candidate.
 */
class RegionGovernor {
 public:
  RegionGovernor(world::RsuId region, PolicyParams initial) : region_(region) {
    candidate_.target = static_cast<std::uint32_t>(region);
    candidate_.params = initial;
    candidate_.epoch = 0;
  }

  const PolicyBlueprint& candidate() const { return candidate_; }
  const std::optional<PolicyBlueprint>& kept() const { return kept_; }
  std::optional<double> kept_median() const { return kept_median_; }

  /**
   * Closes the candidate's epoch. `observed_medians` are the window medians
   * reported while the candidate was in force. A candidate with no
   * observations is kept only if it has no parent to fall back to.
   */
  EpochRecord close_epoch(std::span<const double> observed_medians, double autonomy, double ratio, SimTime now) {
    EpochRecord rec;
    rec.epoch = candidate_.epoch;
    rec.region = region_;
    rec.blueprint = candidate_;
    rec.autonomy = autonomy;
    rec.decided_at = now;
    std::optional<double> m;
    if (!observed_medians.empty()) m = median(std::vector<double>(observed_medians.begin(), observed_medians.end()));
    rec.median_rt_us = m.value_or(-1.0);
    if (!kept_) {
      rec.decision = EpochDecision::Keep;
    } else if (!m || !kept_median_) {
      rec.decision = m ? EpochDecision::Keep : EpochDecision::Rollback;
    } else {
      rec.decision = evaluate_epoch(*kept_median_, *m, ratio);
    }
    if (rec.decision == EpochDecision::Keep) {
      kept_ = candidate_;
      if (m) kept_median_ = m;
    }
    rec.active_after = kept_->params;
    return rec;
  }

  // Next candidate derived from the kept blueprint, numbered after the last epoch.
  const PolicyBlueprint& advance(sim::RngStream& rng, double sigma_frac) {
    PolicyBlueprint base = *kept_;
    base.epoch = candidate_.epoch;  // epochs stay consecutive after a rollback
    PolicyBlueprint child = generate_blueprint(base, rng, sigma_frac);
    child.parent = kept_->id();
    candidate_ = std::move(child);
    return candidate_;
  }

 private:
  world::RsuId region_;
  PolicyBlueprint candidate_;
  std::optional<PolicyBlueprint> kept_;
  std::optional<double> kept_median_;
};

}  // namespace dtpop::twin
