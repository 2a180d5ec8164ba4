#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "dtpop/errors.hpp"
#include "dtpop/sim/clock.hpp"
#include "dtpop/sim/fifo_server.hpp"
#include "dtpop/stats.hpp"
#include "dtpop/twin/blueprint.hpp"
#include "dtpop/twin/local_twin.hpp"
#include "dtpop/twin/policy.hpp"
#include "dtpop/world/mobility.hpp"

namespace dtpop::twin {

// ---------------------------------------------------------------------------
// Population and roles

/**
 * Seats per role from quotas by largest-remainder rounding. Each role gets
 * floor(quota * n); the leftover seats go to the largest fractional parts,
 * earlier roles winning ties.
 */
inline std::array<std::size_t, 3> role_seats(const RoleQuotas& quotas, std::size_t n) {
  std::array<std::size_t, 3> seats{};
  std::array<double, 3> rem{};
  std::size_t used = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    const double exact = quotas[i] * static_cast<double>(n);
    double fl = std::floor(exact + 1e-9);
    seats[i] = static_cast<std::size_t>(fl);
    rem[i] = std::max(0.0, exact - fl);
    used += seats[i];
  }
  std::array<std::size_t, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return rem[a] > rem[b] + 1e-9; });
  for (std::size_t k = 0; used < n; k = (k + 1) % 3) {
    ++seats[order[k]];
    ++used;
  }
  while (used > n) {  // only if quotas sum above 1
    for (std::size_t i = 3; i-- > 0 && used > n;) {
      if (seats[i] > 0) {
        --seats[i];
        --used;
      }
    }
  }
  return seats;
}

struct Member {
  DeviceId id = 0;
  SimTime joined;
  Role role = Role::Acquisition;
  double channel_quality = 0.0;
  double backlog_cu = 0.0;
};

/**
 * Greedy seat filling in role order: Acquisition takes the best channel
 * quality, Processing the most idle compute among the rest, Coordination the
 * longest tenure among what remains. Ties go to the lower device id.
 */
inline std::map<DeviceId, Role> assign_roles(std::span<const Member> members, const RoleQuotas& quotas) {
  std::map<DeviceId, Role> out;
  if (members.empty()) return out;
  const auto quota_sum = std::accumulate(quotas.begin(), quotas.end(), 0.0);
  if (std::abs(quota_sum - 1.0) > 1e-9) throw std::invalid_argument("assign_roles: quotas must sum to 1");
  const auto seats = role_seats(quotas, members.size());

  std::vector<const Member*> pool;
  pool.reserve(members.size());
  for (const auto& m : members) pool.push_back(&m);

  auto take = [&](std::size_t count, Role role, auto better) {
    std::stable_sort(pool.begin(), pool.end(), [&](const Member* a, const Member* b) {
      if (better(*a, *b)) return true;
      if (better(*b, *a)) return false;
      return a->id < b->id;
    });
    count = std::min(count, pool.size());
    for (std::size_t i = 0; i < count; ++i) out[pool[i]->id] = role;
    pool.erase(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(count));
  };
  take(seats[0], Role::Acquisition,
       [](const Member& a, const Member& b) { return a.channel_quality > b.channel_quality; });
  take(seats[1], Role::Processing, [](const Member& a, const Member& b) { return a.backlog_cu < b.backlog_cu; });
  take(pool.size(), Role::Coordination, [](const Member& a, const Member& b) { return a.joined < b.joined; });
  return out;
}

class Population {
 public:
  explicit Population(world::RsuId rsu) : rsu_(rsu) {}

  world::RsuId rsu() const { return rsu_; }

  void admit(DeviceId id, SimTime now) {
    if (members_.contains(id)) {
      throw InvariantViolation("duplicate membership: device " + std::to_string(id) + " already in RSU " +
                               std::to_string(rsu_));
    }
    members_.emplace(id, Member{id, now, Role::Acquisition, 0.0, 0.0});
  }

  bool release(DeviceId id) { return members_.erase(id) > 0; }
  bool contains(DeviceId id) const { return members_.contains(id); }
  std::size_t size() const { return members_.size(); }

  Member* find(DeviceId id) {
    auto it = members_.find(id);
    return it == members_.end() ? nullptr : &it->second;
  }

  std::vector<Member> snapshot() const {
    std::vector<Member> v;
    v.reserve(members_.size());
    for (const auto& [_, m] : members_) v.push_back(m);
    return v;
  }

  const std::map<DeviceId, Member>& members() const { return members_; }

  void apply_roles(const std::map<DeviceId, Role>& roles) {
    for (auto& [id, m] : members_) {
      if (auto it = roles.find(id); it != roles.end()) m.role = it->second;
    }
  }

  std::array<std::size_t, 3> role_counts() const {
    std::array<std::size_t, 3> c{};
    for (const auto& [_, m] : members_) ++c[static_cast<std::size_t>(m.role)];
    return c;
  }

 private:
  world::RsuId rsu_;
  std::map<DeviceId, Member> members_;
};

// ---------------------------------------------------------------------------
// Regional fusion

enum class EventLabel : std::uint8_t { Congestion, Overload, Underload, Normal };

constexpr std::string_view to_string(EventLabel l) {
  switch (l) {
    case EventLabel::Congestion: return "Congestion";
    case EventLabel::Overload: return "Overload";
    case EventLabel::Underload: return "Underload";
    case EventLabel::Normal: return "Normal";
  }
  return "?";
}

inline std::optional<EventLabel> parse_label(std::string_view s) {
  for (auto l : {EventLabel::Congestion, EventLabel::Overload, EventLabel::Underload, EventLabel::Normal}) {
    if (to_string(l) == s) return l;
  }
  return std::nullopt;
}

using LabelSet = std::set<EventLabel>;

struct FusionThresholds {
  double overload_util = 0.85;
  double underload_util = 0.5;
  double congestion_speed = 6.0;
};

// Pure label rule. Normal only when no other label applies.
inline LabelSet event_labels(double mean_speed, double utilization, const FusionThresholds& th) {
  LabelSet s;
  if (mean_speed < th.congestion_speed) s.insert(EventLabel::Congestion);
  if (utilization > th.overload_util) s.insert(EventLabel::Overload);
  if (utilization < th.underload_util) s.insert(EventLabel::Underload);
  if (s.empty()) s.insert(EventLabel::Normal);
  return s;
}

struct RegionalState {
  SimTime t0;
  SimTime t1;
  double mean_speed = 0.0;
  std::map<std::size_t, double> density_per_segment;  // vehicles per km, segments with reports only
  double density = 0.0;                               // vehicles per km of region road
  double utilization = 0.0;
  double link_quality_mean = 0.0;
  LabelSet labels{EventLabel::Normal};
  std::size_t report_count = 0;
};

inline double utilization(double cu_processed, double capacity_cu_per_s, double window_s) {
  return std::clamp(cu_processed / (capacity_cu_per_s * window_s), 0.0, 1.0);
}

inline std::optional<std::size_t> segment_of(const world::RoadNetwork& net, Vec2 p, double tol = 1e-3) {
  for (std::size_t s = 0; s < net.segments.size(); ++s) {
    const auto& seg = net.segments[s];
    if (world::distance_to_segment(p, net.intersections[seg.a], net.intersections[seg.b]) <= tol) return s;
  }
  return std::nullopt;
}

/**
 * Fuses the member reports of one window into a regional view. With no
 * reports the previous report-derived fields carry forward and the label is
 * Normal.
 */
inline RegionalState fuse_region(std::span<const StatusReport> reports, SimTime t0, SimTime t1, double cu_processed,
                                 double capacity_cu_per_s, const FusionThresholds& th,
                                 const world::RoadNetwork* net = nullptr, std::optional<world::RsuId> rsu = {},
                                 const RegionalState* previous = nullptr) {
  RegionalState st;
  st.t0 = t0;
  st.t1 = t1;
  st.utilization = utilization(cu_processed, capacity_cu_per_s, sim::to_seconds(t1 - t0));
  if (reports.empty()) {
    if (previous) {
      st.mean_speed = previous->mean_speed;
      st.density_per_segment = previous->density_per_segment;
      st.density = previous->density;
      st.link_quality_mean = previous->link_quality_mean;
    }
    st.labels = {EventLabel::Normal};
    return st;
  }
  // Latest report per device for spatial fields; every report for speed.
  std::map<DeviceId, const StatusReport*> latest;
  double speed_sum = 0.0;
  double quality_sum = 0.0;
  for (const auto& r : reports) {
    speed_sum += r.features.mean_speed;
    quality_sum += r.features.channel_quality_last;
    auto& slot = latest[r.device_id];
    if (!slot || slot->features.t_end <= r.features.t_end) slot = &r;
  }
  const auto n = static_cast<double>(reports.size());
  st.mean_speed = speed_sum / n;
  st.link_quality_mean = quality_sum / n;
  st.report_count = reports.size();
  if (net) {
    std::map<std::size_t, std::size_t> counts;
    for (const auto& [_, r] : latest) {
      if (auto s = segment_of(*net, r->features.position_last)) ++counts[*s];
    }
    for (auto [s, c] : counts) st.density_per_segment[s] = static_cast<double>(c) / (net->segment_length(s) / 1000.0);
    if (rsu) {
      const double len = world::region_road_length_m(*net, *rsu);
      if (len > 0.0) st.density = world::vehicle_density(latest.size(), len);
    }
  }
  st.labels = event_labels(st.mean_speed, st.utilization, th);
  return st;
}

// ---------------------------------------------------------------------------
// Task scheduling

/**
 * Deterministic counter thinning: forwards exactly floor(phi * k) of the
 * first k arrivals, using integer parts-per-million arithmetic.
 */
class OffloadThinner {
 public:
  explicit OffloadThinner(double fraction = 0.0) { reset(fraction); }

  void reset(double fraction) {
    phi_ppm_ = std::llround(std::clamp(fraction, 0.0, 1.0) * 1'000'000.0);
    acc_ = 0;
    arrivals_ = 0;
    forwarded_ = 0;
  }

  bool next() {
    ++arrivals_;
    acc_ += phi_ppm_;
    if (acc_ >= 1'000'000) {
      acc_ -= 1'000'000;
      ++forwarded_;
      return true;
    }
    return false;
  }

  double fraction() const { return static_cast<double>(phi_ppm_) / 1e6; }
  std::uint64_t arrivals() const { return arrivals_; }
  std::uint64_t forwarded() const { return forwarded_; }

 private:
  std::int64_t phi_ppm_ = 0;
  std::int64_t acc_ = 0;
  std::uint64_t arrivals_ = 0;
  std::uint64_t forwarded_ = 0;
};

struct OffloadDirective {
  world::RsuId from = 0;
  world::RsuId to = 0;
  double fraction = 0.0;
  SimTime issued_at;
  SimTime expires_at;
};

enum class EdgeDecision : std::uint8_t { Serve, ForwardPartner, ForwardCloud };

struct EdgeContext {
  bool compute_enabled = true;  // false in the cloud-centric baseline or before the first policy
  bool overloaded = false;      // current labels include Overload
  bool directive_active = false;
  double backlog_s = 0.0;
  double backlog_to_cloud_s = 5.0;
};

// Placement of a task that reached the edge. Advances the thinner only while
// an offload directive is in force for an overloaded edge.
inline EdgeDecision schedule_task(const EdgeContext& ctx, OffloadThinner& thinner) {
  if (!ctx.compute_enabled) return EdgeDecision::ForwardCloud;
  if (ctx.directive_active && ctx.overloaded && thinner.next()) return EdgeDecision::ForwardPartner;
  if (ctx.backlog_s > ctx.backlog_to_cloud_s) return EdgeDecision::ForwardCloud;
  return EdgeDecision::Serve;
}

// ---------------------------------------------------------------------------
// Uplink

struct AutonomyWindow {
  std::uint64_t completed = 0;
  std::uint64_t local = 0;
  std::uint64_t edge = 0;
  std::uint64_t partner = 0;
  std::uint64_t cloud = 0;
  std::int64_t median_rt_us = -1;  // -1 when nothing completed
  std::int64_t policy_version = -1;

  double autonomy() const {
    return completed == 0 ? 0.0 : static_cast<double>(local + edge + partner) / static_cast<double>(completed);
  }
};

struct UplinkPackage {
  std::uint32_t rsu_id = 0;
  std::int64_t t0_us = 0;
  std::int64_t t1_us = 0;
  LabelSet labels;
  double mean_speed = 0.0;
  std::map<std::size_t, double> density_map;
  double utilization = 0.0;
  double trend_utilization = 0.0;
  double trend_speed = 0.0;
  AutonomyWindow autonomy;
};

// Canonical wire form. Labels are emitted in lexicographic order.
inline nlohmann::ordered_json to_json(const UplinkPackage& p) {
  nlohmann::ordered_json j;
  j["rsu_id"] = p.rsu_id;
  j["window"] = {p.t0_us, p.t1_us};
  std::vector<std::string> labels;
  for (auto l : p.labels) labels.emplace_back(to_string(l));
  std::sort(labels.begin(), labels.end());
  j["event_labels"] = labels;
  j["mean_speed"] = p.mean_speed;
  nlohmann::ordered_json dm = nlohmann::ordered_json::object();
  for (auto [s, d] : p.density_map) dm[std::to_string(s)] = d;
  j["density_map"] = dm;
  j["utilization"] = p.utilization;
  j["trend_utilization"] = p.trend_utilization;
  j["trend_speed"] = p.trend_speed;
  nlohmann::ordered_json aw;
  aw["completed"] = p.autonomy.completed;
  aw["local"] = p.autonomy.local;
  aw["edge"] = p.autonomy.edge;
  aw["partner"] = p.autonomy.partner;
  aw["cloud"] = p.autonomy.cloud;
  aw["median_rt_us"] = p.autonomy.median_rt_us;
  aw["policy_version"] = p.autonomy.policy_version;
  j["autonomy_window"] = aw;
  return j;
}

// Schema validation and parse; nullopt when any field is missing or mistyped.
inline std::optional<UplinkPackage> parse_uplink(const nlohmann::json& j) {
  try {
    if (!j.is_object()) return std::nullopt;
    UplinkPackage p;
    if (!j.at("rsu_id").is_number_unsigned()) return std::nullopt;
    p.rsu_id = j.at("rsu_id").get<std::uint32_t>();
    const auto& w = j.at("window");
    if (!w.is_array() || w.size() != 2 || !w[0].is_number_integer() || !w[1].is_number_integer()) return std::nullopt;
    p.t0_us = w[0].get<std::int64_t>();
    p.t1_us = w[1].get<std::int64_t>();
    if (p.t1_us <= p.t0_us) return std::nullopt;
    const auto& labels = j.at("event_labels");
    if (!labels.is_array()) return std::nullopt;
    for (const auto& l : labels) {
      if (!l.is_string()) return std::nullopt;
      auto parsed = parse_label(l.get<std::string>());
      if (!parsed) return std::nullopt;
      p.labels.insert(*parsed);
    }
    if (p.labels.empty()) return std::nullopt;
    auto num = [](const nlohmann::json& v) -> std::optional<double> {
      if (!v.is_number()) return std::nullopt;
      return v.get<double>();
    };
    auto ms = num(j.at("mean_speed"));
    auto u = num(j.at("utilization"));
    auto tu = num(j.at("trend_utilization"));
    auto ts = num(j.at("trend_speed"));
    if (!ms || !u || !tu || !ts) return std::nullopt;
    if (*u < 0.0 || *u > 1.0) return std::nullopt;
    p.mean_speed = *ms;
    p.utilization = *u;
    p.trend_utilization = *tu;
    p.trend_speed = *ts;
    const auto& dm = j.at("density_map");
    if (!dm.is_object()) return std::nullopt;
    for (const auto& [k, v] : dm.items()) {
      auto d = num(v);
      if (!d) return std::nullopt;
      p.density_map[std::stoul(k)] = *d;
    }
    const auto& aw = j.at("autonomy_window");
    auto u64 = [&](const char* key) { return aw.at(key).get<std::uint64_t>(); };
    p.autonomy.completed = u64("completed");
    p.autonomy.local = u64("local");
    p.autonomy.edge = u64("edge");
    p.autonomy.partner = u64("partner");
    p.autonomy.cloud = u64("cloud");
    p.autonomy.median_rt_us = aw.at("median_rt_us").get<std::int64_t>();
    p.autonomy.policy_version = aw.at("policy_version").get<std::int64_t>();
    return p;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

inline std::optional<UplinkPackage> parse_uplink(const std::string& text) {
  const auto j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded()) return std::nullopt;
  return parse_uplink(j);
}

struct WindowValues {
  double utilization;
  double mean_speed;
};

// Package for the latest fused window; trends are OLS slopes over the last
// `trend_points` windows of history (history includes the latest window).
inline UplinkPackage build_uplink(world::RsuId rsu, const RegionalState& st, std::span<const WindowValues> history,
                                  const AutonomyWindow& stats, std::size_t trend_points = 6) {
  UplinkPackage p;
  p.rsu_id = static_cast<std::uint32_t>(rsu);
  p.t0_us = sim::to_us(st.t0);
  p.t1_us = sim::to_us(st.t1);
  p.labels = st.labels;
  p.mean_speed = st.mean_speed;
  p.density_map = st.density_per_segment;
  p.utilization = st.utilization;
  const std::size_t n = std::min(trend_points, history.size());
  if (n > 0) {
    std::vector<double> u;
    std::vector<double> v;
    for (std::size_t i = history.size() - n; i < history.size(); ++i) {
      u.push_back(history[i].utilization);
      v.push_back(history[i].mean_speed);
    }
    p.trend_utilization = ols_slope(u);
    p.trend_speed = ols_slope(v);
  }
  p.autonomy = stats;
  return p;
}

// ---------------------------------------------------------------------------
// Strategy descent

/**
 * Turns a blueprint into this edge's executable policy: parameters are
 * clamped, and under Congestion 0.1 of quota moves from Coordination to
 * Acquisition (Coordination floor 0.05). Returns nullopt when the blueprint
 * is not for this RSU or its quotas cannot be normalised.
 */
inline std::optional<LocalPolicy> localize_policy(const PolicyBlueprint& bp, const LabelSet& current_labels,
                                                  world::RsuId rsu) {
  if (bp.target && *bp.target != rsu) return std::nullopt;
  if (!params_finite(bp.params)) return std::nullopt;
  for (double q : bp.params.role_quotas) {
    if (q < 0.0) return std::nullopt;
  }
  if (!normalized_quotas(bp.params.role_quotas)) return std::nullopt;
  LocalPolicy lp;
  lp.params = clamp_params(bp.params);
  if (current_labels.contains(EventLabel::Congestion)) {
    auto& q = lp.params.role_quotas;
    const double shift = std::clamp(q[2] - 0.05, 0.0, 0.1);
    q[0] += shift;
    q[2] -= shift;
  }
  lp.version = bp.epoch;
  lp.source_blueprint = bp.id();
  return lp;
}

// ---------------------------------------------------------------------------

/**
 * Edge DT at one RSU. Holds the population, the shared FIFO server, the
 * policy in force and the per-window accumulators. Message transport is the
 * owner's job; this class only keeps state and applies the rules above.
 */
class EdgeTwin {
 public:
  EdgeTwin(world::RsuId rsu, double capacity_cu_per_s) : population_(rsu), server_(capacity_cu_per_s) {}

  world::RsuId rsu() const { return population_.rsu(); }
  Population& population() { return population_; }
  const Population& population() const { return population_; }
  sim::FifoServer& server() { return server_; }

  void on_report(const StatusReport& r) {
    if (Member* m = population_.find(r.device_id)) {
      m->channel_quality = r.features.channel_quality_last;
      m->backlog_cu = r.backlog_cu;
      window_reports_.push_back(r);
    }
  }

  std::map<DeviceId, Role> reassign_roles() {
    const RoleQuotas quotas = policy_ ? policy_->params.role_quotas : fallback_quotas_;
    auto members = population_.snapshot();
    auto roles = assign_roles(members, quotas);
    population_.apply_roles(roles);
    return roles;
  }

  void set_fallback_quotas(RoleQuotas q) { fallback_quotas_ = q; }

  // Fuses [t0, t1), appends the window to the trend history and clears the report buffer.
  const RegionalState& close_window(SimTime t0, SimTime t1, const FusionThresholds& base, const world::RoadNetwork& net) {
    FusionThresholds th = base;
    if (policy_) th.congestion_speed = policy_->params.congestion_speed_threshold;
    const double cu = compute_enabled() ? server_.processed_cu(t0, t1) : 0.0;
    state_ = fuse_region(window_reports_, t0, t1, cu, server_.capacity(), th, &net, rsu(),
                         has_state_ ? &state_ : nullptr);
    has_state_ = true;
    window_reports_.clear();
    history_.push_back({state_.utilization, state_.mean_speed});
    if (history_.size() > 6) history_.pop_front();
    return state_;
  }

  UplinkPackage make_uplink() {
    std::vector<WindowValues> h(history_.begin(), history_.end());
    AutonomyWindow stats = stats_;
    stats.policy_version = policy_ ? policy_->version : -1;
    if (!window_rts_.empty()) stats.median_rt_us = std::llround(median(window_rts_));
    stats_ = {};
    window_rts_.clear();
    return build_uplink(rsu(), state_, h, stats);
  }

  const RegionalState& state() const { return state_; }
  bool overloaded() const { return has_state_ && state_.labels.contains(EventLabel::Overload); }

  // A validated blueprint waits here until the next window boundary.
  bool receive_blueprint(const std::string& wire) {
    auto bp = parse_blueprint(wire);
    if (!bp || !localize_policy(*bp, state_.labels, rsu())) {
      ++rejected_blueprints_;
      return false;
    }
    pending_ = std::move(bp);
    return true;
  }

  // Applies the pending blueprint (if any) against the latest regional labels.
  bool apply_pending(SimTime now) {
    if (!pending_) return false;
    auto lp = localize_policy(*pending_, state_.labels, rsu());
    pending_.reset();
    if (!lp) {
      ++rejected_blueprints_;
      return false;
    }
    policy_ = std::move(lp);
    policy_history_.emplace_back(now, policy_->version);
    return true;
  }

  void set_policy(LocalPolicy p, SimTime now) {
    policy_ = std::move(p);
    policy_history_.emplace_back(now, policy_->version);
  }

  const std::optional<LocalPolicy>& policy() const { return policy_; }
  const std::vector<std::pair<SimTime, std::int64_t>>& policy_history() const { return policy_history_; }
  std::uint64_t rejected_blueprints() const { return rejected_blueprints_; }

  void set_cloud_only(bool v) { cloud_only_ = v; }
  bool compute_enabled() const { return !cloud_only_ && policy_.has_value(); }

  void set_directive(const OffloadDirective& d) {
    directive_ = d;
    thinner_.reset(d.fraction);
  }
  bool directive_active(SimTime now) const { return directive_ && now < directive_->expires_at; }
  const std::optional<OffloadDirective>& directive() const { return directive_; }
  OffloadThinner& thinner() { return thinner_; }

  EdgeDecision on_task(SimTime now, double backlog_to_cloud_s) {
    EdgeContext ctx;
    ctx.compute_enabled = compute_enabled();
    ctx.overloaded = overloaded();
    ctx.directive_active = directive_active(now);
    ctx.backlog_s = server_.backlog_s(now);
    ctx.backlog_to_cloud_s = backlog_to_cloud_s;
    return schedule_task(ctx, thinner_);
  }

  enum class Tier : std::uint8_t { Local, Edge, Partner, Cloud };

  void record_completion(Tier tier, std::int64_t rt_us) {
    ++stats_.completed;
    switch (tier) {
      case Tier::Local: ++stats_.local; break;
      case Tier::Edge: ++stats_.edge; break;
      case Tier::Partner: ++stats_.partner; break;
      case Tier::Cloud: ++stats_.cloud; break;
    }
    window_rts_.push_back(rt_us);
  }

 private:
  Population population_;
  sim::FifoServer server_;
  std::vector<StatusReport> window_reports_;
  RegionalState state_;
  bool has_state_ = false;
  std::deque<WindowValues> history_;
  std::optional<LocalPolicy> policy_;
  std::optional<PolicyBlueprint> pending_;
  std::vector<std::pair<SimTime, std::int64_t>> policy_history_;
  std::uint64_t rejected_blueprints_ = 0;
  RoleQuotas fallback_quotas_{0.5, 0.3, 0.2};
  bool cloud_only_ = false;
  std::optional<OffloadDirective> directive_;
  OffloadThinner thinner_;
  AutonomyWindow stats_;
  std::vector<std::int64_t> window_rts_;
};

}  // namespace dtpop::twin
