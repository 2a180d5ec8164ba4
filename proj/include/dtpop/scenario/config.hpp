#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <optional>
#include <set>
#include <sstream>
#include <string>

#include "json.hpp"

#include "dtpop/errors.hpp"
#include "dtpop/sim/network.hpp"
#include "dtpop/twin/policy.hpp"

namespace dtpop::scenario {

enum class Mode : std::uint8_t { Layered, CloudOnly };

constexpr std::string_view to_string(Mode m) { return m == Mode::Layered ? "layered" : "cloud_only"; }

inline Mode parse_mode(const std::string& s) {
  if (s == "layered") return Mode::Layered;
  if (s == "cloud_only") return Mode::CloudOnly;
  throw ConfigError("mode", "expected layered or cloud_only, got '" + s + "'");
}

struct GridConfig {
  int rows = 2;
  int cols = 3;
  double spacing_m = 1000.0;
  double radius_m = 600.0;
  double hysteresis_m = 100.0;
  bool require_full_coverage = true;
};

struct LinkConfig {
  double base_latency_ms = 5.0;
  double bandwidth_Bps = 1e7;
  double loss_prob = 0.0;
  double retx_timeout_ms = 20.0;
  int max_attempts = 1;

  sim::LinkSpec spec() const {
    sim::LinkSpec l;
    l.base_latency = sim::millis(base_latency_ms);
    l.bandwidth_bps = bandwidth_Bps;
    l.loss_prob = loss_prob;
    l.retx_timeout = sim::millis(retx_timeout_ms);
    l.max_attempts = max_attempts;
    return l;
  }
};

struct LinksConfig {
  LinkConfig v2r{5.0, 1e7, 0.01, 20.0, 3};
  LinkConfig r2c{25.0, 1e8, 0.0, 20.0, 1};
  LinkConfig v2v{3.0, 1e6, 0.05, 20.0, 3};
  LinkConfig r2r{2.0, 1e8, 0.0, 20.0, 1};
};

struct WorkloadConfig {
  double rate_per_vehicle = 0.2;  // tasks per second
  double cost_min_cu = 1.0;
  double cost_max_cu = 10.0;
  std::uint32_t request_bytes = 2000;
  std::uint32_t response_bytes = 1000;
};

struct CapacityConfig {
  double local_cu_per_s = 50.0;
  double edge_cu_per_s = 1000.0;
  double cloud_cu_per_s = 20000.0;
};

struct ThresholdConfig {
  double overload_util = 0.85;
  double underload_util = 0.5;
  double backlog_to_cloud_s = 5.0;
  double local_backlog_s = 2.0;
  double handoff_margin_s = 1.0;
  double rollback_ratio = 1.05;
};

struct PeriodConfig {
  double sense_s = 0.1;
  double report_s = 1.0;
  double fusion_s = 5.0;
  double uplink_s = 5.0;
  double epoch_s = 30.0;
  double beacon_s = 1.0;
  double index_window_s = 10.0;
  double cloud_grace_s = 0.5;
};

struct LocalConfig {
  double ewma_alpha = 0.3;
  double v2v_range_m = 150.0;
  double neighbor_expiry_s = 3.0;
};

struct MessageConfig {
  std::uint32_t report_bytes = 500;
  std::uint32_t beacon_bytes = 100;
  std::uint32_t policy_bytes = 200;
  std::uint32_t directive_bytes = 200;
};

struct CloudConfig {
  std::size_t ring_capacity = 100;
  double mutation_sigma_frac = 0.1;
};

struct HotspotConfig {
  std::size_t region = 0;
  double rate_multiplier = 6.0;
  double t_start_s = 100.0;
  double t_end_s = 200.0;
};

struct ScenarioConfig {
  GridConfig grid;
  int vehicles_per_rsu = 200;
  double speed_min_mps = 8.0;
  double speed_max_mps = 15.0;
  double energy_drain_per_m = 1e-5;
  LinksConfig links;
  WorkloadConfig workload;
  CapacityConfig capacities;
  ThresholdConfig thresholds;
  PeriodConfig periods;
  LocalConfig local;
  MessageConfig messages;
  CloudConfig cloud;
  twin::PolicyParams initial_policy;
  bool edge_bootstrap_via_cloud = true;
  Mode mode = Mode::Layered;
  double duration_s = 300.0;
  std::uint64_t seed = 0;
  std::optional<HotspotConfig> hotspot;

  std::size_t rsu_count() const { return static_cast<std::size_t>(grid.rows) * static_cast<std::size_t>(grid.cols); }
  std::size_t vehicle_count() const { return rsu_count() * static_cast<std::size_t>(vehicles_per_rsu); }
};

// Built-in hotspot sub-scenario.
inline HotspotConfig default_hotspot() { return HotspotConfig{}; }

namespace detail {

// Reads known keys from one JSON object and rejects the rest.
class ObjectReader {
 public:
  ObjectReader(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  std::string key(const std::string& k) const { return path_.empty() ? k : path_ + "." + k; }

  const nlohmann::json* get(const std::string& k) {
    seen_.insert(k);
    auto it = j_.find(k);
    return it == j_.end() ? nullptr : &*it;
  }

  void number(const std::string& k, double& out, double lo, double hi, bool lo_open = false, bool hi_open = false) {
    if (const auto* v = get(k)) {
      if (!v->is_number()) throw ConfigError(key(k), "expected a number");
      out = v->get<double>();
    }
    if (!std::isfinite(out) || out < lo || out > hi || (lo_open && out == lo) || (hi_open && out == hi)) {
      std::ostringstream os;
      os << "value " << out << " out of range " << (lo_open ? "(" : "[") << lo << ", " << hi << (hi_open ? ")" : "]");
      throw ConfigError(key(k), os.str());
    }
  }

  template <class Int>
  void integer(const std::string& k, Int& out, long long lo, long long hi) {
    if (const auto* v = get(k)) {
      if (!v->is_number_integer()) throw ConfigError(key(k), "expected an integer");
      const auto x = v->get<long long>();
      if (x < lo || x > hi) {
        throw ConfigError(key(k), "value " + std::to_string(x) + " out of range [" + std::to_string(lo) + ", " +
                                      std::to_string(hi) + "]");
      }
      out = static_cast<Int>(x);
    } else if (static_cast<long long>(out) < lo || static_cast<long long>(out) > hi) {
      throw ConfigError(key(k), "value out of range");
    }
  }

  void boolean(const std::string& k, bool& out) {
    if (const auto* v = get(k)) {
      if (!v->is_boolean()) throw ConfigError(key(k), "expected a boolean");
      out = v->get<bool>();
    }
  }

  void object(const std::string& k, const std::function<void(ObjectReader&)>& fn) {
    if (const auto* v = get(k)) {
      ObjectReader sub(*v, key(k));
      fn(sub);
      sub.finish();
    }
  }

  void finish() const {
    for (const auto& [k, _] : j_.items()) {
      if (!seen_.contains(k)) throw ConfigError(key(k), "unknown key");
    }
  }

 private:
  const nlohmann::json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

constexpr double kInf = 1e300;

inline void read_link(ObjectReader& r, LinkConfig& l) {
  r.number("base_latency_ms", l.base_latency_ms, 0.0, kInf);
  r.number("bandwidth_Bps", l.bandwidth_Bps, 0.0, kInf, true);
  r.number("loss_prob", l.loss_prob, 0.0, 1.0, false, true);
  r.number("retx_timeout_ms", l.retx_timeout_ms, 0.0, kInf);
  r.integer("max_attempts", l.max_attempts, 1, 1000);
}

inline void read_policy(ObjectReader& r, twin::PolicyParams& p) {
  r.number("local_serve_threshold", p.local_serve_threshold, twin::kLocalThresholdRange.lo, twin::kLocalThresholdRange.hi);
  r.number("offload_fraction", p.offload_fraction, 0.0, 1.0);
  r.number("congestion_speed_threshold", p.congestion_speed_threshold, twin::kCongestionSpeedRange.lo,
           twin::kCongestionSpeedRange.hi);
  if (const auto* q = r.get("role_quotas")) {
    if (!q->is_array() || q->size() != 3) throw ConfigError(r.key("role_quotas"), "expected 3 numbers");
    for (std::size_t i = 0; i < 3; ++i) {
      if (!(*q)[i].is_number()) throw ConfigError(r.key("role_quotas"), "expected 3 numbers");
      p.role_quotas[i] = (*q)[i].get<double>();
    }
  }
  double sum = 0.0;
  for (double v : p.role_quotas) {
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) throw ConfigError(r.key("role_quotas"), "quota out of range [0, 1]");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigError(r.key("role_quotas"), "quotas must sum to 1");
}

}  // namespace detail

// Cross-field checks shared by the file loader and CLI overrides.
inline void validate(const ScenarioConfig& c) {
  if (c.speed_min_mps > c.speed_max_mps) throw ConfigError("speeds.min_mps", "exceeds speeds.max_mps");
  if (c.workload.cost_min_cu > c.workload.cost_max_cu) throw ConfigError("workload.cost_min_cu", "exceeds cost_max_cu");
  if (c.thresholds.underload_util > c.thresholds.overload_util) {
    throw ConfigError("thresholds.underload_util", "exceeds overload_util");
  }
  const double ratio = c.periods.uplink_s / c.periods.fusion_s;
  if (std::abs(ratio - std::round(ratio)) > 1e-9 || std::round(ratio) < 1.0) {
    throw ConfigError("periods.uplink_s", "must be a whole multiple of periods.fusion_s");
  }
  if (!(c.duration_s > c.periods.epoch_s)) throw ConfigError("duration_s", "must exceed periods.epoch_s");
  if (c.periods.cloud_grace_s >= c.periods.fusion_s) throw ConfigError("periods.cloud_grace_s", "must be below fusion_s");
  if (c.hotspot) {
    if (c.hotspot->region >= c.rsu_count()) throw ConfigError("hotspot.region", "no such RSU");
    if (c.hotspot->t_end_s < c.hotspot->t_start_s) throw ConfigError("hotspot.t_end_s", "before t_start_s");
  }
}

inline ScenarioConfig parse_scenario(const nlohmann::json& root) {
  using detail::kInf;
  ScenarioConfig c;
  if (root.is_null()) return c;
  detail::ObjectReader r(root, "");
  r.object("grid", [&](auto& g) {
    g.integer("rows", c.grid.rows, 1, 1000);
    g.integer("cols", c.grid.cols, 1, 1000);
    g.number("spacing_m", c.grid.spacing_m, 0.0, kInf, true);
    g.number("radius_m", c.grid.radius_m, 0.0, kInf, true);
    g.number("hysteresis_m", c.grid.hysteresis_m, 0.0, kInf);
    g.boolean("require_full_coverage", c.grid.require_full_coverage);
  });
  r.integer("vehicles_per_rsu", c.vehicles_per_rsu, 0, 100000);
  r.object("speeds", [&](auto& s) {
    s.number("min_mps", c.speed_min_mps, 0.0, 100.0);
    s.number("max_mps", c.speed_max_mps, 0.0, 100.0);
  });
  r.number("energy_drain_per_m", c.energy_drain_per_m, 0.0, 1.0);
  r.object("links", [&](auto& l) {
    l.object("v2r", [&](auto& x) { detail::read_link(x, c.links.v2r); });
    l.object("r2c", [&](auto& x) { detail::read_link(x, c.links.r2c); });
    l.object("v2v", [&](auto& x) { detail::read_link(x, c.links.v2v); });
    l.object("r2r", [&](auto& x) { detail::read_link(x, c.links.r2r); });
  });
  r.object("workload", [&](auto& w) {
    w.number("rate_per_vehicle", c.workload.rate_per_vehicle, 0.0, 1e6);
    w.number("cost_min_cu", c.workload.cost_min_cu, 0.0, kInf, true);
    w.number("cost_max_cu", c.workload.cost_max_cu, 0.0, kInf, true);
    w.integer("request_bytes", c.workload.request_bytes, 0, 1 << 30);
    w.integer("response_bytes", c.workload.response_bytes, 0, 1 << 30);
  });
  r.object("capacities", [&](auto& k) {
    k.number("local_cu_per_s", c.capacities.local_cu_per_s, 0.0, kInf, true);
    k.number("edge_cu_per_s", c.capacities.edge_cu_per_s, 0.0, kInf, true);
    k.number("cloud_cu_per_s", c.capacities.cloud_cu_per_s, 0.0, kInf, true);
  });
  r.object("thresholds", [&](auto& t) {
    t.number("overload_util", c.thresholds.overload_util, 0.0, 1.0);
    t.number("underload_util", c.thresholds.underload_util, 0.0, 1.0);
    t.number("backlog_to_cloud_s", c.thresholds.backlog_to_cloud_s, 0.0, kInf);
    t.number("local_backlog_s", c.thresholds.local_backlog_s, 0.0, kInf);
    t.number("handoff_margin_s", c.thresholds.handoff_margin_s, 0.0, kInf);
    t.number("rollback_ratio", c.thresholds.rollback_ratio, 1.0, kInf);
  });
  r.object("periods", [&](auto& p) {
    p.number("sense_s", c.periods.sense_s, 1e-6, 3600.0);
    p.number("report_s", c.periods.report_s, 1e-6, 3600.0);
    p.number("fusion_s", c.periods.fusion_s, 1e-6, 3600.0);
    p.number("uplink_s", c.periods.uplink_s, 1e-6, 3600.0);
    p.number("epoch_s", c.periods.epoch_s, 1e-6, 1e6);
    p.number("beacon_s", c.periods.beacon_s, 1e-6, 3600.0);
    p.number("index_window_s", c.periods.index_window_s, 1e-6, 1e6);
    p.number("cloud_grace_s", c.periods.cloud_grace_s, 0.0, 3600.0);
  });
  r.object("local", [&](auto& l) {
    l.number("ewma_alpha", c.local.ewma_alpha, 0.0, 1.0, true);
    l.number("v2v_range_m", c.local.v2v_range_m, 0.0, kInf);
    l.number("neighbor_expiry_s", c.local.neighbor_expiry_s, 0.0, kInf);
  });
  r.object("messages", [&](auto& m) {
    m.integer("report_bytes", c.messages.report_bytes, 0, 1 << 30);
    m.integer("beacon_bytes", c.messages.beacon_bytes, 0, 1 << 30);
    m.integer("policy_bytes", c.messages.policy_bytes, 0, 1 << 30);
    m.integer("directive_bytes", c.messages.directive_bytes, 0, 1 << 30);
  });
  r.object("cloud", [&](auto& k) {
    k.integer("ring_capacity", c.cloud.ring_capacity, 1, 1000000);
    k.number("mutation_sigma_frac", c.cloud.mutation_sigma_frac, 0.0, 1.0);
  });
  r.object("initial_policy", [&](auto& p) { detail::read_policy(p, c.initial_policy); });
  r.boolean("edge_bootstrap_via_cloud", c.edge_bootstrap_via_cloud);
  if (const auto* m = r.get("mode")) {
    if (!m->is_string()) throw ConfigError("mode", "expected a string");
    c.mode = parse_mode(m->get<std::string>());
  }
  r.number("duration_s", c.duration_s, 0.0, 1e7, true);
  if (const auto* s = r.get("seed")) {
    if (!s->is_number_unsigned()) throw ConfigError("seed", "expected a non-negative integer");
    c.seed = s->get<std::uint64_t>();
  }
  if (const auto* h = r.get("hotspot")) {
    if (!h->is_null()) {
      HotspotConfig hc = default_hotspot();
      detail::ObjectReader hr(*h, "hotspot");
      hr.integer("region", hc.region, 0, 1000000);
      hr.number("rate_multiplier", hc.rate_multiplier, 0.0, 1e6);
      hr.number("t_start_s", hc.t_start_s, 0.0, 1e7);
      hr.number("t_end_s", hc.t_end_s, 0.0, 1e7);
      hr.finish();
      c.hotspot = hc;
    }
  }
  r.finish();
  validate(c);
  return c;
}

inline ScenarioConfig parse_scenario_text(const std::string& text) {
  std::string trimmed = text;
  trimmed.erase(0, trimmed.find_first_not_of(" \t\r\n"));
  if (trimmed.empty()) {
    ScenarioConfig c;
    validate(c);
    return c;
  }
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("<file>", std::string("invalid JSON: ") + e.what());
  }
  return parse_scenario(j);
}

// Parses, defaults and validates a scenario file. An empty file yields the showcase defaults.
inline ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("<file>", "cannot open scenario file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario_text(ss.str());
}

}  // namespace dtpop::scenario
