#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "dtpop/errors.hpp"
#include "dtpop/scenario/config.hpp"
#include "dtpop/scenario/metrics.hpp"
#include "dtpop/sim/engine.hpp"
#include "dtpop/sim/fifo_server.hpp"
#include "dtpop/sim/network.hpp"
#include "dtpop/sim/rng.hpp"
#include "dtpop/twin/cloud_twin.hpp"
#include "dtpop/twin/edge_twin.hpp"
#include "dtpop/twin/local_twin.hpp"
#include "dtpop/world/mobility.hpp"

namespace dtpop::scenario {

using sim::Duration;
using sim::EventKind;
using sim::SimTime;

struct LabelLogEntry {
  std::int64_t t_us = 0;
  std::uint32_t rsu = 0;
  twin::LabelSet labels;
};

struct DirectiveLogEntry {
  std::int64_t t_us = 0;
  twin::OffloadDirective directive;
};

struct Conservation {
  std::uint64_t generated = 0;
  std::uint64_t completed = 0;
  std::uint64_t dropped = 0;
  std::uint64_t in_flight = 0;

  bool balanced() const { return generated == completed + dropped + in_flight; }
};

struct InvariantCounters {
  std::uint64_t off_road = 0;           // vehicle off its segment after a step
  std::uint64_t partition = 0;          // membership partition breaches at window checks
  std::uint64_t uncovered_ticks = 0;    // vehicle-ticks without a serving RSU
  std::uint64_t double_settlement = 0;  // task completed or dropped twice
};

struct ReportCounters {
  std::uint64_t periodic = 0;
  std::uint64_t handover_triggers = 0;
  std::uint64_t backlog_triggers = 0;
  std::uint64_t sent = 0;
};

struct RunResult {
  ScenarioConfig config;
  std::vector<TaskRecord> tasks;
  std::vector<IndexPoint> indices;
  std::vector<twin::EpochRecord> epochs;
  std::vector<LabelLogEntry> label_log;
  std::vector<DirectiveLogEntry> directive_log;
  std::vector<std::vector<std::pair<SimTime, std::int64_t>>> policy_history;  // per edge
  sim::MessageCounters messages;
  InvariantCounters invariants;
  ReportCounters reports;
  Conservation counted;                   // tallied from settlement events
  std::vector<Conservation> per_region;   // by serving RSU at creation; last bucket = unserved
  std::uint64_t rejected_packages = 0;
  std::uint64_t rejected_blueprints = 0;
  std::uint64_t handoffs = 0;
  std::uint64_t events_processed = 0;
  double wall_seconds = 0.0;
};

/**
 * One simulation instance of the three-tier ecosystem: vehicles with local
 * twins, one edge twin per RSU, and the cloud twin. All interaction between
 * twins goes through scheduled network messages.
 */
class Simulation {
 public:
  explicit Simulation(ScenarioConfig cfg)
      : cfg_(std::move(cfg)),
        net_(world::build_grid(cfg_.grid.rows, cfg_.grid.cols, cfg_.grid.spacing_m, cfg_.grid.radius_m,
                               cfg_.grid.require_full_coverage)),
        network_(engine_),
        rng_spawn_(cfg_.seed, "spawn"),
        rng_mobility_(cfg_.seed, "mobility"),
        rng_tasks_(cfg_.seed, "tasks"),
        rng_loss_(cfg_.seed, "loss"),
        rng_mutation_(cfg_.seed, "mutation"),
        graph_(net_.rsu_adjacency(), cfg_.cloud.ring_capacity),
        cloud_server_(cfg_.capacities.cloud_cu_per_s) {
    validate(cfg_);
    v2r_ = cfg_.links.v2r.spec();
    r2c_ = cfg_.links.r2c.spec();
    v2v_ = cfg_.links.v2v.spec();
    r2r_ = cfg_.links.r2r.spec();
    beacon_link_ = v2v_;
    beacon_link_.max_attempts = 1;
    end_ = SimTime{} + sim::seconds(cfg_.duration_s);
    spawn();
    setup_tiers();
  }

  // Scripted task at time `at` (in addition to the Poisson workload).
  void inject_task(std::uint32_t vehicle, SimTime at, double cost_cu) {
    engine_.schedule(EventKind::Timer, at, [this, vehicle, cost_cu] { create_task(vehicle, cost_cu); });
  }

  sim::Engine& engine() { return engine_; }
  const world::RoadNetwork& road() const { return net_; }
  const std::vector<world::VehicleState>& vehicles() const { return vehicles_; }
  const std::vector<twin::EdgeTwin>& edges() const { return edges_; }
  const twin::KnowledgeGraph& graph() const { return graph_; }

  RunResult run() {
    const auto wall0 = std::chrono::steady_clock::now();
    schedule_timers();
    engine_.run_until(end_);
    RunResult out;
    out.config = cfg_;
    for (auto& t : tasks_) {
      if (!t.completed() && !t.dropped) ++counted_.in_flight;
    }
    for (auto& row : per_region_) row.in_flight = 0;
    for (const auto& t : tasks_) {
      if (t.in_flight()) ++per_region_[region_bucket(t.region)].in_flight;
    }
    out.tasks = tasks_;
    out.indices = index_series(tasks_, to_us(sim::seconds(cfg_.periods.index_window_s)), to_us(end_));
    out.epochs = epochs_;
    out.label_log = label_log_;
    out.directive_log = directive_log_;
    for (const auto& e : edges_) {
      out.policy_history.push_back(e.policy_history());
      out.rejected_blueprints += e.rejected_blueprints();
    }
    out.rejected_blueprints += cloud_rejected_blueprints_;
    out.messages = network_.counters();
    out.invariants = invariants_;
    out.reports = reports_;
    for (const auto& lt : twins_) {
      out.reports.periodic += lt.reports().periodic_count();
      out.reports.handover_triggers += lt.reports().handover_triggers();
      out.reports.backlog_triggers += lt.reports().backlog_triggers();
    }
    out.counted = counted_;
    out.per_region = per_region_;
    out.rejected_packages = graph_.rejected();
    out.handoffs = handoffs_;
    out.events_processed = engine_.total_processed();
    out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();
    return out;
  }

 private:
  static std::int64_t to_us(Duration d) { return d.count(); }
  static std::int64_t to_us(SimTime t) { return sim::to_us(t); }

  sim::EndpointId vehicle_ep(std::uint32_t i) const { return {i}; }
  sim::EndpointId rsu_ep(world::RsuId r) const { return {static_cast<std::uint32_t>(vehicles_.size() + r)}; }
  sim::EndpointId cloud_ep() const { return {static_cast<std::uint32_t>(vehicles_.size() + edges_.size())}; }

  bool layered() const { return cfg_.mode == Mode::Layered; }

  std::size_t region_bucket(std::optional<std::uint32_t> r) const { return r ? *r : net_.rsus.size(); }

  // -------------------------------------------------------------------------
  // Setup

  void spawn() {
    std::uint32_t next_id = 0;
    for (world::RsuId r = 0; r < net_.rsus.size(); ++r) {
      const world::IntersectionId site = net_.rsus[r].site;
      const auto& nbrs = net_.neighbors[site];
      for (int k = 0; k < cfg_.vehicles_per_rsu; ++k) {
        world::VehicleState v;
        v.id = next_id++;
        v.speed = rng_spawn_.uniform(cfg_.speed_min_mps, cfg_.speed_max_mps);
        v.energy = 1.0;
        if (nbrs.empty()) {
          v.position = net_.intersections[site];
          v.from = v.waypoint = v.nav_intent = site;
        } else {
          const world::IntersectionId other = nbrs[rng_spawn_.uniform_index(nbrs.size())];
          const world::Vec2 a = net_.intersections[site];
          const world::Vec2 b = net_.intersections[other];
          const double len = world::distance(a, b);
          const double reach = std::min(net_.rsus[r].radius_m, len / 2.0);
          const double d = rng_spawn_.uniform(0.0, reach);
          v.position = a + (d / len) * (b - a);
          if (rng_spawn_.uniform01() < 0.5) {
            v.from = site;
            v.waypoint = other;
          } else {
            v.from = other;
            v.waypoint = site;
          }
          v.heading = world::unit_towards(net_.intersections[v.from], net_.intersections[v.waypoint], v.heading);
          v.nav_intent = world::draw_neighbor(net_, v.waypoint, rng_spawn_);
        }
        vehicles_.push_back(v);
      }
    }
    const std::size_t n = vehicles_.size();
    member_of_.assign(n, std::nullopt);
    pending_since_.assign(n, std::nullopt);
    twins_.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) {
      twins_.emplace_back(i, cfg_.capacities.local_cu_per_s, sim::seconds(cfg_.periods.report_s),
                          cfg_.thresholds.local_backlog_s, sim::seconds(cfg_.local.neighbor_expiry_s));
      const auto s = world::covering_rsu(net_, vehicles_[i].position, std::nullopt, cfg_.grid.hysteresis_m);
      twins_[i].set_serving(s);
      if (s) pending_since_[i] = SimTime{};
    }
  }

  void setup_tiers() {
    for (world::RsuId r = 0; r < net_.rsus.size(); ++r) {
      edges_.emplace_back(r, cfg_.capacities.edge_cu_per_s);
      edges_.back().set_cloud_only(!layered());
      edges_.back().set_fallback_quotas(cfg_.initial_policy.role_quotas);
      governors_.emplace_back(r, cfg_.initial_policy);
    }
    issued_.assign(edges_.size(), false);
    observations_.assign(edges_.size(), {});
    per_region_.assign(edges_.size() + 1, {});
    for (std::uint32_t i = 0; i < vehicles_.size(); ++i) network_.register_endpoint(vehicle_ep(i));
    for (world::RsuId r = 0; r < edges_.size(); ++r) network_.register_endpoint(rsu_ep(r));
    network_.register_endpoint(cloud_ep());

    if (!layered()) {
      twin::LocalPolicy baseline;
      baseline.params = cfg_.initial_policy;
      baseline.params.local_serve_threshold = 0.0;
      for (auto& lt : twins_) lt.set_policy(baseline);
      return;
    }
    if (!cfg_.edge_bootstrap_via_cloud) {
      for (world::RsuId r = 0; r < edges_.size(); ++r) {
        auto lp = twin::localize_policy(governors_[r].candidate(), {twin::EventLabel::Normal}, r);
        edges_[r].set_policy(*lp, SimTime{});
        issued_[r] = true;
      }
      for (auto& lt : twins_) {
        if (lt.serving()) lt.set_policy(*edges_[*lt.serving()].policy());
      }
    }
  }

  void schedule_timers() {
    const Duration sense = sim::seconds(cfg_.periods.sense_s);
    engine_.schedule(EventKind::AgentTick, SimTime{} + sense, [this] { world_tick(1); });
    const Duration fusion = sim::seconds(cfg_.periods.fusion_s);
    engine_.schedule(EventKind::Timer, SimTime{} + fusion, [this] { edge_window(1); });
    if (layered()) {
      const Duration grace = sim::seconds(cfg_.periods.cloud_grace_s);
      engine_.schedule(EventKind::Timer, SimTime{} + fusion + grace, [this] { cloud_coordinate(1); });
      engine_.schedule(EventKind::Timer, SimTime{} + sim::seconds(cfg_.periods.epoch_s) + grace,
                       [this] { cloud_epoch(1); });
    }
    for (std::uint32_t i = 0; i < vehicles_.size(); ++i) schedule_next_arrival(i);
  }

  // -------------------------------------------------------------------------
  // World and local twins

  void world_tick(std::int64_t k) {
    const SimTime now = engine_.now();
    const double dt = cfg_.periods.sense_s;
    for (std::uint32_t i = 0; i < vehicles_.size(); ++i) {
      auto& v = vehicles_[i];
      v = world::step_vehicle(v, dt, net_, rng_mobility_, cfg_.energy_drain_per_m);
      if (!world::on_current_segment(net_, v)) ++invariants_.off_road;
      auto& lt = twins_[i];
      const auto old = lt.serving();
      const auto cur = world::covering_rsu(net_, v.position, old, cfg_.grid.hysteresis_m);
      const bool changed = cur != old;
      if (changed) {
        lt.set_serving(cur);
        if (!cur) {
          release_member(i);
          pending_since_[i].reset();
        } else if (member_of_[i] != cur) {
          pending_since_[i] = now;
        } else {
          pending_since_[i].reset();
        }
      }
      if (!cur) ++invariants_.uncovered_ticks;
      lt.record(twin::sense(v, now, net_, cur));
      const auto due = lt.reports().poll(now, changed && cur.has_value(), lt.compute().backlog_s(now));
      if (due != twin::ReportTrigger::None) send_report(i);
    }
    const auto beacon_every = std::max<std::int64_t>(1, std::llround(cfg_.periods.beacon_s / cfg_.periods.sense_s));
    if (k % beacon_every == 0) {
      for (auto& lt : twins_) lt.neighbors().evict(now);
      send_beacons();
    }
    const SimTime next = SimTime{} + (k + 1) * sim::seconds(cfg_.periods.sense_s);
    if (next <= end_) engine_.schedule(EventKind::AgentTick, next, [this, k] { world_tick(k + 1); });
  }

  void send_report(std::uint32_t i) {
    auto& lt = twins_[i];
    const auto s = lt.serving();
    if (!s) return;
    auto report = lt.make_report(engine_.now(), cfg_.local.ewma_alpha, vehicles_[i].nav_intent);
    if (!report) return;
    ++reports_.sent;
    const world::RsuId r = *s;
    network_.send(vehicle_ep(i), rsu_ep(r), cfg_.messages.report_bytes, v2r_, rng_loss_,
                  [this, r, rep = *report] { report_delivered(r, rep); });
  }

  void report_delivered(world::RsuId r, const twin::StatusReport& rep) {
    const std::uint32_t d = rep.device_id;
    if (member_of_[d] != r) {
      if (!twins_[d].serving()) return;  // left coverage while in flight
      if (member_of_[d]) {
        auto& old = edges_[*member_of_[d]];
        old.population().release(d);
        old.reassign_roles();
      }
      edges_[r].population().admit(d, engine_.now());
      member_of_[d] = r;
      if (twins_[d].serving() == r) pending_since_[d].reset();
      auto roles = edges_[r].reassign_roles();
      send_welcome(r, d, roles[d]);
    }
    edges_[r].on_report(rep);
  }

  void release_member(std::uint32_t i) {
    if (!member_of_[i]) return;
    auto& e = edges_[*member_of_[i]];
    e.population().release(i);
    e.reassign_roles();
    member_of_[i].reset();
  }

  void send_welcome(world::RsuId r, std::uint32_t d, twin::Role role) {
    auto policy = edges_[r].policy();
    network_.send(rsu_ep(r), vehicle_ep(d), cfg_.messages.policy_bytes, v2r_, rng_loss_, [this, d, role, policy] {
      twins_[d].set_role(role);
      if (policy) twins_[d].set_policy(*policy);
    });
  }

  void send_beacons() {
    const SimTime now = engine_.now();
    const double range = cfg_.local.v2v_range_m;
    if (!(range > 0.0)) return;
    auto cell_of = [range](world::Vec2 p) {
      return std::pair<std::int64_t, std::int64_t>{static_cast<std::int64_t>(std::floor(p.x / range)),
                                                   static_cast<std::int64_t>(std::floor(p.y / range))};
    };
    std::map<std::pair<std::int64_t, std::int64_t>, std::vector<std::uint32_t>> cells;
    for (std::uint32_t i = 0; i < vehicles_.size(); ++i) cells[cell_of(vehicles_[i].position)].push_back(i);
    std::vector<sim::EndpointId> receivers;
    for (std::uint32_t i = 0; i < vehicles_.size(); ++i) {
      const auto& v = vehicles_[i];
      const auto [cx, cy] = cell_of(v.position);
      receivers.clear();
      for (std::int64_t dx = -1; dx <= 1; ++dx) {
        for (std::int64_t dy = -1; dy <= 1; ++dy) {
          auto it = cells.find({cx + dx, cy + dy});
          if (it == cells.end()) continue;
          for (std::uint32_t j : it->second) {
            if (j != i && twin::in_v2v_range(v.position, vehicles_[j].position, range)) receivers.push_back({j});
          }
        }
      }
      if (receivers.empty()) continue;
      std::sort(receivers.begin(), receivers.end());
      twin::Beacon b{i, v.position, v.speed, twins_[i].role(), twins_[i].compute().backlog_s(now), now};
      network_.multicast(vehicle_ep(i), receivers, cfg_.messages.beacon_bytes, beacon_link_, rng_loss_,
                         [this, b](sim::EndpointId to) { twins_[to.value].neighbors().observe(b, engine_.now()); });
    }
  }

  // -------------------------------------------------------------------------
  // Workload

  double rate_for(std::uint32_t i, SimTime t) const {
    double rate = cfg_.workload.rate_per_vehicle;
    if (cfg_.hotspot) {
      const auto& h = *cfg_.hotspot;
      const double ts = sim::to_seconds(t);
      const auto s = twins_[i].serving();
      if (s && *s == h.region && ts >= h.t_start_s && ts < h.t_end_s) rate *= h.rate_multiplier;
    }
    return rate;
  }

  double max_rate() const {
    double rate = cfg_.workload.rate_per_vehicle;
    if (cfg_.hotspot) rate *= std::max(1.0, cfg_.hotspot->rate_multiplier);
    return rate;
  }

  // Poisson arrivals; with a hotspot the process is thinned from the peak rate.
  void schedule_next_arrival(std::uint32_t i) {
    const double peak = max_rate();
    if (!(peak > 0.0)) return;
    const SimTime t = engine_.now() + sim::seconds(rng_tasks_.exponential(peak));
    if (t > end_) return;
    engine_.schedule(EventKind::Timer, t, [this, i, peak] {
      bool accept = true;
      if (cfg_.hotspot) accept = rng_tasks_.uniform01() * peak < rate_for(i, engine_.now());
      if (accept) create_task(i, rng_tasks_.uniform(cfg_.workload.cost_min_cu, cfg_.workload.cost_max_cu));
      schedule_next_arrival(i);
    });
  }

  void create_task(std::uint32_t i, double cost_cu) {
    const std::uint64_t id = tasks_.size();
    TaskRecord rec;
    rec.task_id = id;
    rec.origin = i;
    rec.created_us = to_us(engine_.now());
    if (auto s = twins_[i].serving()) rec.region = static_cast<std::uint32_t>(*s);
    tasks_.push_back(rec);
    twin::Task task;
    task.id = id;
    task.origin = i;
    task.cost_cu = cost_cu;
    task.request_bytes = cfg_.workload.request_bytes;
    task.response_bytes = cfg_.workload.response_bytes;
    task.created_at = engine_.now();
    live_.push_back(task);
    ++counted_.generated;
    ++per_region_[region_bucket(rec.region)].generated;
    dispatch_from_vehicle(id);
  }

  void dispatch_from_vehicle(std::uint64_t id) {
    const twin::Task& task = live_[id];
    auto& lt = twins_[task.origin];
    const SimTime now = engine_.now();
    if (const auto& policy = lt.policy()) {
      const double backlog_cu = lt.compute().backlog_cu(now);
      if (twin::decide_local(task, *policy, backlog_cu, cfg_.capacities.local_cu_per_s,
                             cfg_.thresholds.local_backlog_s) == twin::Placement::Local) {
        serve_local(task.origin, id, [this, id] { complete(id, Tier::Local); });
        return;
      }
      const double backlog_s = lt.compute().backlog_s(now);
      if (task.cost_cu <= policy->local_serve_threshold() && backlog_s > cfg_.thresholds.local_backlog_s) {
        if (auto nb = lt.neighbors().handoff_target(backlog_s, now, cfg_.thresholds.handoff_margin_s)) {
          handoff(task.origin, *nb, id, backlog_s);
          return;
        }
      }
    }
    send_to_edge(id);
  }

  template <class F>
  void serve_local(std::uint32_t device, std::uint64_t id, F on_done) {
    const auto slot = twins_[device].compute().enqueue(engine_.now(), live_[id].cost_cu);
    engine_.schedule(EventKind::Timer, slot.finish, std::move(on_done));
  }

  void handoff(std::uint32_t from, std::uint32_t to, std::uint64_t id, double sender_backlog_s) {
    ++handoffs_;
    const auto& task = live_[id];
    network_.send(
        vehicle_ep(from), vehicle_ep(to), task.request_bytes, v2v_, rng_loss_,
        [this, from, to, id, sender_backlog_s] {
          auto& nb = twins_[to];
          if (twin::accepts_handoff(nb.role(), nb.compute().backlog_s(engine_.now()), sender_backlog_s,
                                    cfg_.thresholds.handoff_margin_s)) {
            serve_local(to, id, [this, from, to, id] {
              network_.send(vehicle_ep(to), vehicle_ep(from), live_[id].response_bytes, v2v_, rng_loss_,
                            [this, id] { complete(id, Tier::Local); }, [this, id] { drop(id); });
            });
          } else {
            network_.send(vehicle_ep(to), vehicle_ep(from), cfg_.messages.beacon_bytes, v2v_, rng_loss_,
                          [this, id] { send_to_edge(id); }, [this, id] { drop(id); });
          }
        },
        [this, id] { drop(id); });
  }

  void send_to_edge(std::uint64_t id) {
    const auto& task = live_[id];
    const auto s = twins_[task.origin].serving();
    if (!s) {
      drop(id);
      return;
    }
    const world::RsuId r = *s;
    network_.send(vehicle_ep(task.origin), rsu_ep(r), task.request_bytes, v2r_, rng_loss_,
                  [this, r, id] { edge_arrival(r, id); }, [this, id] { drop(id); });
  }

  // -------------------------------------------------------------------------
  // Edge tier

  void edge_arrival(world::RsuId r, std::uint64_t id) {
    auto& edge = edges_[r];
    const SimTime now = engine_.now();
    if (edge.overloaded() && edge.compute_enabled()) tasks_[id].overload_arrival_us = to_us(now);
    switch (edge.on_task(now, cfg_.thresholds.backlog_to_cloud_s)) {
      case twin::EdgeDecision::Serve:
        serve_at_edge(r, r, id, Tier::Edge);
        break;
      case twin::EdgeDecision::ForwardPartner: {
        const world::RsuId p = edge.directive()->to;
        network_.send(rsu_ep(r), rsu_ep(p), live_[id].request_bytes, r2r_, rng_loss_,
                      [this, p, r, id] { serve_at_edge(p, r, id, Tier::PartnerEdge); }, [this, id] { drop(id); });
        break;
      }
      case twin::EdgeDecision::ForwardCloud:
        network_.send(rsu_ep(r), cloud_ep(), live_[id].request_bytes, r2c_, rng_loss_,
                      [this, id] { cloud_arrival(id); }, [this, id] { drop(id); });
        break;
    }
  }

  void serve_at_edge(world::RsuId server, world::RsuId origin_edge, std::uint64_t id, Tier tier) {
    const auto slot = edges_[server].server().enqueue(engine_.now(), live_[id].cost_cu);
    engine_.schedule(EventKind::Timer, slot.finish, [this, server, origin_edge, id, tier] {
      if (server == origin_edge) {
        deliver_from_edge(origin_edge, id, tier);
      } else {
        network_.send(rsu_ep(server), rsu_ep(origin_edge), live_[id].response_bytes, r2r_, rng_loss_,
                      [this, origin_edge, id, tier] { deliver_from_edge(origin_edge, id, tier); },
                      [this, id] { drop(id); });
      }
    });
  }

  // Result leaves the edge that owns the task: straight down if the vehicle
  // is still served here, otherwise relayed through the cloud.
  void deliver_from_edge(world::RsuId r, std::uint64_t id, Tier tier) {
    const auto& task = live_[id];
    const auto s = twins_[task.origin].serving();
    if (!s) {
      drop(id);
      return;
    }
    if (*s == r) {
      down_to_vehicle(r, id, tier);
      return;
    }
    network_.send(rsu_ep(r), cloud_ep(), task.response_bytes, r2c_, rng_loss_,
                  [this, id, tier] { cloud_to_vehicle(id, tier); }, [this, id] { drop(id); });
  }

  void down_to_vehicle(world::RsuId r, std::uint64_t id, Tier tier) {
    const auto& task = live_[id];
    network_.send(rsu_ep(r), vehicle_ep(task.origin), task.response_bytes, v2r_, rng_loss_,
                  [this, id, tier] { complete(id, tier); }, [this, id] { drop(id); });
  }

  void edge_window(std::int64_t k) {
    const SimTime now = engine_.now();
    const Duration fusion = sim::seconds(cfg_.periods.fusion_s);
    const auto uplink_every = std::max<std::int64_t>(1, std::llround(cfg_.periods.uplink_s / cfg_.periods.fusion_s));
    twin::FusionThresholds base{cfg_.thresholds.overload_util, cfg_.thresholds.underload_util,
                                cfg_.initial_policy.congestion_speed_threshold};
    for (world::RsuId r = 0; r < edges_.size(); ++r) {
      auto& edge = edges_[r];
      edge.close_window(now - fusion, now, base, net_);
      if (k % uplink_every == 0) {
        const std::string wire = twin::to_json(edge.make_uplink()).dump();
        network_.send(rsu_ep(r), cloud_ep(), wire.size(), r2c_, rng_loss_, [this, wire] { cloud_ingest(wire); });
      }
      edge.apply_pending(now);
      const auto roles = edge.reassign_roles();
      push_policy(r, roles);
    }
    check_partition(now);
    const SimTime next = SimTime{} + (k + 1) * fusion;
    if (next <= end_) engine_.schedule(EventKind::Timer, next, [this, k] { edge_window(k + 1); });
  }

  void push_policy(world::RsuId r, const std::map<twin::DeviceId, twin::Role>& roles) {
    if (roles.empty()) return;
    std::vector<sim::EndpointId> receivers;
    receivers.reserve(roles.size());
    for (const auto& [d, _] : roles) receivers.push_back(vehicle_ep(d));
    auto policy = edges_[r].policy();
    network_.multicast(rsu_ep(r), receivers, cfg_.messages.policy_bytes, v2r_, rng_loss_,
                       [this, roles, policy](sim::EndpointId to) {
                         auto& lt = twins_[to.value];
                         lt.set_role(roles.at(to.value));
                         if (policy) lt.set_policy(*policy);
                       });
  }

  void check_partition(SimTime now) {
    std::vector<int> seen(vehicles_.size(), 0);
    for (world::RsuId r = 0; r < edges_.size(); ++r) {
      for (const auto& [d, _] : edges_[r].population().members()) {
        ++seen[d];
        if (member_of_[d] != r) ++invariants_.partition;
      }
    }
    const Duration slack = sim::seconds(cfg_.periods.report_s) + v2r_.max_attempts * v2r_.retx_timeout +
                           sim::link_latency(v2r_, cfg_.messages.report_bytes) + sim::seconds(cfg_.periods.sense_s);
    for (std::uint32_t i = 0; i < vehicles_.size(); ++i) {
      if (seen[i] > 1) ++invariants_.partition;
      const bool covered = twins_[i].serving().has_value();
      if (seen[i] == 1 && !covered) ++invariants_.partition;
      if (covered && seen[i] == 0) {
        const bool pending = pending_since_[i] && now - *pending_since_[i] <= slack;
        if (!pending) ++invariants_.partition;
      }
    }
  }

  // -------------------------------------------------------------------------
  // Cloud tier

  void cloud_arrival(std::uint64_t id) {
    const auto slot = cloud_server_.enqueue(engine_.now(), live_[id].cost_cu);
    engine_.schedule(EventKind::Timer, slot.finish, [this, id] { cloud_to_vehicle(id, Tier::Cloud); });
  }

  void cloud_to_vehicle(std::uint64_t id, Tier tier) {
    const auto& task = live_[id];
    const auto s = twins_[task.origin].serving();
    if (!s) {
      drop(id);
      return;
    }
    const world::RsuId r = *s;
    network_.send(cloud_ep(), rsu_ep(r), task.response_bytes, r2c_, rng_loss_,
                  [this, r, id, tier] { down_to_vehicle(r, id, tier); }, [this, id] { drop(id); });
  }

  void cloud_ingest(const std::string& wire) {
    auto pkg = twin::parse_uplink(wire);
    if (!graph_.ingest(wire) || !pkg) return;
    const world::RsuId r = pkg->rsu_id;
    label_log_.push_back({to_us(engine_.now()), pkg->rsu_id, pkg->labels});
    if (!layered()) return;
    if (!issued_[r]) {
      issued_[r] = true;
      issue_blueprint(r, governors_[r].candidate());
    }
    if (pkg->autonomy.policy_version == governors_[r].candidate().epoch) observations_[r].push_back(pkg->autonomy);
  }

  void issue_blueprint(world::RsuId r, const twin::PolicyBlueprint& bp) {
    const std::string wire = twin::to_json(bp).dump();
    network_.send(cloud_ep(), rsu_ep(r), wire.size(), r2c_, rng_loss_, [this, r, wire] {
      if (!edges_[r].receive_blueprint(wire)) {
        network_.send(rsu_ep(r), cloud_ep(), cfg_.messages.directive_bytes, r2c_, rng_loss_,
                      [this] { ++cloud_rejected_blueprints_; });
      }
    });
  }

  SimTime epoch_end_after(SimTime now) const {
    const std::int64_t epoch_us = to_us(sim::seconds(cfg_.periods.epoch_s));
    return sim::at_us((to_us(now) / epoch_us + 1) * epoch_us);
  }

  void cloud_coordinate(std::int64_t k) {
    const SimTime now = engine_.now();
    for (world::RsuId r = 0; r < edges_.size(); ++r) {
      if (active_directive_.contains(r) && active_directive_[r].expires_at <= now) {
        graph_.unpair(r);
        active_directive_.erase(r);
      }
    }
    std::vector<twin::RegionView> views(edges_.size());
    for (world::RsuId r = 0; r < edges_.size(); ++r) {
      const auto& node = graph_.node(r);
      views[r].labels = node.labels;
      views[r].utilization = node.utilization;
      views[r].busy = graph_.pairing(r).has_value();
      views[r].fraction = governors_[r].candidate().params.offload_fraction;
    }
    for (const auto& d : twin::coordinate(views, graph_.adjacency(), now, epoch_end_after(now))) {
      graph_.pair(d.from, d.to);
      active_directive_[d.from] = d;
      directive_log_.push_back({to_us(now), d});
      network_.send(cloud_ep(), rsu_ep(d.from), cfg_.messages.directive_bytes, r2c_, rng_loss_,
                    [this, d] { edges_[d.from].set_directive(d); });
    }
    const SimTime next = SimTime{} + (k + 1) * sim::seconds(cfg_.periods.fusion_s) +
                         sim::seconds(cfg_.periods.cloud_grace_s);
    if (next <= end_) engine_.schedule(EventKind::Timer, next, [this, k] { cloud_coordinate(k + 1); });
  }

  void cloud_epoch(std::int64_t k) {
    const SimTime now = engine_.now();
    for (world::RsuId r = 0; r < edges_.size(); ++r) {
      if (!issued_[r]) continue;
      std::vector<double> medians;
      std::uint64_t completed = 0;
      std::uint64_t below = 0;
      for (const auto& w : observations_[r]) {
        if (w.median_rt_us >= 0) medians.push_back(static_cast<double>(w.median_rt_us));
        completed += w.completed;
        below += w.local + w.edge + w.partner;
      }
      const double autonomy = completed ? static_cast<double>(below) / static_cast<double>(completed) : 0.0;
      epochs_.push_back(governors_[r].close_epoch(medians, autonomy, cfg_.thresholds.rollback_ratio, now));
      observations_[r].clear();
      issue_blueprint(r, governors_[r].advance(rng_mutation_, cfg_.cloud.mutation_sigma_frac));
    }
    const SimTime next = SimTime{} + (k + 1) * sim::seconds(cfg_.periods.epoch_s) +
                         sim::seconds(cfg_.periods.cloud_grace_s);
    if (next <= end_) engine_.schedule(EventKind::Timer, next, [this, k] { cloud_epoch(k + 1); });
  }

  // -------------------------------------------------------------------------
  // Settlement

  void complete(std::uint64_t id, Tier tier) {
    auto& rec = tasks_[id];
    if (rec.completed() || rec.dropped) {
      ++invariants_.double_settlement;
      return;
    }
    rec.completed_us = to_us(engine_.now());
    rec.tier = tier;
    ++counted_.completed;
    ++per_region_[region_bucket(rec.region)].completed;
    if (rec.region) {
      using ET = twin::EdgeTwin::Tier;
      const ET et = tier == Tier::Local ? ET::Local
                    : tier == Tier::Edge ? ET::Edge
                    : tier == Tier::PartnerEdge ? ET::Partner
                                                : ET::Cloud;
      edges_[*rec.region].record_completion(et, rec.rt_us());
    }
  }

  void drop(std::uint64_t id) {
    auto& rec = tasks_[id];
    if (rec.completed() || rec.dropped) {
      ++invariants_.double_settlement;
      return;
    }
    rec.dropped = true;
    ++counted_.dropped;
    ++per_region_[region_bucket(rec.region)].dropped;
  }

  ScenarioConfig cfg_;
  world::RoadNetwork net_;
  sim::Engine engine_;
  sim::Network network_;
  sim::RngStream rng_spawn_;
  sim::RngStream rng_mobility_;
  sim::RngStream rng_tasks_;
  sim::RngStream rng_loss_;
  sim::RngStream rng_mutation_;
  sim::LinkSpec v2r_, r2c_, v2v_, r2r_, beacon_link_;
  SimTime end_;

  std::vector<world::VehicleState> vehicles_;
  std::vector<twin::LocalTwin> twins_;
  std::vector<std::optional<world::RsuId>> member_of_;
  std::vector<std::optional<SimTime>> pending_since_;
  std::vector<twin::EdgeTwin> edges_;

  twin::KnowledgeGraph graph_;
  sim::FifoServer cloud_server_;
  std::vector<twin::RegionGovernor> governors_;
  std::vector<bool> issued_;
  std::vector<std::vector<twin::AutonomyWindow>> observations_;
  std::map<world::RsuId, twin::OffloadDirective> active_directive_;
  std::uint64_t cloud_rejected_blueprints_ = 0;

  std::vector<TaskRecord> tasks_;
  std::vector<twin::Task> live_;
  std::vector<twin::EpochRecord> epochs_;
  std::vector<LabelLogEntry> label_log_;
  std::vector<DirectiveLogEntry> directive_log_;
  Conservation counted_;
  std::vector<Conservation> per_region_;
  InvariantCounters invariants_;
  ReportCounters reports_;
  std::uint64_t handoffs_ = 0;
};

inline RunResult run_showcase(const ScenarioConfig& cfg) { return Simulation(cfg).run(); }

// ---------------------------------------------------------------------------
// Run directory

inline void write_epochs_jsonl(std::ostream& os, const std::vector<twin::EpochRecord>& epochs) {
  for (const auto& e : epochs) os << twin::to_json(e).dump() << '\n';
}

inline nlohmann::ordered_json summary_json(const Summary& s) {
  nlohmann::ordered_json j;
  j["generated"] = s.generated;
  j["completed"] = s.completed;
  j["dropped"] = s.dropped;
  j["median_us"] = s.median_us;
  j["p95_us"] = s.p95_us;
  j["iqr_us"] = s.iqr_us;
  j["p25_us"] = s.p25_us;
  j["p75_us"] = s.p75_us;
  j["drop_rate"] = s.drop_rate;
  nlohmann::ordered_json tiers;
  for (Tier t : kTiers) tiers[std::string(to_string(t))] = s.per_tier[static_cast<std::size_t>(t)];
  j["per_tier"] = tiers;
  return j;
}

// Writes tasks.csv, indices.csv and epochs.jsonl into `dir` (created if needed).
inline void write_run(const std::filesystem::path& dir, const RunResult& r) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream os(dir / "tasks.csv", std::ios::binary);
    write_tasks_csv(os, r.tasks);
  }
  {
    std::ofstream os(dir / "indices.csv", std::ios::binary);
    write_indices_csv(os, r.indices);
  }
  {
    std::ofstream os(dir / "epochs.jsonl", std::ios::binary);
    write_epochs_jsonl(os, r.epochs);
  }
}

}  // namespace dtpop::scenario
