#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "dtpop/errors.hpp"
#include "dtpop/sim/rng.hpp"

namespace dtpop::world {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
  friend bool operator==(Vec2, Vec2) = default;
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double norm(Vec2 a) { return std::sqrt(a.x * a.x + a.y * a.y); }
inline double distance(Vec2 a, Vec2 b) { return norm(a - b); }

using IntersectionId = std::size_t;
using RsuId = std::size_t;

struct Segment {
  IntersectionId a;
  IntersectionId b;
};

struct Rsu {
  IntersectionId site;
  double radius_m;
};

struct RoadNetwork {
  std::vector<Vec2> intersections;
  std::vector<Segment> segments;
  std::vector<Rsu> rsus;
  std::vector<std::vector<IntersectionId>> neighbors;  // per intersection, ascending

  Vec2 rsu_position(RsuId r) const { return intersections[rsus[r].site]; }

  double segment_length(std::size_t s) const {
    return distance(intersections[segments[s].a], intersections[segments[s].b]);
  }

  std::optional<std::size_t> segment_between(IntersectionId u, IntersectionId v) const {
    for (std::size_t s = 0; s < segments.size(); ++s) {
      const auto& seg = segments[s];
      if ((seg.a == u && seg.b == v) || (seg.a == v && seg.b == u)) return s;
    }
    return std::nullopt;
  }

  // RSUs whose sites share a road segment. Symmetric, ascending.
  std::vector<std::vector<RsuId>> rsu_adjacency() const {
    std::vector<std::vector<RsuId>> adj(rsus.size());
    for (RsuId i = 0; i < rsus.size(); ++i) {
      for (RsuId j = 0; j < rsus.size(); ++j) {
        if (i != j && segment_between(rsus[i].site, rsus[j].site)) adj[i].push_back(j);
      }
    }
    return adj;
  }
};

inline void rebuild_neighbors(RoadNetwork& net) {
  net.neighbors.assign(net.intersections.size(), {});
  for (const auto& seg : net.segments) {
    if (seg.a >= net.intersections.size() || seg.b >= net.intersections.size() || seg.a == seg.b) {
      throw ConfigError("segments", "segment references an invalid intersection");
    }
    net.neighbors[seg.a].push_back(seg.b);
    net.neighbors[seg.b].push_back(seg.a);
  }
  for (auto& n : net.neighbors) std::sort(n.begin(), n.end());
}

inline bool point_covered(const RoadNetwork& net, Vec2 p) {
  return std::any_of(net.rsus.begin(), net.rsus.end(), [&](const Rsu& r) {
    return distance(p, net.intersections[r.site]) <= r.radius_m;
  });
}

// True when every road point, sampled at `step_m` or finer, lies inside some RSU radius.
inline bool fully_covered(const RoadNetwork& net, double step_m = 1.0) {
  for (const auto& p : net.intersections) {
    if (!point_covered(net, p)) return false;
  }
  for (std::size_t s = 0; s < net.segments.size(); ++s) {
    const Vec2 a = net.intersections[net.segments[s].a];
    const Vec2 b = net.intersections[net.segments[s].b];
    const auto n = static_cast<std::size_t>(std::ceil(net.segment_length(s) / step_m));
    for (std::size_t k = 0; k <= n; ++k) {
      const double t = n == 0 ? 0.0 : static_cast<double>(k) / static_cast<double>(n);
      if (!point_covered(net, a + t * (b - a))) return false;
    }
  }
  return true;
}

/**
 * rows x cols lattice with 4-neighbour segments and one RSU per intersection.
 * Intersection id = row * cols + col, positioned at (col, row) * spacing.
 */
inline RoadNetwork build_grid(int rows, int cols, double spacing_m, double radius_m = 600.0,
                              bool require_full_coverage = true) {
  if (rows < 1 || cols < 1) throw ConfigError("grid", "rows and cols must be >= 1");
  if (!(spacing_m > 0.0)) throw ConfigError("grid.spacing_m", "spacing must be > 0");
  if (!(radius_m > 0.0)) throw ConfigError("grid.radius_m", "radius must be > 0");
  RoadNetwork net;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      net.intersections.push_back({c * spacing_m, r * spacing_m});
    }
  }
  auto id = [cols](int r, int c) { return static_cast<IntersectionId>(r * cols + c); };
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      if (c + 1 < cols) net.segments.push_back({id(r, c), id(r, c + 1)});
      if (r + 1 < rows) net.segments.push_back({id(r, c), id(r + 1, c)});
    }
  }
  for (IntersectionId i = 0; i < net.intersections.size(); ++i) net.rsus.push_back({i, radius_m});
  rebuild_neighbors(net);
  if (require_full_coverage && !fully_covered(net)) {
    throw ConfigError("grid.radius_m", "RSU radius leaves road points uncovered");
  }
  return net;
}

struct VehicleState {
  std::uint32_t id = 0;
  Vec2 position;
  double speed = 0.0;  // m/s
  Vec2 heading{1.0, 0.0};
  IntersectionId from = 0;      // start of the current segment
  IntersectionId waypoint = 0;  // end of the current segment
  double energy = 1.0;
  IntersectionId nav_intent = 0;  // intersection planned after the waypoint
};

inline Vec2 unit_towards(Vec2 from, Vec2 to, Vec2 fallback) {
  const Vec2 d = to - from;
  const double n = norm(d);
  return n > 0.0 ? (1.0 / n) * d : fallback;
}

inline IntersectionId draw_neighbor(const RoadNetwork& net, IntersectionId at, sim::RngStream& rng) {
  const auto& n = net.neighbors[at];
  if (n.empty()) return at;
  return n[rng.uniform_index(n.size())];
}

/**
 * Advances a vehicle by speed * dt along its segment. On reaching the
 * waypoint the planned nav_intent becomes the new waypoint, a fresh intent is
 * drawn uniformly among the neighbours of that waypoint, and any leftover
 * travel continues along the new segment.
 */
inline VehicleState step_vehicle(const VehicleState& v, double dt, const RoadNetwork& net,
                                 sim::RngStream& rng, double drain_per_m = 1e-5) {
  VehicleState out = v;
  double budget = v.speed * dt;
  double moved = 0.0;
  // Bounded: each iteration either consumes the budget or crosses one segment.
  for (int guard = 0; guard < 64 && budget > 0.0; ++guard) {
    const Vec2 target = net.intersections[out.waypoint];
    const double remaining = distance(out.position, target);
    if (out.waypoint == out.from && remaining == 0.0) break;  // isolated intersection
    if (budget < remaining) {
      out.heading = unit_towards(out.position, target, out.heading);
      out.position = out.position + budget * out.heading;
      moved += budget;
      budget = 0.0;
      break;
    }
    out.position = target;
    moved += remaining;
    budget -= remaining;
    out.from = out.waypoint;
    out.waypoint = out.nav_intent;
    out.nav_intent = draw_neighbor(net, out.waypoint, rng);
    out.heading = unit_towards(out.position, net.intersections[out.waypoint], out.heading);
  }
  out.energy = std::clamp(v.energy - drain_per_m * moved, 0.0, 1.0);
  return out;
}

// Distance from p to segment ab.
inline double distance_to_segment(Vec2 p, Vec2 a, Vec2 b) {
  const Vec2 ab = b - a;
  const double len2 = dot(ab, ab);
  if (len2 == 0.0) return distance(p, a);
  const double t = std::clamp(dot(p - a, ab) / len2, 0.0, 1.0);
  return distance(p, a + t * ab);
}

inline bool on_current_segment(const RoadNetwork& net, const VehicleState& v, double tol = 1e-6) {
  return distance_to_segment(v.position, net.intersections[v.from], net.intersections[v.waypoint]) <=
         tol;
}

/**
 * Serving RSU with hysteresis. The current RSU is kept while it still covers
 * the position and no other covering RSU is closer by more than
 * `hysteresis_m`; otherwise the nearest covering RSU (lowest id on ties).
 */
inline std::optional<RsuId> covering_rsu(const RoadNetwork& net, Vec2 position,
                                         std::optional<RsuId> current, double hysteresis_m = 100.0) {
  std::optional<RsuId> nearest;
  double best = 0.0;
  for (RsuId r = 0; r < net.rsus.size(); ++r) {
    const double d = distance(position, net.rsu_position(r));
    if (d > net.rsus[r].radius_m) continue;
    if (!nearest || d < best) {
      nearest = r;
      best = d;
    }
  }
  if (current && *current < net.rsus.size()) {
    const double d_cur = distance(position, net.rsu_position(*current));
    if (d_cur <= net.rsus[*current].radius_m && !(d_cur - best > hysteresis_m)) return current;
  }
  return nearest;
}

// Length of road inside the RSU's coverage disc.
inline double region_road_length_m(const RoadNetwork& net, RsuId r) {
  const Vec2 c = net.rsu_position(r);
  const double rad = net.rsus[r].radius_m;
  double total = 0.0;
  for (const auto& seg : net.segments) {
    const Vec2 a = net.intersections[seg.a];
    const Vec2 d = net.intersections[seg.b] - a;
    const double len = norm(d);
    if (len == 0.0) continue;
    // |a + t d - c|^2 = rad^2, t in [0,1]
    const Vec2 f = a - c;
    const double qa = dot(d, d);
    const double qb = 2.0 * dot(f, d);
    const double qc = dot(f, f) - rad * rad;
    const double disc = qb * qb - 4.0 * qa * qc;
    if (disc <= 0.0) continue;
    const double sq = std::sqrt(disc);
    const double t0 = std::max(0.0, (-qb - sq) / (2.0 * qa));
    const double t1 = std::min(1.0, (-qb + sq) / (2.0 * qa));
    if (t1 > t0) total += (t1 - t0) * len;
  }
  return total;
}

// Vehicles per km of road.
inline double vehicle_density(std::size_t vehicles, double road_length_m) {
  if (!(road_length_m > 0.0)) throw ConfigError("region", "road length must be > 0");
  return static_cast<double>(vehicles) / (road_length_m / 1000.0);
}

// Density of the given member positions over the RSU's region road.
inline double vehicle_density(const RoadNetwork& net, RsuId r, std::span<const Vec2> members) {
  return vehicle_density(members.size(), region_road_length_m(net, r));
}

}  // namespace dtpop::world
