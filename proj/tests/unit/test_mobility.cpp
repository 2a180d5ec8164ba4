#include <gtest/gtest.h>

#include <cmath>

#include "dtpop/errors.hpp"
#include "dtpop/sim/rng.hpp"
#include "dtpop/world/mobility.hpp"

using namespace dtpop;
using namespace dtpop::world;

TEST(Grid, TwoByThreeShowcaseLattice) {
  const auto net = build_grid(2, 3, 1000.0);
  EXPECT_EQ(net.intersections.size(), 6u);
  EXPECT_EQ(net.segments.size(), 7u);
  EXPECT_EQ(net.rsus.size(), 6u);
  EXPECT_TRUE(fully_covered(net));
}

TEST(Grid, DegenerateSingleIntersection) {
  const auto net = build_grid(1, 1, 1000.0);
  EXPECT_EQ(net.intersections.size(), 1u);
  EXPECT_EQ(net.segments.size(), 0u);
}

TEST(Grid, ZeroDimensionsRejected) {
  EXPECT_THROW(build_grid(0, 3, 1000.0), ConfigError);
  EXPECT_THROW(build_grid(2, 0, 1000.0), ConfigError);
}

TEST(Grid, RadiusTooSmallLeavesGap) {
  EXPECT_THROW(build_grid(2, 3, 1000.0, 450.0), ConfigError);
}

TEST(Grid, RsuAdjacencyFollowsSegments) {
  const auto adj = build_grid(2, 3, 1000.0).rsu_adjacency();
  EXPECT_EQ(adj[0], (std::vector<RsuId>{1, 3}));
  EXPECT_EQ(adj[4], (std::vector<RsuId>{1, 3, 5}));
}

TEST(Step, LinearMotion) {
  const auto net = build_grid(2, 3, 1000.0);
  sim::RngStream rng(0, "mobility");
  VehicleState v;
  v.position = {0, 0};
  v.from = 0;
  v.waypoint = 1;
  v.nav_intent = 2;
  v.speed = 10.0;
  const auto out = step_vehicle(v, 0.1, net, rng);
  EXPECT_NEAR(out.position.x, 1.0, 1e-12);
  EXPECT_NEAR(out.position.y, 0.0, 1e-12);
  EXPECT_EQ(out.waypoint, 1u);
}

TEST(Step, ArrivalTurnsOntoPlannedSegment) {
  const auto net = build_grid(2, 3, 1000.0);
  sim::RngStream rng(0, "mobility");
  VehicleState v;
  v.position = {999.5, 0};
  v.from = 0;
  v.waypoint = 1;
  v.nav_intent = 4;  // (1000, 1000)
  v.speed = 10.0;
  const auto out = step_vehicle(v, 0.1, net, rng);
  EXPECT_EQ(out.from, 1u);
  EXPECT_EQ(out.waypoint, 4u);
  EXPECT_NEAR(out.position.x, 1000.0, 1e-9);
  EXPECT_NEAR(out.position.y, 0.5, 1e-9);
  EXPECT_NEAR(out.heading.x, 0.0, 1e-12);
  EXPECT_NEAR(out.heading.y, 1.0, 1e-12);
  const auto& nb = net.neighbors[4];
  EXPECT_NE(std::find(nb.begin(), nb.end(), out.nav_intent), nb.end());
}

TEST(Step, EnergyDrainsPerMetre) {
  const auto net = build_grid(2, 3, 1000.0);
  sim::RngStream rng(0, "mobility");
  VehicleState v;
  v.from = 0;
  v.waypoint = 1;
  v.nav_intent = 2;
  v.speed = 10.0;
  v.energy = 0.5;
  const auto out = step_vehicle(v, 0.1, net, rng, 1e-5);
  EXPECT_NEAR(out.energy, 0.49999, 1e-12);
}

TEST(Step, VehiclesStayOnRoadOverLongWalks) {
  const auto net = build_grid(2, 3, 1000.0);
  sim::RngStream rng(2, "mobility");
  VehicleState v;
  v.from = 0;
  v.waypoint = 1;
  v.nav_intent = 2;
  v.speed = 15.0;
  for (int i = 0; i < 20000; ++i) {
    v = step_vehicle(v, 0.1, net, rng);
    ASSERT_TRUE(on_current_segment(net, v)) << "tick " << i;
    ASSERT_TRUE(net.segment_between(v.from, v.waypoint).has_value());
  }
}

TEST(Coverage, HysteresisKeepsCurrentInsideBand) {
  const auto net = build_grid(1, 2, 1030.0);
  EXPECT_EQ(covering_rsu(net, {550.0, 0.0}, RsuId{0}), RsuId{0});
}

TEST(Coverage, LeavingRadiusForcesSwitch) {
  const auto net = build_grid(1, 2, 1050.0);
  EXPECT_EQ(covering_rsu(net, {650.0, 0.0}, RsuId{0}), RsuId{1});
}

TEST(Coverage, NothingInRange) {
  const auto net = build_grid(1, 1, 1000.0);
  EXPECT_EQ(covering_rsu(net, {5000.0, 0.0}, std::nullopt), std::nullopt);
}

TEST(Coverage, OscillationAroundMidpointSwitchesAtMostOnce) {
  const auto net = build_grid(1, 2, 1000.0);
  std::optional<RsuId> cur = covering_rsu(net, {490.0, 0.0}, std::nullopt);
  int switches = 0;
  for (int i = 0; i < 1000; ++i) {
    const double x = 500.0 + ((i % 2) ? 10.0 : -10.0);
    const auto next = covering_rsu(net, {x, 0.0}, cur);
    if (next != cur) ++switches;
    cur = next;
  }
  EXPECT_LE(switches, 1);
}

TEST(Density, DivisionAndEmpty) {
  EXPECT_DOUBLE_EQ(vehicle_density(3, 4000.0), 0.75);
  EXPECT_DOUBLE_EQ(vehicle_density(0, 4000.0), 0.0);
}

TEST(Density, RegionRoadLengthMatchesSampling) {
  const auto net = build_grid(2, 3, 1000.0);
  EXPECT_NEAR(region_road_length_m(net, 0), 1200.0, 1e-9);
  EXPECT_NEAR(region_road_length_m(net, 1), 1800.0, 1e-9);
  // Independent estimate by walking every segment in 1 cm steps.
  for (RsuId r = 0; r < net.rsus.size(); ++r) {
    double est = 0.0;
    for (std::size_t s = 0; s < net.segments.size(); ++s) {
      const Vec2 a = net.intersections[net.segments[s].a];
      const Vec2 b = net.intersections[net.segments[s].b];
      const int n = 100000;
      for (int k = 0; k < n; ++k) {
        const Vec2 p = a + ((k + 0.5) / n) * (b - a);
        if (distance(p, net.rsu_position(r)) <= 600.0) est += 1000.0 / n;
      }
    }
    EXPECT_NEAR(region_road_length_m(net, r), est, 0.05) << "rsu " << r;
  }
}
