#include <gtest/gtest.h>

#include <numeric>
#include <vector>

#include "dtpop/errors.hpp"
#include "dtpop/sim/network.hpp"
#include "dtpop/sim/rng.hpp"
#include "dtpop/twin/edge_twin.hpp"

using namespace dtpop;
using namespace dtpop::twin;
using sim::at_us;

namespace {

StatusReport report(DeviceId id, double speed, Vec2 pos = {}, std::int64_t t_end = 1'000'000) {
  StatusReport r;
  r.device_id = id;
  r.features.mean_speed = speed;
  r.features.position_last = pos;
  r.features.t_end = at_us(t_end);
  return r;
}

// Independent largest-remainder rounding for quotas given in thousandths.
std::array<std::size_t, 3> seats_oracle(const std::array<std::uint64_t, 3>& milli, std::size_t n) {
  std::array<std::size_t, 3> seats{};
  std::array<std::uint64_t, 3> rem{};
  std::size_t used = 0;
  for (int i = 0; i < 3; ++i) {
    seats[i] = milli[i] * n / 1000;
    rem[i] = milli[i] * n % 1000;
    used += seats[i];
  }
  while (used < n) {
    int best = 0;
    for (int i = 1; i < 3; ++i) {
      if (rem[i] > rem[best]) best = i;
    }
    ++seats[best];
    rem[best] = 0;
    ++used;
  }
  return seats;
}

}  // namespace

TEST(RoleSeats, ExactProportions) {
  EXPECT_EQ(role_seats({0.5, 0.3, 0.2}, 10), (std::array<std::size_t, 3>{5, 3, 2}));
}

TEST(RoleSeats, TieGoesToFirstListedRole) {
  EXPECT_EQ(role_seats({0.5, 0.3, 0.2}, 5), (std::array<std::size_t, 3>{3, 1, 1}));
}

TEST(RoleSeats, EmptyPopulation) {
  EXPECT_EQ(role_seats({0.5, 0.3, 0.2}, 0), (std::array<std::size_t, 3>{0, 0, 0}));
  std::vector<Member> none;
  EXPECT_TRUE(assign_roles(none, {0.5, 0.3, 0.2}).empty());
}

TEST(RoleSeats, MatchesIntegerOracleAcrossSizes) {
  sim::RngStream rng(8, "quotas");
  for (int trial = 0; trial < 50; ++trial) {
    std::array<std::uint64_t, 3> milli{};
    milli[0] = rng.uniform_index(1001);
    milli[1] = rng.uniform_index(1001 - milli[0]);
    milli[2] = 1000 - milli[0] - milli[1];
    const RoleQuotas q{milli[0] / 1000.0, milli[1] / 1000.0, milli[2] / 1000.0};
    for (std::size_t n = 0; n <= 1000; ++n) {
      const auto got = role_seats(q, n);
      ASSERT_EQ(got, seats_oracle(milli, n)) << "n=" << n << " q=" << milli[0] << "," << milli[1];
      ASSERT_EQ(got[0] + got[1] + got[2], n);
    }
  }
}

TEST(AssignRoles, GreedyCriteria) {
  std::vector<Member> m(4);
  for (DeviceId i = 0; i < 4; ++i) m[i].id = i;
  m[2].channel_quality = 0.9;  // best link
  m[0].backlog_cu = 5.0;       // busy
  m[3].backlog_cu = 0.0;
  m[1].backlog_cu = 1.0;
  m[0].joined = at_us(0);
  m[1].joined = at_us(10);
  const auto roles = assign_roles(m, {0.25, 0.5, 0.25});
  EXPECT_EQ(roles.at(2), Role::Acquisition);
  EXPECT_EQ(roles.at(3), Role::Processing);
  EXPECT_EQ(roles.at(1), Role::Processing);
  EXPECT_EQ(roles.at(0), Role::Coordination);
}

TEST(AssignRoles, QuotasMustSumToOne) {
  std::vector<Member> m(2);
  m[1].id = 1;
  EXPECT_THROW(assign_roles(m, {0.5, 0.5, 0.5}), std::invalid_argument);
}

TEST(Population, DuplicateAdmitIsInvariantViolation) {
  Population p(0);
  p.admit(1, at_us(0));
  EXPECT_THROW(p.admit(1, at_us(1)), InvariantViolation);
  EXPECT_TRUE(p.release(1));
  EXPECT_FALSE(p.release(1));
}

TEST(Population, HandoverReleasesAndAdmits) {
  Population a(0), b(1);
  a.admit(7, at_us(0));
  a.release(7);
  b.admit(7, at_us(1'000'000));
  EXPECT_FALSE(a.contains(7));
  EXPECT_TRUE(b.contains(7));
}

TEST(Fusion, SlowTrafficIsCongestion) {
  std::vector<StatusReport> r{report(1, 4), report(2, 5), report(3, 6)};
  const auto st = fuse_region(r, at_us(0), at_us(5'000'000), 2500.0, 1000.0, FusionThresholds{});
  EXPECT_DOUBLE_EQ(st.mean_speed, 5.0);
  EXPECT_TRUE(st.labels.contains(EventLabel::Congestion));
}

TEST(Fusion, HighUtilizationIsOverload) {
  EXPECT_DOUBLE_EQ(utilization(4500.0, 1000.0, 5.0), 0.9);
  std::vector<StatusReport> r{report(1, 10)};
  const auto st = fuse_region(r, at_us(0), at_us(5'000'000), 4500.0, 1000.0, FusionThresholds{});
  EXPECT_EQ(st.labels, (LabelSet{EventLabel::Overload}));
}

TEST(Fusion, NormalBetweenThresholds) {
  EXPECT_EQ(event_labels(10.0, 0.6, FusionThresholds{}), (LabelSet{EventLabel::Normal}));
  EXPECT_EQ(event_labels(10.0, 0.2, FusionThresholds{}), (LabelSet{EventLabel::Underload}));
}

TEST(Fusion, NoReportsCarriesForwardAsNormal) {
  std::vector<StatusReport> r{report(1, 4)};
  const auto first = fuse_region(r, at_us(0), at_us(5'000'000), 0.0, 1000.0, FusionThresholds{});
  std::vector<StatusReport> none;
  const auto next = fuse_region(none, at_us(5'000'000), at_us(10'000'000), 0.0, 1000.0, FusionThresholds{}, nullptr,
                                {}, &first);
  EXPECT_DOUBLE_EQ(next.mean_speed, 4.0);
  EXPECT_EQ(next.labels, (LabelSet{EventLabel::Normal}));
}

TEST(Fusion, DensityPerSegmentAndRegion) {
  const auto net = world::build_grid(2, 3, 1000.0);
  // Two devices on segment 0 (0-1), one on the vertical 0-3; device 1 reports twice.
  std::vector<StatusReport> r{report(1, 10, {900, 0}, 1), report(1, 10, {100, 0}, 2), report(2, 10, {200, 0}),
                              report(3, 10, {0, 300})};
  const auto st = fuse_region(r, at_us(0), at_us(5'000'000), 0.0, 1000.0, FusionThresholds{}, &net, world::RsuId{0});
  const auto s01 = *net.segment_between(0, 1);
  const auto s03 = *net.segment_between(0, 3);
  EXPECT_DOUBLE_EQ(st.density_per_segment.at(s01), 2.0);
  EXPECT_DOUBLE_EQ(st.density_per_segment.at(s03), 1.0);
  EXPECT_NEAR(st.density, 3.0 / 1.2, 1e-9);
}

TEST(Thinner, ThirtyPercentOfTenIsThree) {
  OffloadThinner t(0.3);
  int fwd = 0;
  for (int i = 0; i < 10; ++i) fwd += t.next();
  EXPECT_EQ(fwd, 3);
}

TEST(Thinner, PrefixCountsAreExact) {
  sim::RngStream rng(6, "thin");
  for (int trial = 0; trial < 100; ++trial) {
    const std::int64_t ppm = static_cast<std::int64_t>(rng.uniform_index(1'000'001));
    OffloadThinner t(static_cast<double>(ppm) / 1e6);
    std::int64_t fwd = 0;
    for (std::int64_t k = 1; k <= 2000; ++k) {
      fwd += t.next();
      ASSERT_EQ(fwd, ppm * k / 1'000'000) << "ppm " << ppm << " k " << k;
    }
  }
}

TEST(Schedule, EdgeRules) {
  OffloadThinner t(1.0);
  EdgeContext ctx;
  EXPECT_EQ(schedule_task(ctx, t), EdgeDecision::Serve);
  ctx.backlog_s = 6.0;
  EXPECT_EQ(schedule_task(ctx, t), EdgeDecision::ForwardCloud);
  ctx.overloaded = ctx.directive_active = true;
  EXPECT_EQ(schedule_task(ctx, t), EdgeDecision::ForwardPartner);
  ctx.compute_enabled = false;
  EXPECT_EQ(schedule_task(ctx, t), EdgeDecision::ForwardCloud);
}

TEST(Schedule, EmptyQueueHandTrace) {
  // 5 CU at 1000 CU/s plus a 2000 B request up and a 1000 B response down on V2R.
  sim::FifoServer s(1000.0);
  sim::LinkSpec l;
  l.base_latency = sim::millis(5);
  l.bandwidth_bps = 1e7;
  const auto up = sim::link_latency(l, 2000);
  const auto slot = s.enqueue(sim::kTimeZero + up, 5.0);
  const auto done = slot.finish + sim::link_latency(l, 1000);
  EXPECT_EQ(sim::to_us(slot.finish - slot.start), 5000);
  EXPECT_EQ(sim::to_us(done), 5200 + 5000 + 5100);
}

TEST(Trend, OlsSlopes) {
  const std::vector<double> rising{0.5, 0.6, 0.7};
  EXPECT_NEAR(ols_slope(rising), 0.1, 1e-12);
  const std::vector<double> one{0.5};
  EXPECT_DOUBLE_EQ(ols_slope(one), 0.0);
}

TEST(Uplink, TrendsUseLastSixWindows) {
  RegionalState st;
  std::vector<WindowValues> h;
  for (int i = 0; i < 9; ++i) h.push_back({i < 3 ? 0.9 : 0.1 * (i - 3), 10.0});
  const auto p = build_uplink(2, st, h, {});
  EXPECT_NEAR(p.trend_utilization, 0.1, 1e-12);
  EXPECT_DOUBLE_EQ(p.trend_speed, 0.0);
}

TEST(Uplink, WireRoundTrip) {
  UplinkPackage p;
  p.rsu_id = 3;
  p.t0_us = 0;
  p.t1_us = 5'000'000;
  p.labels = {EventLabel::Overload, EventLabel::Congestion};
  p.mean_speed = 5.5;
  p.density_map = {{2, 10.0}};
  p.utilization = 0.9;
  p.trend_utilization = 0.01;
  p.autonomy.completed = 10;
  p.autonomy.edge = 8;
  p.autonomy.median_rt_us = 15300;
  p.autonomy.policy_version = 2;
  const std::string wire = to_json(p).dump();
  const auto back = parse_uplink(wire);
  ASSERT_TRUE(back.has_value());
  EXPECT_EQ(to_json(*back).dump(), wire);
  EXPECT_LT(wire.find("Congestion"), wire.find("Overload"));
}

TEST(Uplink, MalformedRejected) {
  EXPECT_FALSE(parse_uplink(std::string("{not json")).has_value());
  EXPECT_FALSE(parse_uplink(std::string(R"({"rsu_id": 1})")).has_value());
}

TEST(Localize, PassThroughWithoutCongestion) {
  PolicyBlueprint bp;
  bp.params.local_serve_threshold = 3.0;
  const auto lp = localize_policy(bp, {EventLabel::Normal}, 0);
  ASSERT_TRUE(lp.has_value());
  EXPECT_DOUBLE_EQ(lp->params.local_serve_threshold, 3.0);
  EXPECT_EQ(lp->params.role_quotas, (RoleQuotas{0.5, 0.3, 0.2}));
}

TEST(Localize, ThresholdClamped) {
  PolicyBlueprint bp;
  bp.params.local_serve_threshold = 12.0;
  EXPECT_DOUBLE_EQ(localize_policy(bp, {}, 0)->params.local_serve_threshold, 10.0);
}

TEST(Localize, CongestionShiftsQuota) {
  PolicyBlueprint bp;
  const auto q = localize_policy(bp, {EventLabel::Congestion}, 0)->params.role_quotas;
  EXPECT_NEAR(q[0], 0.6, 1e-12);
  EXPECT_NEAR(q[1], 0.3, 1e-12);
  EXPECT_NEAR(q[2], 0.1, 1e-12);
}

TEST(Localize, WrongTargetOrBadQuotasRejected) {
  PolicyBlueprint bp;
  bp.target = 4;
  EXPECT_FALSE(localize_policy(bp, {}, 0).has_value());
  bp.target.reset();
  bp.params.role_quotas = {-0.1, 0.6, 0.5};
  EXPECT_FALSE(localize_policy(bp, {}, 0).has_value());
}

TEST(EdgeTwin, MalformedBlueprintKeepsPolicy) {
  EdgeTwin e(0, 1000.0);
  PolicyBlueprint bp;
  bp.target = 0;
  bp.params.local_serve_threshold = 4.0;
  ASSERT_TRUE(e.receive_blueprint(to_json(bp).dump()));
  ASSERT_TRUE(e.apply_pending(at_us(5'000'000)));
  EXPECT_FALSE(e.receive_blueprint("{\"target\": 0, \"epoch\": \"x\"}"));
  EXPECT_FALSE(e.apply_pending(at_us(10'000'000)));
  EXPECT_DOUBLE_EQ(e.policy()->params.local_serve_threshold, 4.0);
  EXPECT_EQ(e.rejected_blueprints(), 1u);
  EXPECT_EQ(e.policy_history().size(), 1u);
}

TEST(EdgeTwin, ComputeDisabledUntilPolicy) {
  EdgeTwin e(0, 1000.0);
  EXPECT_EQ(e.on_task(at_us(0), 5.0), EdgeDecision::ForwardCloud);
  e.set_policy(LocalPolicy{}, at_us(0));
  EXPECT_EQ(e.on_task(at_us(0), 5.0), EdgeDecision::Serve);
  e.set_cloud_only(true);
  EXPECT_EQ(e.on_task(at_us(0), 5.0), EdgeDecision::ForwardCloud);
}

TEST(EdgeTwin, UplinkCarriesWindowStats) {
  EdgeTwin e(1, 1000.0);
  e.set_policy(LocalPolicy{{}, 3, "rsu1/e3"}, at_us(0));
  const auto net = world::build_grid(2, 3, 1000.0);
  e.close_window(at_us(0), at_us(5'000'000), FusionThresholds{}, net);
  e.record_completion(EdgeTwin::Tier::Edge, 10);
  e.record_completion(EdgeTwin::Tier::Cloud, 30);
  e.record_completion(EdgeTwin::Tier::Local, 20);
  const auto p = e.make_uplink();
  EXPECT_EQ(p.autonomy.completed, 3u);
  EXPECT_EQ(p.autonomy.median_rt_us, 20);
  EXPECT_EQ(p.autonomy.policy_version, 3);
  EXPECT_NEAR(p.autonomy.autonomy(), 2.0 / 3.0, 1e-12);
  EXPECT_EQ(e.make_uplink().autonomy.completed, 0u);
}
