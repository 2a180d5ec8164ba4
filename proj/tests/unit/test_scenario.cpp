#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "dtpop/dtpop.hpp"
#include "support/scenarios.hpp"

using namespace dtpop;
using namespace dtpop::scenario;
namespace fs = std::filesystem;

namespace {

std::string config_error_field(const std::string& text) {
  try {
    parse_scenario_text(text);
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "<none>";
}

TaskRecord done(std::int64_t created, std::int64_t completed, Tier tier) {
  TaskRecord r;
  r.created_us = created;
  r.completed_us = completed;
  r.tier = tier;
  return r;
}

std::string csv_bytes(const RunResult& r) {
  std::ostringstream os;
  write_tasks_csv(os, r.tasks);
  write_indices_csv(os, r.indices);
  write_epochs_jsonl(os, r.epochs);
  return os.str();
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("dtpop_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(DTPOP_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration

TEST(Config, EmptyFileGivesShowcaseDefaults) {
  const auto c = parse_scenario_text("");
  EXPECT_EQ(c.rsu_count(), 6u);
  EXPECT_EQ(c.vehicle_count(), 1200u);
  EXPECT_EQ(c.mode, Mode::Layered);
  EXPECT_DOUBLE_EQ(c.duration_s, 300.0);
  EXPECT_EQ(parse_scenario_text("  \n").vehicle_count(), 1200u);
}

TEST(Config, VehiclesPerRsuTimesGrid) {
  const auto c = parse_scenario_text(R"({"vehicles_per_rsu": 200, "grid": {"rows": 2, "cols": 3}})");
  EXPECT_EQ(c.vehicle_count(), 1200u);
}

TEST(Config, ErrorsNameTheField) {
  EXPECT_EQ(config_error_field(R"({"links": {"v2r": {"loss_prob": 1.5}}})"), "links.v2r.loss_prob");
  EXPECT_EQ(config_error_field(R"({"grid": {"rows": 0}})"), "grid.rows");
  EXPECT_EQ(config_error_field(R"({"no_such_key": 1})"), "no_such_key");
  EXPECT_EQ(config_error_field(R"({"periods": {"fusion_s": "five"}})"), "periods.fusion_s");
  EXPECT_EQ(config_error_field(R"({"mode": "edge_only"})"), "mode");
  EXPECT_EQ(config_error_field(R"({"duration_s": 20})"), "duration_s");
  EXPECT_EQ(config_error_field("{oops"), "<file>");
}

TEST(Config, ModeNames) {
  EXPECT_EQ(parse_mode("cloud_only"), Mode::CloudOnly);
  EXPECT_EQ(to_string(Mode::Layered), "layered");
  EXPECT_THROW(parse_mode("hybrid"), ConfigError);
}

TEST(Config, HotspotBlockParsed) {
  const auto c = parse_scenario_text(R"({"hotspot": {"region": 2, "rate_multiplier": 3.0}})");
  ASSERT_TRUE(c.hotspot.has_value());
  EXPECT_EQ(c.hotspot->region, 2u);
  EXPECT_DOUBLE_EQ(c.hotspot->rate_multiplier, 3.0);
  EXPECT_EQ(config_error_field(R"({"hotspot": {"region": 9}})"), "hotspot.region");
}

// ---------------------------------------------------------------------------
// Metrics

TEST(Summary, EvenCountMedianAndNearestRank) {
  std::vector<TaskRecord> r;
  for (int ms : {10, 20, 30, 40}) r.push_back(done(0, ms * 1000, Tier::Edge));
  const auto s = summarize(r);
  EXPECT_DOUBLE_EQ(s.median_us, 25'000.0);
  EXPECT_EQ(s.p95_us, 40'000);
  EXPECT_EQ(s.p25_us, 10'000);
  EXPECT_EQ(s.p75_us, 30'000);
}

TEST(Summary, SingleRecord) {
  std::vector<TaskRecord> r{done(0, 7000, Tier::Local)};
  const auto s = summarize(r);
  EXPECT_DOUBLE_EQ(s.median_us, 7000.0);
  EXPECT_EQ(s.p95_us, 7000);
  EXPECT_EQ(s.iqr_us, 0);
}

TEST(Summary, DropsCountedAndExcluded) {
  std::vector<TaskRecord> r{done(0, 7000, Tier::Local)};
  TaskRecord lost;
  lost.dropped = true;
  r.push_back(lost);
  const auto s = summarize(r);
  EXPECT_EQ(s.generated, 2u);
  EXPECT_EQ(s.dropped, 1u);
  EXPECT_DOUBLE_EQ(s.drop_rate, 0.5);
  std::vector<TaskRecord> none{lost};
  EXPECT_THROW(summarize(none), std::invalid_argument);
}

TEST(Summary, QuantilesMatchSortOracle) {
  sim::RngStream rng(21, "quantiles");
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng.uniform_index(300);
    std::vector<TaskRecord> r;
    std::vector<std::int64_t> rts;
    for (std::size_t i = 0; i < n; ++i) {
      const auto rt = static_cast<std::int64_t>(rng.uniform_index(100'000));
      rts.push_back(rt);
      r.push_back(done(0, rt, Tier::Edge));
    }
    std::sort(rts.begin(), rts.end());
    // nearest rank: smallest value with at least q*n values at or below it
    auto rank = [&](double q) {
      for (std::size_t k = 1; k <= n; ++k) {
        if (static_cast<double>(k) >= q * static_cast<double>(n) - 1e-9) return rts[k - 1];
      }
      return rts.back();
    };
    const auto s = summarize(r);
    const double med = n % 2 ? rts[n / 2] : (rts[n / 2 - 1] + rts[n / 2]) / 2.0;
    ASSERT_DOUBLE_EQ(s.median_us, med);
    ASSERT_EQ(s.p95_us, rank(0.95));
    ASSERT_EQ(s.iqr_us, rank(0.75) - rank(0.25));
  }
}

TEST(Indices, AutonomyRatioAndCarryForward) {
  std::vector<TaskRecord> r;
  for (int i = 0; i < 8; ++i) r.push_back(done(0, 1000 + i, i < 4 ? Tier::Local : Tier::Edge));
  for (int i = 0; i < 2; ++i) r.push_back(done(0, 2000 + i, Tier::Cloud));
  for (int i = 0; i < 3; ++i) r.push_back(done(0, 20'000 + i, i < 2 ? Tier::PartnerEdge : Tier::Cloud));
  const auto a = autonomy_index(r, 10'000, 40'000);
  ASSERT_EQ(a.size(), 4u);
  EXPECT_DOUBLE_EQ(a[0], 0.8);
  EXPECT_DOUBLE_EQ(a[1], 0.8);  // empty window
  EXPECT_NEAR(a[2], 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(a[3], 2.0 / 3.0, 1e-12);
}

TEST(Indices, LeadingEmptyWindowIsZero) {
  std::vector<TaskRecord> r{done(0, 25'000, Tier::Edge)};
  const auto a = autonomy_index(r, 10'000, 30'000);
  EXPECT_EQ(a, (std::vector<double>{0.0, 0.0, 1.0}));
}

TEST(Indices, CoordinationRatioAndVacuousWindows) {
  std::vector<TaskRecord> r;
  for (int i = 0; i < 20; ++i) {
    auto t = done(0, 5000, i < 6 ? Tier::PartnerEdge : Tier::Edge);
    t.overload_arrival_us = 1000;
    r.push_back(t);
  }
  const auto c = coordination_index(r, 10'000, 20'000);
  EXPECT_DOUBLE_EQ(c[0], 0.3);
  EXPECT_DOUBLE_EQ(c[1], 1.0);
}

TEST(Indices, SeriesWindowEnds) {
  std::vector<TaskRecord> r{done(0, 1, Tier::Edge)};
  const auto s = index_series(r, 10'000, 25'000);
  ASSERT_EQ(s.size(), 3u);
  EXPECT_EQ(s[2].window_end_us, 25'000);
}

TEST(Csv, TasksRoundTrip) {
  std::vector<TaskRecord> r;
  auto a = done(100, 15'400, Tier::Edge);
  a.task_id = 0;
  a.origin = 3;
  TaskRecord b;
  b.task_id = 1;
  b.origin = 4;
  b.created_us = 200;
  b.dropped = true;
  TaskRecord c;
  c.task_id = 2;
  c.created_us = 300;
  r = {a, b, c};
  std::stringstream ss;
  write_tasks_csv(ss, r);
  const auto back = read_tasks_csv(ss);
  ASSERT_EQ(back.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(back[i].task_id, r[i].task_id);
    EXPECT_EQ(back[i].origin, r[i].origin);
    EXPECT_EQ(back[i].created_us, r[i].created_us);
    EXPECT_EQ(back[i].completed_us, r[i].completed_us);
    EXPECT_EQ(back[i].tier, r[i].tier);
    EXPECT_EQ(back[i].dropped, r[i].dropped);
  }
  std::stringstream again;
  write_tasks_csv(again, back);
  std::stringstream orig;
  write_tasks_csv(orig, r);
  EXPECT_EQ(again.str(), orig.str());
}

TEST(Csv, MalformedLineRejected) {
  std::stringstream ss("task_id,origin,created_us,completed_us,tier,rt_us,dropped\n1,2,x\n");
  EXPECT_THROW(read_tasks_csv(ss), std::exception);
}

// ---------------------------------------------------------------------------
// Whole runs

TEST(Showcase, HandTraceInMicroScenario) {
  Simulation sim(dtpop::testing::micro_config());
  sim.inject_task(0, sim::at_us(20'000'000), 5.0);
  const auto r = sim.run();
  ASSERT_EQ(r.tasks.size(), 1u);
  ASSERT_TRUE(r.tasks[0].completed());
  EXPECT_EQ(r.tasks[0].tier, Tier::Edge);
  EXPECT_EQ(r.tasks[0].rt_us(), 5200 + 5000 + 5100);
}

TEST(Showcase, MicroScenarioReportCadence) {
  const auto r = run_showcase(dtpop::testing::micro_config());
  // Parked vehicles: one periodic report per second each, no handovers.
  EXPECT_EQ(r.reports.periodic, 2u * 40u);
  EXPECT_EQ(r.reports.handover_triggers, 0u);
}

TEST(Showcase, DefaultRunStructure) {
  const auto r = run_showcase(ScenarioConfig{});
  const double expected = 0.2 * 1200 * 300;
  EXPECT_NEAR(static_cast<double>(r.tasks.size()), expected, 0.05 * expected);
  EXPECT_TRUE(r.counted.balanced());
  EXPECT_EQ(r.invariants.off_road, 0u);
  EXPECT_EQ(r.invariants.partition, 0u);
  EXPECT_EQ(r.invariants.double_settlement, 0u);
  EXPECT_EQ(r.indices.size(), 30u);
  // Policies change only at fusion-window boundaries.
  for (const auto& hist : r.policy_history) {
    ASSERT_FALSE(hist.empty());
    for (const auto& [t, _] : hist) EXPECT_EQ(sim::to_us(t) % 5'000'000, 0);
  }
  // Epoch records every 30 s for every region.
  std::map<std::size_t, int> per_region;
  for (const auto& e : r.epochs) ++per_region[e.region];
  EXPECT_EQ(per_region.size(), 6u);
  for (auto [_, n] : per_region) EXPECT_EQ(n, 9);
}

TEST(Showcase, UplinkCadenceTwelvePerMinute) {
  auto c = dtpop::testing::small_config(0, 65.0);
  const auto r = run_showcase(c);
  std::map<std::size_t, int> per_rsu;
  for (const auto& e : r.label_log) {
    if (e.t_us <= 61'000'000) ++per_rsu[e.rsu];
  }
  ASSERT_EQ(per_rsu.size(), 6u);
  for (auto [_, n] : per_rsu) EXPECT_EQ(n, 12);
}

TEST(Showcase, InitialMembershipNearTwoHundred) {
  auto c = ScenarioConfig{};
  c.duration_s = 31.0;
  c.workload.rate_per_vehicle = 0.0;
  Simulation sim(c);
  sim.run();
  std::size_t total = 0;
  for (const auto& e : sim.edges()) {
    EXPECT_GT(e.population().size(), 150u);
    EXPECT_LT(e.population().size(), 250u);
    total += e.population().size();
  }
  EXPECT_LE(total, 1200u);
}

TEST(Showcase, DenseRegionFlagged) {
  auto c = ScenarioConfig{};
  c.duration_s = 31.0;
  c.workload.rate_per_vehicle = 0.0;
  Simulation sim(c);
  sim.run();
  // Corner regions hold ~200 vehicles over 1.2 km of road.
  EXPECT_GT(sim.edges()[0].state().density, 100.0);
}

TEST(Showcase, CloudOnlyServesEverythingInCloud) {
  auto c = dtpop::testing::small_config(1, 60.0);
  c.mode = Mode::CloudOnly;
  const auto r = run_showcase(c);
  std::size_t completed = 0;
  for (const auto& t : r.tasks) {
    if (!t.completed()) continue;
    ++completed;
    ASSERT_EQ(*t.tier, Tier::Cloud);
  }
  EXPECT_GT(completed, 1000u);
  for (const auto& p : r.indices) EXPECT_DOUBLE_EQ(p.autonomy, 0.0);
  EXPECT_TRUE(r.epochs.empty());
}

TEST(Showcase, SameSeedSameBytes) {
  const auto a = run_showcase(dtpop::testing::small_config(3, 60.0));
  const auto b = run_showcase(dtpop::testing::small_config(3, 60.0));
  EXPECT_EQ(a.events_processed, b.events_processed);
  EXPECT_EQ(csv_bytes(a), csv_bytes(b));
  const auto other = run_showcase(dtpop::testing::small_config(4, 60.0));
  EXPECT_NE(csv_bytes(a), csv_bytes(other));
}

TEST(Showcase, WriteRunProducesFiles) {
  const auto dir = scratch("write_run");
  write_run(dir, run_showcase(dtpop::testing::small_config(0, 40.0)));
  for (const char* f : {"tasks.csv", "indices.csv", "epochs.jsonl"}) EXPECT_TRUE(fs::exists(dir / f)) << f;
  std::ifstream in(dir / "tasks.csv");
  EXPECT_FALSE(read_tasks_csv(in).empty());
}

// ---------------------------------------------------------------------------
// CLI

TEST(Cli, RunAndSummarize) {
  const auto dir = scratch("cli_run");
  std::ofstream(dir / "s.json") << R"({"vehicles_per_rsu": 10, "duration_s": 40})";
  EXPECT_EQ(run_cli("run --scenario " + (dir / "s.json").string() + " --out " + (dir / "out").string()), 0);
  EXPECT_TRUE(fs::exists(dir / "out" / "summary.json"));
  EXPECT_EQ(run_cli("summarize --in " + (dir / "out").string()), 0);
}

TEST(Cli, SweepWritesPerSeedDirectories) {
  const auto dir = scratch("cli_sweep");
  std::ofstream(dir / "s.json") << R"({"vehicles_per_rsu": 5, "duration_s": 35})";
  EXPECT_EQ(run_cli("sweep --seeds 0..1 --jobs 1 --scenario " + (dir / "s.json").string() + " --out " +
                    (dir / "out").string()),
            0);
  EXPECT_TRUE(fs::exists(dir / "out" / "seed_0" / "tasks.csv"));
  EXPECT_TRUE(fs::exists(dir / "out" / "seed_1" / "tasks.csv"));
}

TEST(Cli, ExitCodes) {
  const auto dir = scratch("cli_codes");
  std::ofstream(dir / "bad.json") << R"({"links": {"v2r": {"loss_prob": 1.5}}})";
  EXPECT_EQ(run_cli("run --scenario " + (dir / "bad.json").string() + " --out " + (dir / "o").string()), 1);
  EXPECT_EQ(run_cli("run"), 1);
  EXPECT_EQ(run_cli("--help"), 0);
  EXPECT_EQ(run_cli("summarize --in " + (dir / "missing").string()), 2);
  EXPECT_EQ(run_cli("sweep --seeds 5..2 --out " + (dir / "o").string()), 1);
}
