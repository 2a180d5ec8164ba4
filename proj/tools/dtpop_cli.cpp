// dtpop: run the three-tier twin showcase, summarise runs, sweep seeds.

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "dtpop/dtpop.hpp"

namespace fs = std::filesystem;
using namespace dtpop;
using namespace dtpop::scenario;

namespace {

struct RunOptions {
  std::string scenario;
  std::string mode;
  std::optional<std::uint64_t> seed;
  std::optional<double> duration;
  bool hotspot = false;
};

ScenarioConfig build_config(const RunOptions& o) {
  ScenarioConfig c = o.scenario.empty() ? ScenarioConfig{} : load_scenario(o.scenario);
  if (!o.mode.empty()) c.mode = parse_mode(o.mode);
  if (o.seed) c.seed = *o.seed;
  if (o.duration) c.duration_s = *o.duration;
  if (o.hotspot && !c.hotspot) c.hotspot = default_hotspot();
  validate(c);
  return c;
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    if (part.empty()) continue;
    try {
      if (auto dots = part.find(".."); dots != std::string::npos) {
        const auto lo = std::stoull(part.substr(0, dots));
        const auto hi = std::stoull(part.substr(dots + 2));
        if (hi < lo) throw ConfigError("seeds", "range '" + part + "' is reversed");
        for (auto s = lo; s <= hi; ++s) out.push_back(s);
      } else {
        out.push_back(std::stoull(part));
      }
    } catch (const std::logic_error&) {
      throw ConfigError("seeds", "cannot parse '" + part + "'");
    }
  }
  if (out.empty()) throw ConfigError("seeds", "no seeds given");
  return out;
}

double mean_of(const std::vector<IndexPoint>& pts, double IndexPoint::*field) {
  if (pts.empty()) return 0.0;
  double s = 0.0;
  for (const auto& p : pts) s += p.*field;
  return s / static_cast<double>(pts.size());
}

void write_all(const fs::path& dir, const RunResult& r) {
  write_run(dir, r);
  auto j = summary_json(summarize(r.tasks));
  j["seed"] = r.config.seed;
  j["mode"] = std::string(to_string(r.config.mode));
  j["mean_autonomy"] = mean_of(r.indices, &IndexPoint::autonomy);
  j["mean_coordination"] = mean_of(r.indices, &IndexPoint::coordination);
  j["in_flight"] = r.counted.in_flight;
  j["conserved"] = r.counted.balanced();
  j["wall_seconds"] = r.wall_seconds;
  std::ofstream(dir / "summary.json", std::ios::binary) << j.dump(2) << '\n';
}

std::string summary_row(std::uint64_t seed, const Summary& s, const std::vector<IndexPoint>& idx) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%llu,%zu,%zu,%zu,%.1f,%lld,%lld,%.6f,%.6f,%.6f", static_cast<unsigned long long>(seed),
                s.generated, s.completed, s.dropped, s.median_us, static_cast<long long>(s.p95_us),
                static_cast<long long>(s.iqr_us), s.drop_rate, mean_of(idx, &IndexPoint::autonomy),
                mean_of(idx, &IndexPoint::coordination));
  return buf;
}

constexpr const char* kRowHeader = "seed,generated,completed,dropped,median_us,p95_us,iqr_us,drop_rate,mean_autonomy,mean_coordination";

int cmd_run(const RunOptions& o, const std::string& out) {
  const ScenarioConfig cfg = build_config(o);
  const RunResult r = run_showcase(cfg);
  write_all(out, r);
  std::cout << kRowHeader << '\n' << summary_row(cfg.seed, summarize(r.tasks), r.indices) << '\n';
  return 0;
}

int cmd_summarize(const std::string& in) {
  const fs::path dir(in);
  std::ifstream tasks(dir / "tasks.csv", std::ios::binary);
  if (!tasks) throw std::runtime_error("cannot open " + (dir / "tasks.csv").string());
  const auto records = read_tasks_csv(tasks);
  auto j = summary_json(summarize(records));
  std::ifstream idx(dir / "indices.csv", std::ios::binary);
  if (idx) {
    std::string line;
    std::getline(idx, line);
    std::vector<IndexPoint> pts;
    while (std::getline(idx, line)) {
      if (line.empty()) continue;
      const auto f = split_csv_line(line);
      if (f.size() != 3) throw std::runtime_error("indices.csv: malformed line '" + line + "'");
      pts.push_back({std::stoll(f[0]), std::stod(f[1]), std::stod(f[2])});
    }
    j["mean_autonomy"] = mean_of(pts, &IndexPoint::autonomy);
    j["mean_coordination"] = mean_of(pts, &IndexPoint::coordination);
  }
  std::cout << j.dump(2) << '\n';
  return 0;
}

int cmd_sweep(const RunOptions& o, const std::string& seeds_text, const std::string& out, unsigned jobs) {
  const auto seeds = parse_seeds(seeds_text);
  std::vector<ScenarioConfig> configs;
  for (auto s : seeds) {
    RunOptions per = o;
    per.seed = s;
    configs.push_back(build_config(per));
  }
  if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
  jobs = std::min<unsigned>(jobs, static_cast<unsigned>(configs.size()));

  std::vector<std::string> rows(configs.size());
  std::vector<std::exception_ptr> errors(configs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < configs.size(); i = next++) {
      try {
        const RunResult r = run_showcase(configs[i]);
        write_all(fs::path(out) / ("seed_" + std::to_string(configs[i].seed)), r);
        rows[i] = summary_row(configs[i].seed, summarize(r.tasks), r.indices);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < jobs; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  std::cout << kRowHeader << '\n';
  for (const auto& row : rows) std::cout << row << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Three-tier digital twin ecosystem simulator"};
  app.require_subcommand(1);

  RunOptions opts;
  std::string out;
  std::string in;
  std::string seeds = "0..9";
  unsigned jobs = 0;

  auto add_run_options = [&](CLI::App* sub) {
    sub->add_option("--scenario", opts.scenario, "Scenario JSON file (defaults if omitted)");
    sub->add_option("--mode", opts.mode, "layered or cloud_only");
    sub->add_option("--duration", opts.duration, "Simulated seconds");
    sub->add_flag("--hotspot", opts.hotspot, "Enable the built-in hotspot sub-scenario");
    sub->add_option("--out", out, "Output directory")->required();
  };

  auto* run = app.add_subcommand("run", "Run one scenario");
  add_run_options(run);
  run->add_option("--seed", opts.seed, "Root seed");

  auto* summ = app.add_subcommand("summarize", "Summarise a run directory");
  summ->add_option("--in", in, "Run directory")->required();

  auto* sweep = app.add_subcommand("sweep", "Run one scenario over several seeds");
  add_run_options(sweep);
  sweep->add_option("--seeds", seeds, "Seed list, e.g. 0..9 or 1,4,7");
  sweep->add_option("--jobs", jobs, "Concurrent runs (0 = hardware threads)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (*run) return cmd_run(opts, out);
    if (*summ) return cmd_summarize(in);
    if (*sweep) return cmd_sweep(opts, seeds, out, jobs);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
