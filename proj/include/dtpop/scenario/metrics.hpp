#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dtpop/stats.hpp"

namespace dtpop::scenario {

enum class Tier : std::uint8_t { Local, Edge, PartnerEdge, Cloud };

inline constexpr std::array<Tier, 4> kTiers{Tier::Local, Tier::Edge, Tier::PartnerEdge, Tier::Cloud};

constexpr std::string_view to_string(Tier t) {
  switch (t) {
    case Tier::Local: return "Local";
    case Tier::Edge: return "Edge";
    case Tier::PartnerEdge: return "PartnerEdge";
    case Tier::Cloud: return "Cloud";
  }
  return "?";
}

inline std::optional<Tier> parse_tier(std::string_view s) {
  for (Tier t : kTiers) {
    if (to_string(t) == s) return t;
  }
  return std::nullopt;
}

struct TaskRecord {
  std::uint64_t task_id = 0;
  std::uint32_t origin = 0;
  std::int64_t created_us = 0;
  std::optional<std::int64_t> completed_us;
  bool dropped = false;
  std::optional<Tier> tier;
  std::optional<std::uint32_t> region;  // serving RSU at creation
  // Set when the task reached its first edge while that edge was labelled Overload.
  std::optional<std::int64_t> overload_arrival_us;

  bool completed() const { return completed_us.has_value(); }
  bool in_flight() const { return !completed() && !dropped; }
  std::int64_t rt_us() const { return *completed_us - created_us; }
};

struct Summary {
  std::size_t generated = 0;
  std::size_t completed = 0;
  std::size_t dropped = 0;
  double median_us = 0.0;
  std::int64_t p25_us = 0;
  std::int64_t p75_us = 0;
  std::int64_t p95_us = 0;
  std::int64_t iqr_us = 0;
  double drop_rate = 0.0;
  std::array<std::size_t, 4> per_tier{};
};

/**
 * Response-time statistics over completed records. Median is the midpoint
 * average for even n; p25, p75 and p95 are nearest-rank.
 */
inline Summary summarize(std::span<const TaskRecord> records) {
  Summary s;
  std::vector<std::int64_t> rts;
  for (const auto& r : records) {
    ++s.generated;
    if (r.completed()) {
      rts.push_back(r.rt_us());
      ++s.per_tier[static_cast<std::size_t>(*r.tier)];
    } else if (r.dropped) {
      ++s.dropped;
    }
  }
  if (rts.empty()) throw std::invalid_argument("summarize: no completed records");
  std::sort(rts.begin(), rts.end());
  std::span<const std::int64_t> sorted(rts);
  s.completed = rts.size();
  s.median_us = median_sorted(sorted);
  s.p25_us = nearest_rank(sorted, 0.25);
  s.p75_us = nearest_rank(sorted, 0.75);
  s.p95_us = nearest_rank(sorted, 0.95);
  s.iqr_us = s.p75_us - s.p25_us;
  s.drop_rate = static_cast<double>(s.dropped) / static_cast<double>(s.generated);
  return s;
}

struct IndexPoint {
  std::int64_t window_end_us = 0;
  double autonomy = 0.0;
  double coordination = 1.0;
};

inline std::size_t window_count(std::int64_t duration_us, std::int64_t window_us) {
  return static_cast<std::size_t>((duration_us + window_us - 1) / window_us);
}

/**
 * A(w): share of tasks completed in w that were served below the cloud.
 * Empty windows carry the previous value; leading empty windows are 0.
 */
inline std::vector<double> autonomy_index(std::span<const TaskRecord> records, std::int64_t window_us,
                                          std::int64_t duration_us) {
  const std::size_t n = window_count(duration_us, window_us);
  std::vector<std::size_t> below(n), total(n);
  for (const auto& r : records) {
    if (!r.completed()) continue;
    const auto w = static_cast<std::size_t>(*r.completed_us / window_us);
    if (w >= n) continue;
    ++total[w];
    if (*r.tier != Tier::Cloud) ++below[w];
  }
  std::vector<double> a(n);
  double prev = 0.0;
  for (std::size_t w = 0; w < n; ++w) {
    if (total[w] > 0) prev = static_cast<double>(below[w]) / static_cast<double>(total[w]);
    a[w] = prev;
  }
  return a;
}

/**
 * C(w): of the tasks that arrived at an Overload-labelled edge during w, the
 * share that was completed by a partner edge. 1.0 when no task arrived at an
 * overloaded edge in w.
 */
inline std::vector<double> coordination_index(std::span<const TaskRecord> records, std::int64_t window_us,
                                              std::int64_t duration_us) {
  const std::size_t n = window_count(duration_us, window_us);
  std::vector<std::size_t> absorbed(n), arrivals(n);
  for (const auto& r : records) {
    if (!r.overload_arrival_us) continue;
    const auto w = static_cast<std::size_t>(*r.overload_arrival_us / window_us);
    if (w >= n) continue;
    ++arrivals[w];
    if (r.completed() && *r.tier == Tier::PartnerEdge) ++absorbed[w];
  }
  std::vector<double> c(n, 1.0);
  for (std::size_t w = 0; w < n; ++w) {
    if (arrivals[w] > 0) c[w] = static_cast<double>(absorbed[w]) / static_cast<double>(arrivals[w]);
  }
  return c;
}

inline std::vector<IndexPoint> index_series(std::span<const TaskRecord> records, std::int64_t window_us,
                                            std::int64_t duration_us) {
  const auto a = autonomy_index(records, window_us, duration_us);
  const auto c = coordination_index(records, window_us, duration_us);
  std::vector<IndexPoint> out(a.size());
  for (std::size_t w = 0; w < a.size(); ++w) {
    out[w] = {std::min<std::int64_t>(static_cast<std::int64_t>(w + 1) * window_us, duration_us), a[w], c[w]};
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV

inline void write_tasks_csv(std::ostream& os, std::span<const TaskRecord> records) {
  os << "task_id,origin,created_us,completed_us,tier,rt_us,dropped\n";
  for (const auto& r : records) {
    os << r.task_id << ',' << r.origin << ',' << r.created_us << ',';
    if (r.completed()) os << *r.completed_us;
    os << ',';
    if (r.tier) os << to_string(*r.tier);
    os << ',';
    if (r.completed()) os << r.rt_us();
    os << ',' << (r.dropped ? 1 : 0) << '\n';
  }
}

inline std::string format_fixed(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

inline void write_indices_csv(std::ostream& os, std::span<const IndexPoint> points) {
  os << "window_end_us,autonomy,coordination\n";
  for (const auto& p : points) {
    os << p.window_end_us << ',' << format_fixed(p.autonomy) << ',' << format_fixed(p.coordination) << '\n';
  }
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

// Reads a tasks CSV written by write_tasks_csv.
inline std::vector<TaskRecord> read_tasks_csv(std::istream& is) {
  std::vector<TaskRecord> out;
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("tasks csv: missing header");
  if (line != "task_id,origin,created_us,completed_us,tier,rt_us,dropped") {
    throw std::runtime_error("tasks csv: unexpected header '" + line + "'");
  }
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 7) throw std::runtime_error("tasks csv: line " + std::to_string(lineno) + " has wrong arity");
    TaskRecord r;
    r.task_id = std::stoull(f[0]);
    r.origin = static_cast<std::uint32_t>(std::stoul(f[1]));
    r.created_us = std::stoll(f[2]);
    if (!f[3].empty()) r.completed_us = std::stoll(f[3]);
    if (!f[4].empty()) {
      r.tier = parse_tier(f[4]);
      if (!r.tier) throw std::runtime_error("tasks csv: bad tier on line " + std::to_string(lineno));
    }
    r.dropped = f[6] == "1";
    out.push_back(r);
  }
  return out;
}

}  // namespace dtpop::scenario
