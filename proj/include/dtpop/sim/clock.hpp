#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>

namespace dtpop::sim {

// Simulated clock. Integer microseconds since simulation start.
struct SimClock {
  using rep = std::int64_t;
  using period = std::micro;
  using duration = std::chrono::duration<rep, period>;
  using time_point = std::chrono::time_point<SimClock>;
  static constexpr bool is_steady = true;
};

using Duration = SimClock::duration;
using SimTime = SimClock::time_point;

inline constexpr SimTime kTimeZero{};

constexpr SimTime at_us(std::int64_t us) { return SimTime{Duration{us}}; }
constexpr std::int64_t to_us(SimTime t) { return t.time_since_epoch().count(); }
constexpr std::int64_t to_us(Duration d) { return d.count(); }

// Seconds (double) to the nearest microsecond.
inline Duration seconds(double s) { return Duration{std::llround(s * 1e6)}; }
inline Duration millis(double ms) { return Duration{std::llround(ms * 1e3)}; }

inline double to_seconds(Duration d) { return static_cast<double>(d.count()) * 1e-6; }
inline double to_seconds(SimTime t) { return to_seconds(t.time_since_epoch()); }

}  // namespace dtpop::sim
