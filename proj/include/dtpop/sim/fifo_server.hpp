#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <stdexcept>

#include "dtpop/sim/clock.hpp"

namespace dtpop::sim {

// Service time of `cost_cu` compute units at `capacity_cu_per_s`, nearest microsecond.
inline Duration service_time(double cost_cu, double capacity_cu_per_s) {
  return Duration{std::llround(cost_cu * 1e6 / capacity_cu_per_s)};
}

struct ServiceSlot {
  SimTime start;
  SimTime finish;
};

/**
 * Single work-conserving FIFO server. Jobs start at max(arrival, previous
 * finish). Busy intervals are kept (merged) so utilisation over a window can
 * be read back exactly.
 */
class FifoServer {
 public:
  explicit FifoServer(double capacity_cu_per_s) : capacity_(capacity_cu_per_s) {
    if (!(capacity_ > 0.0)) throw std::invalid_argument("server capacity must be > 0");
  }

  double capacity() const noexcept { return capacity_; }

  ServiceSlot enqueue(SimTime arrival, double cost_cu) {
    const SimTime start = std::max(arrival, busy_until_);
    const SimTime finish = start + service_time(cost_cu, capacity_);
    busy_until_ = finish;
    if (finish > start) {
      if (!busy_.empty() && busy_.back().finish == start) {
        busy_.back().finish = finish;
      } else {
        busy_.push_back({start, finish});
      }
    }
    return {start, finish};
  }

  SimTime busy_until() const noexcept { return busy_until_; }

  // Outstanding work at `now`, in seconds of service.
  double backlog_s(SimTime now) const {
    return busy_until_ > now ? to_seconds(busy_until_ - now) : 0.0;
  }
  double backlog_cu(SimTime now) const { return backlog_s(now) * capacity_; }

  // Busy time overlapping [t0, t1). Intervals ending before `t0` are discarded,
  // so queries must use non-decreasing t0.
  Duration busy_time(SimTime t0, SimTime t1) {
    while (!busy_.empty() && busy_.front().finish <= t0) busy_.pop_front();
    Duration total{0};
    for (const auto& s : busy_) {
      if (s.start >= t1) break;
      const SimTime a = std::max(s.start, t0);
      const SimTime b = std::min(s.finish, t1);
      if (b > a) total += b - a;
    }
    return total;
  }

  // Compute units processed in [t0, t1).
  double processed_cu(SimTime t0, SimTime t1) { return to_seconds(busy_time(t0, t1)) * capacity_; }

 private:
  double capacity_;
  SimTime busy_until_{};
  std::deque<ServiceSlot> busy_;
};

}  // namespace dtpop::sim
