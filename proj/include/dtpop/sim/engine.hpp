#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dtpop/sim/clock.hpp"

namespace dtpop::sim {

class CausalityError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

enum class EventKind : std::uint8_t { Delivery, Timer, AgentTick };

using EventId = std::uint64_t;

struct Event {
  SimTime fire_at;
  std::uint64_t seq = 0;
  EventKind kind = EventKind::Timer;
  std::function<void()> action;
};

// (fire_at, seq) of a processed event, recorded when tracing is on.
struct TraceEntry {
  SimTime fire_at;
  std::uint64_t seq;
  EventKind kind;
};

/**
 * Single-threaded discrete-event engine.
 *
 * Events fire in strict (fire_at, seq) order, where seq is the global issue
 * counter. The clock never moves backwards and an event may not be scheduled
 * before the current clock.
 */
class Engine {
 public:
  SimTime now() const noexcept { return now_; }

  EventId schedule(EventKind kind, SimTime at, std::function<void()> action) {
    if (at < now_) {
      throw CausalityError("causality violation: scheduling at " + std::to_string(to_us(at)) +
                           "us while clock is " + std::to_string(to_us(now_)) + "us");
    }
    const EventId id = next_seq_++;
    heap_.push_back(Event{at, id, kind, std::move(action)});
    std::push_heap(heap_.begin(), heap_.end(), Later{});
    return id;
  }

  EventId schedule_in(EventKind kind, Duration delay, std::function<void()> action) {
    return schedule(kind, now_ + delay, std::move(action));
  }

  // Processes every event with fire_at <= t_end, then parks the clock at t_end.
  std::size_t run_until(SimTime t_end) {
    std::size_t processed = 0;
    while (!heap_.empty() && heap_.front().fire_at <= t_end) {
      std::pop_heap(heap_.begin(), heap_.end(), Later{});
      Event ev = std::move(heap_.back());
      heap_.pop_back();
      now_ = ev.fire_at;
      if (tracing_) trace_.push_back({ev.fire_at, ev.seq, ev.kind});
      ++processed;
      ++total_processed_;
      if (ev.action) ev.action();
    }
    if (t_end > now_) now_ = t_end;
    return processed;
  }

  std::size_t pending() const noexcept { return heap_.size(); }
  std::uint64_t issued() const noexcept { return next_seq_; }
  std::uint64_t total_processed() const noexcept { return total_processed_; }

  void enable_trace(bool on = true) { tracing_ = on; }
  const std::vector<TraceEntry>& trace() const noexcept { return trace_; }

 private:
  struct Later {
    bool operator()(const Event& a, const Event& b) const noexcept {
      if (a.fire_at != b.fire_at) return a.fire_at > b.fire_at;
      return a.seq > b.seq;
    }
  };

  SimTime now_{};
  std::uint64_t next_seq_ = 0;
  std::uint64_t total_processed_ = 0;
  std::vector<Event> heap_;
  bool tracing_ = false;
  std::vector<TraceEntry> trace_;
};

}  // namespace dtpop::sim
