#pragma once

#include <concepts>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dtpop/sim/clock.hpp"
#include "dtpop/sim/engine.hpp"

namespace dtpop::sim {

struct LinkSpec {
  Duration base_latency{0};
  double bandwidth_bps = 1e6;  // bytes per second
  double loss_prob = 0.0;
  Duration retx_timeout{0};
  int max_attempts = 1;

  bool valid() const noexcept {
    return bandwidth_bps > 0.0 && loss_prob >= 0.0 && loss_prob < 1.0 && max_attempts >= 1 &&
           base_latency.count() >= 0 && retx_timeout.count() >= 0;
  }
};

// base_latency + payload / bandwidth, rounded to the nearest microsecond.
inline Duration link_latency(const LinkSpec& link, std::uint64_t payload_bytes) {
  const double tx_us = static_cast<double>(payload_bytes) * 1e6 / link.bandwidth_bps;
  return link.base_latency + Duration{std::llround(tx_us)};
}

class RoutingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct EndpointId {
  std::uint32_t value = 0;
  friend constexpr auto operator<=>(EndpointId, EndpointId) = default;
};

template <class R>
concept LossSource = requires(R r) {
  { r.uniform01() } -> std::convertible_to<double>;
};

struct DeliveryOutcome {
  bool delivered = false;
  int attempts = 0;
  SimTime at;  // delivery time, or the time the drop is recorded
};

struct MessageCounters {
  std::uint64_t sent = 0;
  std::uint64_t delivered = 0;
  std::uint64_t dropped = 0;
  std::uint64_t in_flight() const noexcept { return sent - delivered - dropped; }
};

/**
 * Point-to-point transport on top of the engine.
 *
 * The attempt sequence of a message is drawn when it is sent: attempt k
 * (0-based) is transmitted at now + k * retx_timeout and, when it survives,
 * arrives link_latency later. If every attempt is lost the drop is recorded
 * at now + max_attempts * retx_timeout.
 */
class Network {
 public:
  explicit Network(Engine& engine) : engine_(engine) {}

  void register_endpoint(EndpointId id) {
    if (id.value >= endpoints_.size()) endpoints_.resize(id.value + 1, false);
    endpoints_[id.value] = true;
  }
  bool is_registered(EndpointId id) const { return id.value < endpoints_.size() && endpoints_[id.value]; }

  template <LossSource Rng>
  DeliveryOutcome send(EndpointId from, EndpointId to, std::uint64_t bytes, const LinkSpec& link,
                       Rng& rng, std::function<void()> on_deliver,
                       std::function<void()> on_drop = {}) {
    check_route(from, to);
    const DeliveryOutcome out = plan(bytes, link, rng);
    ++counters_.sent;
    if (out.delivered) {
      engine_.schedule(EventKind::Delivery, out.at, [this, cb = std::move(on_deliver)] {
        ++counters_.delivered;
        if (cb) cb();
      });
    } else {
      engine_.schedule(EventKind::Delivery, out.at, [this, cb = std::move(on_drop)] {
        ++counters_.dropped;
        if (cb) cb();
      });
    }
    return out;
  }

  /**
   * One copy of a message to each receiver. Receivers needing the same number
   * of attempts share a delivery event. Counters are per copy.
   */
  template <LossSource Rng>
  void multicast(EndpointId from, std::span<const EndpointId> receivers, std::uint64_t bytes,
                 const LinkSpec& link, Rng& rng, std::function<void(EndpointId)> on_deliver) {
    std::map<std::int64_t, std::vector<EndpointId>> delivered_at;
    std::map<std::int64_t, std::uint64_t> dropped_at;
    for (EndpointId to : receivers) {
      check_route(from, to);
      const DeliveryOutcome out = plan(bytes, link, rng);
      ++counters_.sent;
      if (out.delivered) {
        delivered_at[to_us(out.at)].push_back(to);
      } else {
        ++dropped_at[to_us(out.at)];
      }
    }
    for (auto& [t, group] : delivered_at) {
      engine_.schedule(EventKind::Delivery, at_us(t),
                       [this, group = std::move(group), cb = on_deliver] {
                         for (EndpointId to : group) {
                           ++counters_.delivered;
                           if (cb) cb(to);
                         }
                       });
    }
    for (auto [t, n] : dropped_at) {
      engine_.schedule(EventKind::Delivery, at_us(t), [this, n] { counters_.dropped += n; });
    }
  }

  const MessageCounters& counters() const noexcept { return counters_; }
  Engine& engine() noexcept { return engine_; }

 private:
  void check_route(EndpointId from, EndpointId to) const {
    if (!is_registered(from) || !is_registered(to)) {
      throw RoutingError("routing error: unknown endpoint " +
                         std::to_string(is_registered(from) ? to.value : from.value));
    }
  }

  template <LossSource Rng>
  DeliveryOutcome plan(std::uint64_t bytes, const LinkSpec& link, Rng& rng) const {
    const SimTime now = engine_.now();
    for (int attempt = 0; attempt < link.max_attempts; ++attempt) {
      const bool lost = link.loss_prob > 0.0 && rng.uniform01() < link.loss_prob;
      if (!lost) {
        return {true, attempt + 1, now + attempt * link.retx_timeout + link_latency(link, bytes)};
      }
    }
    return {false, link.max_attempts, now + link.max_attempts * link.retx_timeout};
  }

  Engine& engine_;
  std::vector<bool> endpoints_;
  MessageCounters counters_;
};

}  // namespace dtpop::sim
