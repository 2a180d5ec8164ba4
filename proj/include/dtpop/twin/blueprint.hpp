#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "json.hpp"

#include "dtpop/twin/policy.hpp"

namespace dtpop::twin {

// Cloud-issued, region-targeted parameter set. `target` empty means global.
struct PolicyBlueprint {
  std::optional<std::uint32_t> target;
  PolicyParams params;
  std::int64_t epoch = 0;
  std::optional<std::string> parent;

  std::string id() const {
    return (target ? "rsu" + std::to_string(*target) : std::string("global")) + "/e" + std::to_string(epoch);
  }
};

inline nlohmann::ordered_json params_to_json(const PolicyParams& p) {
  nlohmann::ordered_json j;
  j["local_serve_threshold"] = p.local_serve_threshold;
  j["offload_fraction"] = p.offload_fraction;
  j["congestion_speed_threshold"] = p.congestion_speed_threshold;
  j["role_quotas"] = {p.role_quotas[0], p.role_quotas[1], p.role_quotas[2]};
  return j;
}

// Canonical wire form: target, epoch, parent, params.
inline nlohmann::ordered_json to_json(const PolicyBlueprint& b) {
  nlohmann::ordered_json j;
  if (b.target) {
    j["target"] = *b.target;
  } else {
    j["target"] = "global";
  }
  j["epoch"] = b.epoch;
  if (b.parent) {
    j["parent"] = *b.parent;
  } else {
    j["parent"] = nullptr;
  }
  j["params"] = params_to_json(b.params);
  return j;
}

// Structural parse. Returns nullopt for missing fields, wrong types or
// non-finite numbers; range clamping is left to the receiver.
inline std::optional<PolicyBlueprint> parse_blueprint(const nlohmann::json& j) {
  try {
    if (!j.is_object()) return std::nullopt;
    PolicyBlueprint b;
    const auto& t = j.at("target");
    if (t.is_string()) {
      if (t.get<std::string>() != "global") return std::nullopt;
    } else if (t.is_number_unsigned()) {
      b.target = t.get<std::uint32_t>();
    } else {
      return std::nullopt;
    }
    if (!j.at("epoch").is_number_integer()) return std::nullopt;
    b.epoch = j.at("epoch").get<std::int64_t>();
    const auto& parent = j.at("parent");
    if (parent.is_string()) {
      b.parent = parent.get<std::string>();
    } else if (!parent.is_null()) {
      return std::nullopt;
    }
    const auto& p = j.at("params");
    auto num = [&](const char* key) -> std::optional<double> {
      const auto& v = p.at(key);
      if (!v.is_number()) return std::nullopt;
      return v.get<double>();
    };
    auto th = num("local_serve_threshold");
    auto phi = num("offload_fraction");
    auto vc = num("congestion_speed_threshold");
    const auto& q = p.at("role_quotas");
    if (!th || !phi || !vc || !q.is_array() || q.size() != 3) return std::nullopt;
    b.params.local_serve_threshold = *th;
    b.params.offload_fraction = *phi;
    b.params.congestion_speed_threshold = *vc;
    for (std::size_t i = 0; i < 3; ++i) {
      if (!q[i].is_number()) return std::nullopt;
      b.params.role_quotas[i] = q[i].get<double>();
    }
    if (!params_finite(b.params)) return std::nullopt;
    return b;
  } catch (const nlohmann::json::exception&) {
    return std::nullopt;
  }
}

inline std::optional<PolicyBlueprint> parse_blueprint(const std::string& text) {
  const auto j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded()) return std::nullopt;
  return parse_blueprint(j);
}

}  // namespace dtpop::twin
