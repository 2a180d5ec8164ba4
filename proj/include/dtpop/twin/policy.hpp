#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>

namespace dtpop::twin {

enum class Role : std::uint8_t { Acquisition = 0, Processing = 1, Coordination = 2 };

inline constexpr std::array<Role, 3> kRoles{Role::Acquisition, Role::Processing, Role::Coordination};

constexpr std::string_view to_string(Role r) {
  switch (r) {
    case Role::Acquisition: return "Acquisition";
    case Role::Processing: return "Processing";
    case Role::Coordination: return "Coordination";
  }
  return "?";
}

inline std::optional<Role> parse_role(std::string_view s) {
  for (Role r : kRoles) {
    if (to_string(r) == s) return r;
  }
  return std::nullopt;
}

// Quota per role, indexed by Role.
using RoleQuotas = std::array<double, 3>;

struct ParamRange {
  double lo;
  double hi;
  double width() const { return hi - lo; }
  double clamp(double v) const { return std::clamp(v, lo, hi); }
};

inline constexpr ParamRange kLocalThresholdRange{0.0, 10.0};   // CU
inline constexpr ParamRange kOffloadFractionRange{0.0, 1.0};
inline constexpr ParamRange kCongestionSpeedRange{3.0, 10.0};  // m/s
inline constexpr ParamRange kQuotaRange{0.0, 1.0};

// The tunable knobs shared by cloud blueprints and edge-local policies.
struct PolicyParams {
  double local_serve_threshold = 2.0;
  double offload_fraction = 0.3;
  double congestion_speed_threshold = 6.0;
  RoleQuotas role_quotas{0.5, 0.3, 0.2};

  friend bool operator==(const PolicyParams&, const PolicyParams&) = default;
};

// Normalises quotas to sum 1. Returns nullopt if any entry is negative or
// non-finite, or all are zero.
inline std::optional<RoleQuotas> normalized_quotas(RoleQuotas q) {
  double sum = 0.0;
  for (double v : q) {
    if (!std::isfinite(v) || v < 0.0) return std::nullopt;
    sum += v;
  }
  if (!(sum > 0.0)) return std::nullopt;
  for (double& v : q) v /= sum;
  return q;
}

inline bool params_finite(const PolicyParams& p) {
  return std::isfinite(p.local_serve_threshold) && std::isfinite(p.offload_fraction) &&
         std::isfinite(p.congestion_speed_threshold) &&
         std::all_of(p.role_quotas.begin(), p.role_quotas.end(), [](double v) { return std::isfinite(v); });
}

// Clamps every scalar to its declared range; quotas are clamped then renormalised.
inline PolicyParams clamp_params(PolicyParams p) {
  p.local_serve_threshold = kLocalThresholdRange.clamp(p.local_serve_threshold);
  p.offload_fraction = kOffloadFractionRange.clamp(p.offload_fraction);
  p.congestion_speed_threshold = kCongestionSpeedRange.clamp(p.congestion_speed_threshold);
  for (double& q : p.role_quotas) q = kQuotaRange.clamp(q);
  if (auto n = normalized_quotas(p.role_quotas)) p.role_quotas = *n;
  return p;
}

struct LocalPolicy {
  PolicyParams params;
  std::int64_t version = -1;  // blueprint epoch it was localised from
  std::string source_blueprint;

  double local_serve_threshold() const { return params.local_serve_threshold; }
};

}  // namespace dtpop::twin
