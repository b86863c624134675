#include "lorakit/phy.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "lorakit/errors.hpp"

namespace lorakit::phy {

namespace {

constexpr int kMinSf = 7;
constexpr int kMaxSf = 12;

void check_sf(int sf) {
  if (sf < kMinSf || sf > kMaxSf) {
    throw ValidationError("sf must be in 7..12, got " + std::to_string(sf));
  }
}

}  // namespace

void validate(const PhyParams& p) {
  check_sf(p.sf);
  if (p.bandwidth_hz != 125000 && p.bandwidth_hz != 250000 && p.bandwidth_hz != 500000) {
    throw ValidationError("bandwidth_hz must be 125000, 250000 or 500000, got " +
                          std::to_string(p.bandwidth_hz));
  }
  if (p.coding_rate < 1 || p.coding_rate > 4) {
    throw ValidationError("coding_rate must be in 1..4, got " + std::to_string(p.coding_rate));
  }
  if (p.preamble_symbols < 1) {
    throw ValidationError("preamble_symbols must be >= 1, got " +
                          std::to_string(p.preamble_symbols));
  }
  if (p.phy_payload_bytes < 0 || p.phy_payload_bytes > 255) {
    throw ValidationError("phy_payload_bytes must be in 0..255, got " +
                          std::to_string(p.phy_payload_bytes));
  }
}

void validate(const DutyCyclePolicy& policy) {
  if (!(policy.duty_cycle > 0.0) || policy.duty_cycle > 1.0) {
    throw ValidationError("duty_cycle must be in (0, 1], got " +
                          std::to_string(policy.duty_cycle));
  }
}

void validate(const AppMessageSpec& spec) {
  if (spec.app_payload_bytes < 0) {
    throw ValidationError("app_payload_bytes must be >= 0");
  }
  if (spec.mac_overhead_bytes < 0) {
    throw ValidationError("mac_overhead_bytes must be >= 0");
  }
  if (spec.app_payload_bytes + spec.mac_overhead_bytes > 255) {
    throw ValidationError("phy payload " +
                          std::to_string(spec.app_payload_bytes + spec.mac_overhead_bytes) +
                          " B exceeds 255 B");
  }
  if (!(spec.target_interval_s > 0.0)) {
    throw ValidationError("target_interval_s must be > 0");
  }
}

bool low_data_rate_enabled(const PhyParams& p) {
  switch (p.low_data_rate_optimize) {
    case Ldro::On:
      return true;
    case Ldro::Off:
      return false;
    case Ldro::Auto:
      return p.sf >= 11 && p.bandwidth_hz == 125000;
  }
  return false;
}

double symbol_duration_s(int sf, int bandwidth_hz) {
  check_sf(sf);
  if (bandwidth_hz <= 0) {
    throw ValidationError("bandwidth_hz must be > 0");
  }
  return std::ldexp(1.0, sf) / static_cast<double>(bandwidth_hz);
}

int payload_symbol_count(const PhyParams& p) {
  validate(p);
  const int de = low_data_rate_enabled(p) ? 1 : 0;
  const int ih = p.explicit_header ? 0 : 1;
  const int crc = p.crc_on ? 1 : 0;
  const int numerator = 8 * p.phy_payload_bytes - 4 * p.sf + 28 + 16 * crc - 20 * ih;
  const int denominator = 4 * (p.sf - 2 * de);
  // ceil(numerator / denominator), clamped at zero for tiny payloads
  const int blocks = numerator > 0 ? (numerator + denominator - 1) / denominator : 0;
  return 8 + std::max(blocks * (p.coding_rate + 4), 0);
}

double time_on_air_s(const PhyParams& p) {
  const int n_payload = payload_symbol_count(p);  // validates
  const double t_sym = symbol_duration_s(p.sf, p.bandwidth_hz);
  return (p.preamble_symbols + 4.25 + n_payload) * t_sym;
}

double min_interval_s(const PhyParams& params, const DutyCyclePolicy& policy) {
  validate(policy);
  return time_on_air_s(params) / policy.duty_cycle;
}

PhyParams eu868_uplink_params(int sf, int phy_payload_bytes) {
  PhyParams p;
  p.sf = sf;
  p.bandwidth_hz = 125000;
  p.coding_rate = 1;
  p.preamble_symbols = 8;
  p.explicit_header = true;
  p.crc_on = true;
  p.low_data_rate_optimize = Ldro::Auto;
  p.phy_payload_bytes = phy_payload_bytes;
  validate(p);
  return p;
}

PlanResult plan_spreading_factor(const AppMessageSpec& spec, const DutyCyclePolicy& policy) {
  validate(spec);
  validate(policy);

  const int phy_payload = spec.app_payload_bytes + spec.mac_overhead_bytes;

  PlanResult result;
  result.per_sf.reserve(kMaxSf - kMinSf + 1);
  for (int sf = kMinSf; sf <= kMaxSf; ++sf) {
    const PhyParams params = eu868_uplink_params(sf, phy_payload);
    SfPlanEntry entry;
    entry.sf = sf;
    entry.time_on_air_s = time_on_air_s(params);
    entry.min_interval_s = entry.time_on_air_s / policy.duty_cycle;
    entry.feasible = entry.min_interval_s <= spec.target_interval_s + 1e-9;
    result.per_sf.push_back(entry);
    if (entry.feasible) {
      result.chosen_sf = sf;  // ascending scan keeps the highest feasible SF
    }
  }
  result.feasible = result.chosen_sf.has_value();
  result.best_achievable_interval_s = result.per_sf.front().min_interval_s;
  return result;
}

}  // namespace lorakit::phy
