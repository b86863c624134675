#pragma once

#include <optional>
#include <vector>

namespace lorakit::phy {

/// Low data rate optimization (DE) setting. Auto resolves to the mandatory
/// rule for EU868 public networks: enabled at SF11/SF12 on 125 kHz.
enum class Ldro { Auto, On, Off };

/// Complete description of one LoRa uplink transmission at the PHY layer.
///
/// Symbol names follow the usual airtime formula (Semtech AN1200.13):
/// SF, BW, CR (coding rate 4/(4+CR)), IH (implicit header), DE, CRC, PL.
struct PhyParams {
  int sf = 9;                  ///< spreading factor, 7..12
  int bandwidth_hz = 125000;   ///< 125000, 250000 or 500000
  int coding_rate = 1;         ///< CR in 1..4, meaning 4/(4+CR)
  int preamble_symbols = 8;    ///< programmed preamble length, >= 1
  bool explicit_header = true; ///< IH = 0 when true
  bool crc_on = true;          ///< CRC = 1 when true
  Ldro low_data_rate_optimize = Ldro::Auto;
  int phy_payload_bytes = 0;   ///< PHY payload PL, 0..255
};

/// Regulatory duty-cycle cap as a fraction of time (EU868 sub-bands: 0.01).
struct DutyCyclePolicy {
  double duty_cycle = 0.01;  ///< in (0, 1]
};

/// An application message plus the uplink MAC framing around it.
///
/// The 13-byte default overhead is the minimal LoRaWAN uplink frame:
/// 1 B MAC header + 4 B device address + 1 B frame control + 2 B frame
/// counter + 1 B port + 4 B integrity code, no frame options.
struct AppMessageSpec {
  int app_payload_bytes = 0;
  int mac_overhead_bytes = 13;
  double target_interval_s = 30.0;
};

/// Throws ValidationError when a field is out of range.
void validate(const PhyParams& params);
void validate(const DutyCyclePolicy& policy);
void validate(const AppMessageSpec& spec);

/// Resolves the Ldro::Auto rule; returns the effective DE flag.
bool low_data_rate_enabled(const PhyParams& params);

/// T_sym = 2^sf / bandwidth, in seconds.
double symbol_duration_s(int sf, int bandwidth_hz);

/// Number of symbols in the payload part of the packet, >= 8.
int payload_symbol_count(const PhyParams& params);

/// Packet time-on-air in seconds: preamble (n_preamble + 4.25 symbols)
/// plus payload symbols.
double time_on_air_s(const PhyParams& params);

/// Smallest legal start-to-start transmission period under the duty cycle:
/// time_on_air / duty_cycle. Per-transmission pacing; sub-band aggregation
/// across channels is out of scope.
double min_interval_s(const PhyParams& params, const DutyCyclePolicy& policy);

/// EU868 public-network uplink defaults for a given SF and PHY payload:
/// BW 125 kHz, CR 4/5, preamble 8, explicit header, CRC on, DE auto.
PhyParams eu868_uplink_params(int sf, int phy_payload_bytes);

struct SfPlanEntry {
  int sf = 0;
  double time_on_air_s = 0.0;
  double min_interval_s = 0.0;
  bool feasible = false;
};

struct PlanResult {
  std::vector<SfPlanEntry> per_sf;       ///< one entry per SF 7..12, ascending
  std::optional<int> chosen_sf;          ///< empty when infeasible
  bool feasible = false;
  double best_achievable_interval_s = 0; ///< min interval at SF7
};

/// Picks the highest spreading factor whose minimal legal interval still
/// meets the target (higher SF trades throughput for coverage). When even
/// SF7 cannot meet the target the result is marked infeasible and reports
/// the smallest achievable interval.
PlanResult plan_spreading_factor(const AppMessageSpec& spec, const DutyCyclePolicy& policy);

}  // namespace lorakit::phy
