#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lorakit/fieldlog.hpp"
#include "lorakit/geo.hpp"
#include "lorakit/phy.hpp"

namespace lorakit::sim {

struct Waypoint {
  double t_s = 0.0;  ///< scenario-relative seconds
  geo::GeoPoint point;

  friend bool operator==(const Waypoint&, const Waypoint&) = default;
};

/// A periodic uplink device. A single waypoint means a fixed position;
/// several waypoints describe a moving device (piecewise-linear path).
struct DeviceSpec {
  std::string device_id;
  std::vector<Waypoint> path;   ///< non-empty, strictly increasing t_s
  int app_payload_bytes = 0;
  double interval_s = 30.0;
  int sf = 9;
  double start_offset_s = 0.0;
  double gain_offset_db = 0.0;  ///< antenna/placement offset (e.g. body-worn)
};

/// Gateways are pure forwarding entities: position and gain only.
struct GatewaySpec {
  std::string gateway_id;
  geo::GeoPoint position;
  double gain_offset_db = 0.0;
};

/// Unix seconds for 2019-01-01T00:00:00Z; scenarios without an explicit
/// start_time anchor here so outputs never depend on the wall clock.
inline constexpr double kDefaultStartTimeUnixS = 1546300800.0;

struct Scenario {
  std::string name;
  std::vector<DeviceSpec> devices;
  std::vector<GatewaySpec> gateways;
  geo::ChannelModel channel;
  phy::DutyCyclePolicy duty;
  double duration_s = 0.0;
  std::uint64_t seed = 0;
  int mac_overhead_bytes = 13;
  double start_time_unix_s = kDefaultStartTimeUnixS;
};

struct Transmission {
  double tx_time_s = 0.0;  ///< scenario-relative packet start
  int fcnt = 0;            ///< wraps modulo 2^16
};

struct GatewayOutcome {
  std::string gateway_id;
  double rssi_dbm = 0.0;
  bool received = false;
};

/// One entry per transmission attempt, received or not. The simulator's
/// ground truth for closed-loop checks against the analyzer.
struct GroundTruthEntry {
  std::string device_id;
  int fcnt = 0;
  double tx_time_s = 0.0;
  std::vector<GatewayOutcome> outcomes;  ///< one per gateway, sorted by id
};

struct SimResult {
  std::vector<fieldlog::UplinkRecord> uplinks;      ///< sorted by (tx_time, device_id)
  std::vector<GroundTruthEntry> ground_truth;       ///< same order, all attempts
  std::size_t total_transmissions = 0;
};

/// Deterministic shadowing sample, N(0, sigma_db^2), keyed by
/// (seed, device, fcnt, gateway) rather than draw order so that removing a
/// gateway never perturbs the remaining gateways' draws.
double shadow_draw_db(std::uint64_t seed, std::string_view device_id, int fcnt,
                      std::string_view gateway_id, double sigma_db);

/// Transmission times start_offset + k * interval for k = 0.. while inside
/// the duration. Throws ValidationError when the configured interval is
/// below the duty-cycle minimum for the device's PHY settings.
std::vector<Transmission> schedule_transmissions(const DeviceSpec& dev,
                                                 const phy::DutyCyclePolicy& duty,
                                                 double duration_s,
                                                 int mac_overhead_bytes = 13);

/// Position at time t: piecewise-linear between bracketing waypoints,
/// clamped to the first/last outside their range.
geo::GeoPoint device_position_at(const DeviceSpec& dev, double t_s);

/// Full scenario validation (id uniqueness, ranges, schedule legality).
/// run_scenario performs it before simulating anything.
void validate(const Scenario& s);

/// Runs the uplink path end to end: periodic devices -> independent
/// per-gateway reception decisions -> network-server dedup. Transmissions
/// heard by zero gateways produce no uplink record but always appear in
/// the ground truth. Identical scenarios (including seed) yield
/// byte-identical outputs.
SimResult run_scenario(const Scenario& s);

/// Scenario files are JSON; unknown or missing keys are reported together
/// in one ValidationError. load_scenario_file throws IoError when the file
/// cannot be read.
Scenario scenario_from_json(const std::string& text);
Scenario load_scenario_file(const std::string& path);

/// CSV with header device_id,fcnt,tx_time_s,gateway_id,rssi_dbm,received,
/// one row per (transmission, gateway).
void write_ground_truth_csv(std::span<const GroundTruthEntry> truth, std::ostream& out);

}  // namespace lorakit::sim
