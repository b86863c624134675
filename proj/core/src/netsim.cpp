#include "lorakit/netsim.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <ostream>
#include <set>
#include <sstream>
#include <unordered_set>

#include "json.hpp"

#include "lorakit/errors.hpp"

namespace lorakit::sim {

namespace {

using json = nlohmann::ordered_json;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

double unit_from_bits(std::uint64_t x) {
  // 53 mantissa bits -> [0, 1)
  return static_cast<double>(x >> 11) * 0x1.0p-53;
}

phy::PhyParams device_phy(const DeviceSpec& dev, int mac_overhead_bytes) {
  return phy::eu868_uplink_params(dev.sf, dev.app_payload_bytes + mac_overhead_bytes);
}

void validate_device(const DeviceSpec& dev) {
  if (dev.device_id.empty()) {
    throw ValidationError("device_id must not be empty");
  }
  if (dev.path.empty()) {
    throw ValidationError("device '" + dev.device_id + "': position or waypoints required");
  }
  for (std::size_t i = 0; i < dev.path.size(); ++i) {
    geo::validate(dev.path[i].point);
    if (i > 0 && !(dev.path[i].t_s > dev.path[i - 1].t_s)) {
      throw ValidationError("device '" + dev.device_id +
                            "': waypoint times must be strictly increasing");
    }
  }
  if (dev.app_payload_bytes < 0) {
    throw ValidationError("device '" + dev.device_id + "': app_payload_bytes must be >= 0");
  }
  if (!(dev.interval_s > 0.0)) {
    throw ValidationError("device '" + dev.device_id + "': interval_s must be > 0");
  }
  if (!(dev.start_offset_s >= 0.0)) {
    throw ValidationError("device '" + dev.device_id + "': start_offset_s must be >= 0");
  }
}

std::string format_interval(double seconds) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", seconds);
  return buf;
}

void append_double(std::string& out, double value) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  out.append(buf, res.ptr);
}

// --- scenario JSON -----------------------------------------------------

void check_keys(const json& j, std::initializer_list<const char*> allowed,
                const std::string& where, std::vector<std::string>& problems) {
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (std::find_if(allowed.begin(), allowed.end(),
                     [&](const char* a) { return key == a; }) == allowed.end()) {
      problems.push_back(where + ": unknown key '" + key + "'");
    }
  }
}

const json* get_required(const json& j, const char* key, const std::string& where,
                         std::vector<std::string>& problems) {
  const auto it = j.find(key);
  if (it == j.end()) {
    problems.push_back(where + ": missing key '" + key + "'");
    return nullptr;
  }
  return &*it;
}

bool read_number(const json& j, const char* key, const std::string& where, double& out,
                 std::vector<std::string>& problems, bool required,
                 double default_value = 0.0) {
  const auto it = j.find(key);
  if (it == j.end()) {
    if (required) problems.push_back(where + ": missing key '" + key + "'");
    out = default_value;
    return !required;
  }
  if (!it->is_number()) {
    problems.push_back(where + ": key '" + key + "' must be a number");
    out = default_value;
    return false;
  }
  out = it->get<double>();
  return true;
}

geo::GeoPoint read_position(const json& j, const std::string& where,
                            std::vector<std::string>& problems) {
  geo::GeoPoint p;
  if (!j.is_object()) {
    problems.push_back(where + ": must be an object with lat/lon");
    return p;
  }
  check_keys(j, {"lat", "lon", "alt_m"}, where, problems);
  read_number(j, "lat", where, p.lat_deg, problems, true);
  read_number(j, "lon", where, p.lon_deg, problems, true);
  read_number(j, "alt_m", where, p.alt_m, problems, false, 0.0);
  return p;
}

geo::ChannelModel read_channel(const json& j, std::vector<std::string>& problems) {
  geo::ChannelModel model;
  const std::string where = "channel";
  if (!j.is_object()) {
    problems.push_back(where + ": must be an object");
    return model;
  }
  check_keys(j,
             {"ref_distance_m", "ref_loss_db", "exponent", "shadowing_sigma_db",
              "tx_power_dbm", "antenna_gains_db", "sensitivity_dbm"},
             where, problems);
  read_number(j, "ref_distance_m", where, model.ref_distance_m, problems, false, 1000.0);
  read_number(j, "ref_loss_db", where, model.ref_loss_db, problems, false, 128.95);
  read_number(j, "exponent", where, model.exponent, problems, false, 2.32);
  read_number(j, "shadowing_sigma_db", where, model.shadowing_sigma_db, problems, false, 6.0);
  read_number(j, "tx_power_dbm", where, model.tx_power_dbm, problems, false, 14.0);
  read_number(j, "antenna_gains_db", where, model.antenna_gains_db, problems, false, 0.0);
  if (const auto it = j.find("sensitivity_dbm"); it != j.end()) {
    if (!it->is_object()) {
      problems.push_back(where + ": sensitivity_dbm must map sf -> dBm");
    } else {
      std::map<int, double> table;
      for (const auto& [key, value] : it->items()) {
        int sf = 0;
        const auto res = std::from_chars(key.data(), key.data() + key.size(), sf);
        if (res.ec != std::errc{} || res.ptr != key.data() + key.size() ||
            !value.is_number()) {
          problems.push_back(where + ": bad sensitivity_dbm entry '" + key + "'");
          continue;
        }
        table[sf] = value.get<double>();
      }
      model.sensitivity_dbm = std::move(table);
    }
  }
  return model;
}

DeviceSpec read_device(const json& j, std::size_t index, std::vector<std::string>& problems) {
  DeviceSpec dev;
  const std::string where = "devices[" + std::to_string(index) + "]";
  if (!j.is_object()) {
    problems.push_back(where + ": must be an object");
    return dev;
  }
  check_keys(j,
             {"device_id", "sf", "app_payload_bytes", "interval_s", "start_offset_s",
              "gain_offset_db", "position", "waypoints"},
             where, problems);
  if (const json* id = get_required(j, "device_id", where, problems)) {
    if (id->is_string()) {
      dev.device_id = id->get<std::string>();
    } else {
      problems.push_back(where + ": device_id must be a string");
    }
  }
  double value = 0.0;
  if (read_number(j, "sf", where, value, problems, true)) dev.sf = static_cast<int>(value);
  if (read_number(j, "app_payload_bytes", where, value, problems, true)) {
    dev.app_payload_bytes = static_cast<int>(value);
  }
  read_number(j, "interval_s", where, dev.interval_s, problems, true);
  read_number(j, "start_offset_s", where, dev.start_offset_s, problems, false, 0.0);
  read_number(j, "gain_offset_db", where, dev.gain_offset_db, problems, false, 0.0);

  const bool has_position = j.contains("position");
  const bool has_waypoints = j.contains("waypoints");
  if (has_position == has_waypoints) {
    problems.push_back(where + ": exactly one of 'position' or 'waypoints' is required");
    return dev;
  }
  if (has_position) {
    dev.path.push_back({0.0, read_position(j["position"], where + ".position", problems)});
  } else {
    const json& wps = j["waypoints"];
    if (!wps.is_array() || wps.empty()) {
      problems.push_back(where + ": waypoints must be a non-empty array");
      return dev;
    }
    for (std::size_t i = 0; i < wps.size(); ++i) {
      const std::string wp_where = where + ".waypoints[" + std::to_string(i) + "]";
      const json& wj = wps[i];
      if (!wj.is_object()) {
        problems.push_back(wp_where + ": must be an object");
        continue;
      }
      check_keys(wj, {"t_s", "lat", "lon", "alt_m"}, wp_where, problems);
      Waypoint wp;
      read_number(wj, "t_s", wp_where, wp.t_s, problems, true);
      read_number(wj, "lat", wp_where, wp.point.lat_deg, problems, true);
      read_number(wj, "lon", wp_where, wp.point.lon_deg, problems, true);
      read_number(wj, "alt_m", wp_where, wp.point.alt_m, problems, false, 0.0);
      dev.path.push_back(wp);
    }
  }
  return dev;
}

GatewaySpec read_gateway(const json& j, std::size_t index, std::vector<std::string>& problems) {
  GatewaySpec gw;
  const std::string where = "gateways[" + std::to_string(index) + "]";
  if (!j.is_object()) {
    problems.push_back(where + ": must be an object");
    return gw;
  }
  check_keys(j, {"gateway_id", "position", "gain_offset_db"}, where, problems);
  if (const json* id = get_required(j, "gateway_id", where, problems)) {
    if (id->is_string()) {
      gw.gateway_id = id->get<std::string>();
    } else {
      problems.push_back(where + ": gateway_id must be a string");
    }
  }
  if (const json* pos = get_required(j, "position", where, problems)) {
    gw.position = read_position(*pos, where + ".position", problems);
  }
  read_number(j, "gain_offset_db", where, gw.gain_offset_db, problems, false, 0.0);
  return gw;
}

}  // namespace

double shadow_draw_db(std::uint64_t seed, std::string_view device_id, int fcnt,
                      std::string_view gateway_id, double sigma_db) {
  std::uint64_t h = splitmix64(seed ^ fnv1a(device_id));
  h = splitmix64(h ^ static_cast<std::uint64_t>(fcnt));
  h = splitmix64(h ^ fnv1a(gateway_id));
  const double u1 = unit_from_bits(splitmix64(h));
  const double u2 = unit_from_bits(splitmix64(h ^ 0xD1B54A32D192ED03ull));
  // Box-Muller; 1 - u1 lies in (0, 1] so the log stays finite
  const double z =
      std::sqrt(-2.0 * std::log(1.0 - u1)) * std::cos(2.0 * std::numbers::pi * u2);
  return sigma_db * z;
}

std::vector<Transmission> schedule_transmissions(const DeviceSpec& dev,
                                                 const phy::DutyCyclePolicy& duty,
                                                 double duration_s, int mac_overhead_bytes) {
  validate_device(dev);
  phy::validate(duty);
  if (!(duration_s > 0.0)) {
    throw ValidationError("duration_s must be > 0");
  }
  const double min_interval = phy::min_interval_s(device_phy(dev, mac_overhead_bytes), duty);
  if (dev.interval_s < min_interval - 1e-9) {
    throw ValidationError("device '" + dev.device_id + "': interval " +
                          format_interval(dev.interval_s) +
                          " s is below the duty-cycle minimum of " +
                          format_interval(min_interval) + " s");
  }
  std::vector<Transmission> out;
  if (dev.start_offset_s < duration_s) {
    out.reserve(static_cast<std::size_t>((duration_s - dev.start_offset_s) / dev.interval_s) + 1);
  }
  for (std::size_t k = 0;; ++k) {
    const double t = dev.start_offset_s + static_cast<double>(k) * dev.interval_s;
    if (t >= duration_s) break;
    out.push_back({t, static_cast<int>(k % 65536)});
  }
  return out;
}

geo::GeoPoint device_position_at(const DeviceSpec& dev, double t_s) {
  if (dev.path.empty()) {
    throw ValidationError("device '" + dev.device_id + "' has no position");
  }
  const auto& path = dev.path;
  if (path.size() == 1 || t_s <= path.front().t_s) return path.front().point;
  if (t_s >= path.back().t_s) return path.back().point;

  const auto after = std::upper_bound(
      path.begin(), path.end(), t_s,
      [](double t, const Waypoint& wp) { return t < wp.t_s; });
  const auto& hi = *after;
  const auto& lo = *std::prev(after);
  const double f = (t_s - lo.t_s) / (hi.t_s - lo.t_s);
  geo::GeoPoint p;
  p.lat_deg = lo.point.lat_deg + f * (hi.point.lat_deg - lo.point.lat_deg);
  p.lon_deg = lo.point.lon_deg + f * (hi.point.lon_deg - lo.point.lon_deg);
  p.alt_m = lo.point.alt_m + f * (hi.point.alt_m - lo.point.alt_m);
  return p;
}

void validate(const Scenario& s) {
  if (!(s.duration_s > 0.0)) {
    throw ValidationError("scenario: duration_s must be > 0");
  }
  if (s.mac_overhead_bytes < 0) {
    throw ValidationError("scenario: mac_overhead_bytes must be >= 0");
  }
  if (!(s.start_time_unix_s >= 0.0)) {
    throw ValidationError("scenario: start_time must not precede 1970-01-01");
  }
  geo::validate(s.channel);
  phy::validate(s.duty);

  std::unordered_set<std::string> ids;
  for (const auto& gw : s.gateways) {
    if (gw.gateway_id.empty()) {
      throw ValidationError("scenario: gateway_id must not be empty");
    }
    geo::validate(gw.position);
    if (!ids.insert(gw.gateway_id).second) {
      throw ValidationError("scenario: duplicate gateway_id '" + gw.gateway_id + "'");
    }
  }
  ids.clear();
  for (const auto& dev : s.devices) {
    validate_device(dev);
    if (!ids.insert(dev.device_id).second) {
      throw ValidationError("scenario: duplicate device_id '" + dev.device_id + "'");
    }
    // also checks the duty-cycle minimum for the device's PHY settings
    const double min_interval =
        phy::min_interval_s(device_phy(dev, s.mac_overhead_bytes), s.duty);
    if (dev.interval_s < min_interval - 1e-9) {
      throw ValidationError("device '" + dev.device_id + "': interval " +
                            format_interval(dev.interval_s) +
                            " s is below the duty-cycle minimum of " +
                            format_interval(min_interval) + " s");
    }
  }
}

SimResult run_scenario(const Scenario& s) {
  validate(s);

  struct Pending {
    double tx_time_s;
    std::string device_id;
    fieldlog::UplinkRecord record;
  };
  std::vector<Pending> pending;
  SimResult result;

  for (const auto& dev : s.devices) {
    const auto txs = schedule_transmissions(dev, s.duty, s.duration_s, s.mac_overhead_bytes);
    const double toa = phy::time_on_air_s(device_phy(dev, s.mac_overhead_bytes));
    for (const auto& tx : txs) {
      const geo::GeoPoint pos = device_position_at(dev, tx.tx_time_s);
      const double rx_abs = s.start_time_unix_s + tx.tx_time_s + toa;

      GroundTruthEntry truth;
      truth.device_id = dev.device_id;
      truth.fcnt = tx.fcnt;
      truth.tx_time_s = tx.tx_time_s;

      fieldlog::UplinkRecord rec;
      rec.device_id = dev.device_id;
      rec.fcnt = tx.fcnt;
      rec.app_payload_bytes = dev.app_payload_bytes;
      rec.sf = dev.sf;
      rec.rx_time_s = rx_abs;
      rec.device_position = pos;

      for (const auto& gw : s.gateways) {
        const double distance = geo::haversine_m(pos, gw.position);
        const double draw = shadow_draw_db(s.seed, dev.device_id, tx.fcnt, gw.gateway_id,
                                           s.channel.shadowing_sigma_db);
        const geo::LinkSample link = geo::receive_decision(
            s.channel, dev.sf, distance, draw, dev.gain_offset_db + gw.gain_offset_db);
        truth.outcomes.push_back({gw.gateway_id, link.rssi_dbm, link.received});
        if (link.received) {
          fieldlog::GatewayReception gr;
          gr.gateway_id = gw.gateway_id;
          gr.rssi_dbm = link.rssi_dbm;
          gr.rx_time_s = rx_abs;
          gr.gateway_position = gw.position;
          rec.receptions.push_back(std::move(gr));
        }
      }
      std::sort(truth.outcomes.begin(), truth.outcomes.end(),
                [](const GatewayOutcome& a, const GatewayOutcome& b) {
                  return a.gateway_id < b.gateway_id;
                });
      std::sort(rec.receptions.begin(), rec.receptions.end(),
                [](const fieldlog::GatewayReception& a, const fieldlog::GatewayReception& b) {
                  return a.gateway_id < b.gateway_id;
                });
      ++result.total_transmissions;
      if (!rec.receptions.empty()) {
        pending.push_back({tx.tx_time_s, dev.device_id, std::move(rec)});
      }
      result.ground_truth.push_back(std::move(truth));
    }
  }

  std::sort(pending.begin(), pending.end(), [](const Pending& a, const Pending& b) {
    if (a.tx_time_s != b.tx_time_s) return a.tx_time_s < b.tx_time_s;
    return a.device_id < b.device_id;
  });
  std::sort(result.ground_truth.begin(), result.ground_truth.end(),
            [](const GroundTruthEntry& a, const GroundTruthEntry& b) {
              if (a.tx_time_s != b.tx_time_s) return a.tx_time_s < b.tx_time_s;
              return a.device_id < b.device_id;
            });
  result.uplinks.reserve(pending.size());
  for (auto& p : pending) {
    result.uplinks.push_back(std::move(p.record));
  }
  return result;
}

Scenario scenario_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("scenario: invalid JSON: ") + e.what());
  }
  if (!j.is_object()) {
    throw ValidationError("scenario: top level must be a JSON object");
  }

  std::vector<std::string> problems;
  check_keys(j,
             {"name", "description", "start_time", "duration_s", "seed",
              "mac_overhead_bytes", "duty_cycle", "channel", "gateways", "devices"},
             "scenario", problems);

  Scenario s;
  if (const auto it = j.find("name"); it != j.end() && it->is_string()) {
    s.name = it->get<std::string>();
  }
  read_number(j, "duration_s", "scenario", s.duration_s, problems, true);

  if (const json* seed = get_required(j, "seed", "scenario", problems)) {
    if (seed->is_number_unsigned() || seed->is_number_integer()) {
      s.seed = seed->get<std::uint64_t>();
    } else {
      problems.push_back("scenario: seed must be an integer");
    }
  }
  double value = 0.0;
  if (read_number(j, "mac_overhead_bytes", "scenario", value, problems, false, 13.0)) {
    s.mac_overhead_bytes = static_cast<int>(value);
  }
  read_number(j, "duty_cycle", "scenario", s.duty.duty_cycle, problems, false, 0.01);
  if (const auto it = j.find("start_time"); it != j.end()) {
    if (!it->is_string()) {
      problems.push_back("scenario: start_time must be an ISO-8601 string");
    } else {
      try {
        s.start_time_unix_s = fieldlog::parse_utc(it->get<std::string>());
      } catch (const ValidationError& e) {
        problems.push_back(std::string("scenario: ") + e.what());
      }
    }
  }
  if (const auto it = j.find("channel"); it != j.end()) {
    s.channel = read_channel(*it, problems);
  }
  if (const json* gws = get_required(j, "gateways", "scenario", problems)) {
    if (gws->is_array()) {
      for (std::size_t i = 0; i < gws->size(); ++i) {
        s.gateways.push_back(read_gateway((*gws)[i], i, problems));
      }
    } else {
      problems.push_back("scenario: gateways must be an array");
    }
  }
  if (const json* devs = get_required(j, "devices", "scenario", problems)) {
    if (devs->is_array()) {
      for (std::size_t i = 0; i < devs->size(); ++i) {
        s.devices.push_back(read_device((*devs)[i], i, problems));
      }
    } else {
      problems.push_back("scenario: devices must be an array");
    }
  }

  if (!problems.empty()) {
    std::string message = "scenario schema violation:";
    for (const auto& p : problems) {
      message += "\n  - " + p;
    }
    throw ValidationError(message);
  }
  validate(s);
  return s;
}

Scenario load_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open scenario file: " + path);
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  if (in.bad()) {
    throw IoError("I/O failure while reading scenario file: " + path);
  }
  return scenario_from_json(buffer.str());
}

void write_ground_truth_csv(std::span<const GroundTruthEntry> truth, std::ostream& out) {
  std::string buf = "device_id,fcnt,tx_time_s,gateway_id,rssi_dbm,received\n";
  for (const auto& entry : truth) {
    for (const auto& outcome : entry.outcomes) {
      buf.append(entry.device_id);
      buf.push_back(',');
      buf.append(std::to_string(entry.fcnt));
      buf.push_back(',');
      append_double(buf, entry.tx_time_s);
      buf.push_back(',');
      buf.append(outcome.gateway_id);
      buf.push_back(',');
      append_double(buf, outcome.rssi_dbm);
      buf.push_back(',');
      buf.push_back(outcome.received ? '1' : '0');
      buf.push_back('\n');
    }
  }
  out << buf;
  if (!out) {
    throw IoError("I/O failure while writing ground truth CSV");
  }
}

}  // namespace lorakit::sim
