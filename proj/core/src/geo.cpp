#include "lorakit/geo.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "lorakit/errors.hpp"

namespace lorakit::geo {

namespace {

double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }

}  // namespace

void validate(const GeoPoint& p) {
  if (!std::isfinite(p.lat_deg) || p.lat_deg < -90.0 || p.lat_deg > 90.0) {
    throw ValidationError("lat_deg must be in [-90, 90], got " + std::to_string(p.lat_deg));
  }
  if (!std::isfinite(p.lon_deg) || p.lon_deg <= -180.0 || p.lon_deg > 180.0) {
    throw ValidationError("lon_deg must be in (-180, 180], got " + std::to_string(p.lon_deg));
  }
  if (!std::isfinite(p.alt_m)) {
    throw ValidationError("alt_m must be finite");
  }
}

double haversine_m(const GeoPoint& a, const GeoPoint& b) {
  validate(a);
  validate(b);
  const double lat1 = deg_to_rad(a.lat_deg);
  const double lat2 = deg_to_rad(b.lat_deg);
  const double dlat = lat2 - lat1;
  const double dlon = deg_to_rad(b.lon_deg - a.lon_deg);

  const double sin_dlat = std::sin(dlat / 2.0);
  const double sin_dlon = std::sin(dlon / 2.0);
  const double h = sin_dlat * sin_dlat + std::cos(lat1) * std::cos(lat2) * sin_dlon * sin_dlon;
  const double c = 2.0 * std::atan2(std::sqrt(h), std::sqrt(1.0 - h));
  return kEarthRadiusM * c;
}

void validate(const ChannelModel& m) {
  if (!(m.ref_distance_m > 0.0)) {
    throw ValidationError("ref_distance_m must be > 0");
  }
  if (!(m.exponent > 0.0)) {
    throw ValidationError("path-loss exponent must be > 0");
  }
  if (!(m.shadowing_sigma_db >= 0.0)) {
    throw ValidationError("shadowing_sigma_db must be >= 0");
  }
  if (m.sensitivity_dbm.empty()) {
    throw ValidationError("sensitivity_dbm table must not be empty");
  }
  double prev = 0.0;
  bool first = true;
  for (const auto& [sf, dbm] : m.sensitivity_dbm) {
    if (sf < 7 || sf > 12) {
      throw ValidationError("sensitivity_dbm has sf outside 7..12: " + std::to_string(sf));
    }
    if (!first && dbm >= prev) {
      throw ValidationError("sensitivity_dbm must be strictly decreasing in sf");
    }
    prev = dbm;
    first = false;
  }
}

double path_loss_db(const ChannelModel& m, double distance_m) {
  validate(m);
  if (!std::isfinite(distance_m) || distance_m < 0.0) {
    throw ValidationError("distance_m must be >= 0, got " + std::to_string(distance_m));
  }
  if (distance_m < m.ref_distance_m) {
    return m.ref_loss_db;
  }
  return m.ref_loss_db + 10.0 * m.exponent * std::log10(distance_m / m.ref_distance_m);
}

LinkSample receive_decision(const ChannelModel& m, int sf, double distance_m,
                            double shadow_draw_db, double extra_gain_db) {
  const auto it = m.sensitivity_dbm.find(sf);
  if (it == m.sensitivity_dbm.end()) {
    throw ValidationError("no sensitivity entry for sf " + std::to_string(sf));
  }
  const double loss = path_loss_db(m, distance_m);
  LinkSample sample;
  sample.rssi_dbm = m.tx_power_dbm + m.antenna_gains_db + extra_gain_db - loss - shadow_draw_db;
  sample.margin_db = sample.rssi_dbm - it->second;
  sample.received = sample.margin_db >= 0.0;
  return sample;
}

}  // namespace lorakit::geo
