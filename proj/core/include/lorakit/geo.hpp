#pragma once

#include <map>

namespace lorakit::geo {

inline constexpr double kEarthRadiusM = 6371000.0;

struct GeoPoint {
  double lat_deg = 0.0;  ///< [-90, 90]
  double lon_deg = 0.0;  ///< (-180, 180]
  double alt_m = 0.0;

  friend bool operator==(const GeoPoint&, const GeoPoint&) = default;
};

void validate(const GeoPoint& p);

/// Great-circle distance in meters (haversine, spherical earth).
double haversine_m(const GeoPoint& a, const GeoPoint& b);

/// Log-distance path loss with log-normal shadowing, plus the link budget
/// inputs and per-SF receiver sensitivity used for reception decisions.
/// Defaults describe a dense-urban fit at 868 MHz; every field is a knob,
/// scenario files are expected to override them per environment.
struct ChannelModel {
  double ref_distance_m = 1000.0;
  double ref_loss_db = 128.95;      ///< loss at ref_distance_m
  double exponent = 2.32;           ///< path-loss exponent
  double shadowing_sigma_db = 6.0;  ///< std dev of the shadowing term
  double tx_power_dbm = 14.0;
  double antenna_gains_db = 0.0;
  /// SX127x-class sensitivity at BW 125 kHz, dBm per SF.
  std::map<int, double> sensitivity_dbm = {
      {7, -123.0}, {8, -126.0}, {9, -129.0}, {10, -132.0}, {11, -134.5}, {12, -137.0}};

  friend bool operator==(const ChannelModel&, const ChannelModel&) = default;
};

void validate(const ChannelModel& model);

/// Mean path loss in dB at the given distance. Distances inside the
/// reference distance clamp to ref_loss_db; negative distances are invalid.
double path_loss_db(const ChannelModel& model, double distance_m);

struct LinkSample {
  double rssi_dbm = 0.0;
  double margin_db = 0.0;  ///< rssi - sensitivity[sf]
  bool received = false;
};

/// One per-gateway reception decision.
///
/// shadow_draw_db must be a zero-mean normal sample already scaled by
/// shadowing_sigma_db; the caller owns the randomness so results stay
/// reproducible. extra_gain_db folds in per-node gain offsets
/// (device + gateway) on top of the model's antenna_gains_db.
LinkSample receive_decision(const ChannelModel& model, int sf, double distance_m,
                            double shadow_draw_db, double extra_gain_db = 0.0);

}  // namespace lorakit::geo
