#include "lorakit/fieldlog.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "json.hpp"

#include "lorakit/errors.hpp"

namespace lorakit::fieldlog {

namespace {

using json = nlohmann::ordered_json;

// Civil-date conversions on the proleptic Gregorian calendar
// (Howard Hinnant's algorithm).
std::int64_t days_from_civil(int y, int m, int d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153u * static_cast<unsigned>(m + (m > 2 ? -3 : 9)) + 2u) / 5u +
                       static_cast<unsigned>(d) - 1u;
  const unsigned doe = yoe * 365u + yoe / 4u - yoe / 100u + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, int& y, int& m, int& d) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const std::int64_t yy = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
  m = static_cast<int>(mp + (mp < 10 ? 3 : -9));
  y = static_cast<int>(yy + (m <= 2));
}

bool parse_fixed_uint(std::string_view sv, std::size_t pos, std::size_t len, int& out) {
  if (pos + len > sv.size()) return false;
  int value = 0;
  for (std::size_t i = pos; i < pos + len; ++i) {
    const char c = sv[i];
    if (c < '0' || c > '9') return false;
    value = value * 10 + (c - '0');
  }
  out = value;
  return true;
}

void append_double(std::string& out, double value) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  out.append(buf, res.ptr);
}

void append_csv_field(std::string& out, std::string_view field) {
  if (field.find_first_of(",\"\n") == std::string_view::npos) {
    out.append(field);
    return;
  }
  out.push_back('"');
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
}

json position_to_json(const geo::GeoPoint& p) {
  json j;
  j["lat"] = p.lat_deg;
  j["lon"] = p.lon_deg;
  if (p.alt_m != 0.0) j["alt_m"] = p.alt_m;
  return j;
}

double require_number(const json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end() || !it->is_number()) {
    throw ValidationError(std::string("missing or non-numeric field '") + key + "'");
  }
  return it->get<double>();
}

std::optional<double> optional_number(const json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_number()) {
    throw ValidationError(std::string("field '") + key + "' must be a number");
  }
  return it->get<double>();
}

std::string require_string(const json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end() || !it->is_string() || it->get<std::string>().empty()) {
    throw ValidationError(std::string("missing or empty field '") + key + "'");
  }
  return it->get<std::string>();
}

geo::GeoPoint position_from_json(const json& j, const char* what) {
  if (!j.is_object()) {
    throw ValidationError(std::string(what) + " must be an object with lat/lon");
  }
  geo::GeoPoint p;
  p.lat_deg = require_number(j, "lat");
  p.lon_deg = require_number(j, "lon");
  p.alt_m = optional_number(j, "alt_m").value_or(0.0);
  geo::validate(p);
  return p;
}

UplinkRecord record_from_json_line(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) {
    throw ValidationError("record line must be a JSON object");
  }
  if (const auto it = j.find("schema_version"); it != j.end()) {
    if (!it->is_number_integer() || it->get<int>() != kSchemaVersion) {
      throw ValidationError("unsupported schema_version (expected " +
                            std::to_string(kSchemaVersion) + ")");
    }
  }

  UplinkRecord rec;
  rec.device_id = require_string(j, "device_id");

  const double fcnt = require_number(j, "fcnt");
  if (fcnt < 0 || fcnt > 65535 || fcnt != std::floor(fcnt)) {
    throw ValidationError("fcnt must be an integer in 0..65535");
  }
  rec.fcnt = static_cast<int>(fcnt);

  const double sf = require_number(j, "sf");
  if (sf < 7 || sf > 12 || sf != std::floor(sf)) {
    throw ValidationError("sf must be an integer in 7..12");
  }
  rec.sf = static_cast<int>(sf);

  const double app_bytes = require_number(j, "app_payload_bytes");
  if (app_bytes < 0 || app_bytes != std::floor(app_bytes)) {
    throw ValidationError("app_payload_bytes must be a non-negative integer");
  }
  rec.app_payload_bytes = static_cast<int>(app_bytes);

  const auto receptions_it = j.find("receptions");
  if (receptions_it == j.end() || !receptions_it->is_array() || receptions_it->empty()) {
    throw ValidationError("receptions must be a non-empty array");
  }
  for (const auto& rj : *receptions_it) {
    if (!rj.is_object()) {
      throw ValidationError("each reception must be an object");
    }
    GatewayReception gr;
    gr.gateway_id = require_string(rj, "gateway_id");
    gr.rssi_dbm = require_number(rj, "rssi_dbm");
    if (gr.rssi_dbm < -200.0 || gr.rssi_dbm > 0.0) {
      throw ValidationError("rssi_dbm must be within [-200, 0]");
    }
    gr.snr_db = optional_number(rj, "snr_db");
    gr.rx_time_s = parse_utc(require_string(rj, "rx_time"));
    const bool has_lat = rj.contains("lat") && !rj["lat"].is_null();
    const bool has_lon = rj.contains("lon") && !rj["lon"].is_null();
    if (has_lat != has_lon) {
      throw ValidationError("reception must carry both lat and lon or neither");
    }
    if (has_lat) {
      geo::GeoPoint p;
      p.lat_deg = require_number(rj, "lat");
      p.lon_deg = require_number(rj, "lon");
      p.alt_m = optional_number(rj, "alt_m").value_or(0.0);
      geo::validate(p);
      gr.gateway_position = p;
    }
    rec.receptions.push_back(std::move(gr));
  }

  double min_rx = rec.receptions.front().rx_time_s;
  for (const auto& gr : rec.receptions) min_rx = std::min(min_rx, gr.rx_time_s);
  if (const auto it = j.find("rx_time"); it != j.end()) {
    if (!it->is_string()) throw ValidationError("rx_time must be an ISO-8601 string");
    rec.rx_time_s = parse_utc(it->get<std::string>());
    // allow for millisecond rounding on both sides
    if (std::abs(rec.rx_time_s - min_rx) > 2e-3) {
      throw ValidationError("rx_time is not the earliest reception time");
    }
  } else {
    rec.rx_time_s = min_rx;
  }

  if (const auto it = j.find("device_position"); it != j.end() && !it->is_null()) {
    rec.device_position = position_from_json(*it, "device_position");
  }

  std::string reason;
  if (!validate_record(rec, &reason)) {
    throw ValidationError(reason);
  }
  return rec;
}

json record_to_json(const UplinkRecord& rec) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["device_id"] = rec.device_id;
  j["fcnt"] = rec.fcnt;
  j["rx_time"] = format_utc_ms(rec.rx_time_s);
  j["sf"] = rec.sf;
  j["app_payload_bytes"] = rec.app_payload_bytes;
  if (rec.device_position) {
    j["device_position"] = position_to_json(*rec.device_position);
  }
  json receptions = json::array();
  for (const auto& gr : rec.receptions) {
    json rj;
    rj["gateway_id"] = gr.gateway_id;
    rj["rssi_dbm"] = gr.rssi_dbm;
    if (gr.snr_db) rj["snr_db"] = *gr.snr_db;
    rj["rx_time"] = format_utc_ms(gr.rx_time_s);
    if (gr.gateway_position) {
      rj["lat"] = gr.gateway_position->lat_deg;
      rj["lon"] = gr.gateway_position->lon_deg;
      if (gr.gateway_position->alt_m != 0.0) rj["alt_m"] = gr.gateway_position->alt_m;
    }
    receptions.push_back(std::move(rj));
  }
  j["receptions"] = std::move(receptions);
  return j;
}

bool record_key_less(const UplinkRecord& a, const UplinkRecord& b) {
  if (a.device_id != b.device_id) return a.device_id < b.device_id;
  if (a.fcnt != b.fcnt) return a.fcnt < b.fcnt;
  return a.rx_time_s < b.rx_time_s;
}

bool output_order_less(const UplinkRecord& a, const UplinkRecord& b) {
  if (a.rx_time_s != b.rx_time_s) return a.rx_time_s < b.rx_time_s;
  if (a.device_id != b.device_id) return a.device_id < b.device_id;
  return a.fcnt < b.fcnt;
}

void merge_into(UplinkRecord& dst, UplinkRecord&& src) {
  for (auto& gr : src.receptions) {
    auto existing = std::find_if(dst.receptions.begin(), dst.receptions.end(),
                                 [&](const GatewayReception& g) {
                                   return g.gateway_id == gr.gateway_id;
                                 });
    if (existing == dst.receptions.end()) {
      dst.receptions.push_back(std::move(gr));
    } else if (gr.rssi_dbm > existing->rssi_dbm) {
      *existing = std::move(gr);
    }
  }
  dst.rx_time_s = std::min(dst.rx_time_s, src.rx_time_s);
  if (!dst.device_position && src.device_position) {
    dst.device_position = src.device_position;
  }
}

}  // namespace

std::string format_utc_ms(double unix_s) {
  if (!std::isfinite(unix_s)) {
    throw ValidationError("timestamp must be finite");
  }
  const std::int64_t total_ms = std::llround(unix_s * 1000.0);
  if (total_ms < 0) {
    throw ValidationError("timestamps before 1970-01-01 are not supported");
  }
  const std::int64_t total_s = total_ms / 1000;
  const int ms = static_cast<int>(total_ms % 1000);
  const std::int64_t days = total_s / 86400;
  const int sod = static_cast<int>(total_s % 86400);
  int y, m, d;
  civil_from_days(days, y, m, d);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", y, m, d, sod / 3600,
                (sod / 60) % 60, sod % 60, ms);
  return buf;
}

double parse_utc(std::string_view iso) {
  // YYYY-MM-DDTHH:MM:SS[.fractional]Z
  int year, month, day, hour, minute, second;
  const bool shape_ok =
      iso.size() >= 20 && parse_fixed_uint(iso, 0, 4, year) && iso[4] == '-' &&
      parse_fixed_uint(iso, 5, 2, month) && iso[7] == '-' && parse_fixed_uint(iso, 8, 2, day) &&
      (iso[10] == 'T' || iso[10] == 't') && parse_fixed_uint(iso, 11, 2, hour) &&
      iso[13] == ':' && parse_fixed_uint(iso, 14, 2, minute) && iso[16] == ':' &&
      parse_fixed_uint(iso, 17, 2, second);
  if (!shape_ok) {
    throw ValidationError("malformed ISO-8601 timestamp: " + std::string(iso));
  }
  std::size_t pos = 19;
  double fraction = 0.0;
  if (pos < iso.size() && iso[pos] == '.') {
    ++pos;
    double scale = 0.1;
    bool any = false;
    while (pos < iso.size() && iso[pos] >= '0' && iso[pos] <= '9') {
      fraction += (iso[pos] - '0') * scale;
      scale *= 0.1;
      ++pos;
      any = true;
    }
    if (!any) {
      throw ValidationError("malformed fractional seconds in timestamp: " + std::string(iso));
    }
  }
  if (pos + 1 != iso.size() || (iso[pos] != 'Z' && iso[pos] != 'z')) {
    throw ValidationError("timestamp must be UTC with a 'Z' suffix: " + std::string(iso));
  }
  if (month < 1 || month > 12 || day < 1 || day > 31 || hour > 23 || minute > 59 ||
      second > 60) {
    throw ValidationError("timestamp field out of range: " + std::string(iso));
  }
  const std::int64_t days = days_from_civil(year, month, day);
  const double t =
      static_cast<double>(days) * 86400.0 + hour * 3600.0 + minute * 60.0 + second + fraction;
  if (t < 0.0) {
    throw ValidationError("timestamps before 1970-01-01 are not supported");
  }
  return t;
}

bool validate_record(const UplinkRecord& rec, std::string* reason) {
  const auto fail = [&](std::string why) {
    if (reason) *reason = std::move(why);
    return false;
  };
  if (rec.device_id.empty()) return fail("device_id must not be empty");
  if (rec.fcnt < 0 || rec.fcnt > 65535) return fail("fcnt must be in 0..65535");
  if (rec.sf < 7 || rec.sf > 12) return fail("sf must be in 7..12");
  if (rec.app_payload_bytes < 0) return fail("app_payload_bytes must be >= 0");
  if (rec.receptions.empty()) return fail("receptions must not be empty");
  double min_rx = rec.receptions.front().rx_time_s;
  for (std::size_t i = 0; i < rec.receptions.size(); ++i) {
    const auto& gr = rec.receptions[i];
    if (gr.gateway_id.empty()) return fail("gateway_id must not be empty");
    if (gr.rssi_dbm < -200.0 || gr.rssi_dbm > 0.0) {
      return fail("rssi_dbm must be within [-200, 0]");
    }
    min_rx = std::min(min_rx, gr.rx_time_s);
    for (std::size_t k = i + 1; k < rec.receptions.size(); ++k) {
      if (rec.receptions[k].gateway_id == gr.gateway_id) {
        return fail("duplicate gateway_id '" + gr.gateway_id + "' within one record");
      }
    }
  }
  if (std::abs(rec.rx_time_s - min_rx) > 2e-3) {
    return fail("rx_time is not the earliest reception time");
  }
  return true;
}

ParseResult parse_log(std::istream& in) {
  if (!in) {
    throw IoError("uplink log stream is not readable");
  }
  ParseResult result;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      result.records.push_back(record_from_json_line(line));
    } catch (const ValidationError& e) {
      result.diagnostics.push_back({lineno, e.what()});
    }
  }
  if (in.bad()) {
    throw IoError("I/O failure while reading uplink log");
  }
  return result;
}

ParseResult parse_log_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open uplink log: " + path);
  }
  return parse_log(in);
}

std::vector<UplinkRecord> merge_duplicates(std::vector<UplinkRecord> records) {
  std::sort(records.begin(), records.end(), record_key_less);

  std::vector<UplinkRecord> merged;
  merged.reserve(records.size());
  for (auto& rec : records) {
    const bool same_group = !merged.empty() && merged.back().device_id == rec.device_id &&
                            merged.back().fcnt == rec.fcnt &&
                            rec.rx_time_s - merged.back().rx_time_s <= kMergeWindowS;
    if (same_group) {
      merge_into(merged.back(), std::move(rec));
    } else {
      merged.push_back(std::move(rec));
    }
  }
  for (auto& rec : merged) {
    std::sort(rec.receptions.begin(), rec.receptions.end(),
              [](const GatewayReception& a, const GatewayReception& b) {
                return a.gateway_id < b.gateway_id;
              });
  }
  std::sort(merged.begin(), merged.end(), output_order_less);
  return merged;
}

void write_log(std::span<const UplinkRecord> records, std::ostream& out) {
  for (const auto& rec : records) {
    out << record_to_json(rec).dump() << '\n';
  }
  if (!out) {
    throw IoError("I/O failure while writing uplink log");
  }
}

void write_log_file(std::span<const UplinkRecord> records, const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw IoError("cannot open for writing: " + path);
  }
  write_log(records, out);
}

void write_csv(std::span<const UplinkRecord> records, std::ostream& out) {
  std::string buf = "device_id,fcnt,rx_time,sf,gateway_id,rssi_dbm,snr_db,distance_m\n";
  for (const auto& rec : records) {
    const std::string rx_time = format_utc_ms(rec.rx_time_s);
    for (const auto& gr : rec.receptions) {
      append_csv_field(buf, rec.device_id);
      buf.push_back(',');
      buf.append(std::to_string(rec.fcnt));
      buf.push_back(',');
      buf.append(rx_time);
      buf.push_back(',');
      buf.append(std::to_string(rec.sf));
      buf.push_back(',');
      append_csv_field(buf, gr.gateway_id);
      buf.push_back(',');
      append_double(buf, gr.rssi_dbm);
      buf.push_back(',');
      if (gr.snr_db) append_double(buf, *gr.snr_db);
      buf.push_back(',');
      if (rec.device_position && gr.gateway_position) {
        append_double(buf, geo::haversine_m(*rec.device_position, *gr.gateway_position));
      }
      buf.push_back('\n');
    }
  }
  out << buf;
  if (!out) {
    throw IoError("I/O failure while writing CSV");
  }
}

GatewayRegistry load_registry_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open gateway registry: " + path);
  }
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("gateway registry: invalid JSON: ") + e.what());
  }
  if (!j.is_object()) {
    throw ValidationError("gateway registry must be a JSON object of id -> position");
  }
  GatewayRegistry registry;
  for (const auto& [id, pos] : j.items()) {
    if (id.empty()) {
      throw ValidationError("gateway registry: empty gateway id");
    }
    registry[id] = position_from_json(pos, ("registry entry '" + id + "'").c_str());
  }
  return registry;
}

}  // namespace lorakit::fieldlog
