#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lorakit/geo.hpp"

namespace lorakit::fieldlog {

/// Uplink log schema version written/accepted by this build.
inline constexpr int kSchemaVersion = 1;

/// Two records of the same (device, fcnt) merge only when their receive
/// times are this close. Far above multi-gateway skew, far below any legal
/// retransmission interval.
inline constexpr double kMergeWindowS = 2.0;

struct GatewayReception {
  std::string gateway_id;
  double rssi_dbm = 0.0;              ///< [-200, 0]
  std::optional<double> snr_db;
  double rx_time_s = 0.0;             ///< unix seconds, UTC
  std::optional<geo::GeoPoint> gateway_position;

  friend bool operator==(const GatewayReception&, const GatewayReception&) = default;
};

/// One deduplicated uplink message with its per-gateway reception list.
/// The unit of both simulator output and analyzer input.
struct UplinkRecord {
  std::string device_id;
  int fcnt = 0;                       ///< 16-bit frame counter, 0..65535
  int app_payload_bytes = 0;
  int sf = 7;
  double rx_time_s = 0.0;             ///< earliest gateway time, unix seconds
  std::vector<GatewayReception> receptions;  ///< non-empty, unique gateway ids
  std::optional<geo::GeoPoint> device_position;

  friend bool operator==(const UplinkRecord&, const UplinkRecord&) = default;
};

using GatewayRegistry = std::map<std::string, geo::GeoPoint>;

struct Diagnostic {
  std::size_t line = 0;
  std::string reason;

  friend bool operator==(const Diagnostic&, const Diagnostic&) = default;
};

struct ParseResult {
  std::vector<UplinkRecord> records;
  std::vector<Diagnostic> diagnostics;
};

/// Formats unix seconds as ISO-8601 UTC with milliseconds
/// (e.g. "2019-05-10T09:30:01.250Z"). Times before 1970 are rejected.
std::string format_utc_ms(double unix_s);

/// Parses ISO-8601 UTC ("...Z", optional fractional seconds).
/// Throws ValidationError on malformed input.
double parse_utc(std::string_view iso);

/// Checks the UplinkRecord invariants; on failure returns false and, when
/// given, stores the first violation in reason.
bool validate_record(const UplinkRecord& record, std::string* reason = nullptr);

/// Reads a JSON-Lines uplink log. Lines that fail schema validation are
/// skipped and reported as diagnostics (line number + reason); they are
/// never silently dropped. Unknown fields on valid lines are ignored so
/// adapted exports from real networks pass through. Throws IoError when
/// the stream itself fails.
ParseResult parse_log(std::istream& in);
ParseResult parse_log_file(const std::string& path);

/// Network-server style dedup for raw per-gateway exports: records sharing
/// (device_id, fcnt) with rx_time within kMergeWindowS merge into one
/// record. Reception lists union by gateway_id keeping the strongest RSSI,
/// rx_time becomes the minimum. Idempotent and order-independent; output
/// is sorted by (rx_time, device_id, fcnt) with receptions sorted by
/// gateway id.
std::vector<UplinkRecord> merge_duplicates(std::vector<UplinkRecord> records);

/// Writes records as JSON-Lines (one record per line, schema above).
void write_log(std::span<const UplinkRecord> records, std::ostream& out);
void write_log_file(std::span<const UplinkRecord> records, const std::string& path);

/// Flattens records to CSV, one row per (record, reception), with header
/// device_id,fcnt,rx_time,sf,gateway_id,rssi_dbm,snr_db,distance_m.
/// distance_m is filled when both device and gateway positions are known.
void write_csv(std::span<const UplinkRecord> records, std::ostream& out);

/// Loads a gateway registry file: a JSON object mapping gateway id to
/// {"lat": .., "lon": .., "alt_m": ..}.
GatewayRegistry load_registry_file(const std::string& path);

}  // namespace lorakit::fieldlog
