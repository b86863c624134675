#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lorakit/fieldlog.hpp"
#include "lorakit/geo.hpp"

namespace lorakit::metrics {

/// Per-message gateway counts aggregated per device and overall.
struct ReachRow {
  std::string device_id;  ///< "overall" for the pooled row
  std::size_t messages = 0;
  int min_gateways = 0;
  double mean_gateways = 0.0;
  int max_gateways = 0;

  friend bool operator==(const ReachRow&, const ReachRow&) = default;
};

struct GatewayReachStats {
  std::vector<ReachRow> per_device;  ///< sorted by device_id
  std::optional<ReachRow> overall;   ///< empty on an empty log

  friend bool operator==(const GatewayReachStats&, const GatewayReachStats&) = default;
};

/// Fraction of observed messages a gateway received, against its distance
/// from the device set's reference position. The denominator is messages
/// observed network-wide (union over gateways), not messages sent - real
/// logs carry no send counts.
struct GatewayShareRow {
  std::string gateway_id;
  std::optional<double> distance_m;  ///< empty when the position is unknown
  double share = 0.0;                ///< [0, 1]
  std::size_t messages = 0;          ///< messages containing this gateway

  friend bool operator==(const GatewayShareRow&, const GatewayShareRow&) = default;
};

struct ShareResult {
  std::vector<GatewayShareRow> rows;  ///< sorted by distance, unknowns last
  std::vector<std::string> diagnostics;

  friend bool operator==(const ShareResult&, const ShareResult&) = default;
};

struct CdfBin {
  int k = 0;                        ///< interval index, 1-based
  double cumulative_fraction = 0.0;

  friend bool operator==(const CdfBin&, const CdfBin&) = default;
};

/// Distribution of per-device inter-arrival gaps in units of the target
/// interval. Gap index k = max(1, ceil((delta - guard) / target)); the
/// guard absorbs scheduler jitter so a slightly-late message still counts
/// as "received in the 1st interval".
struct InterArrivalCdf {
  double target_interval_s = 0.0;
  double guard_s = 0.0;
  std::size_t samples = 0;
  std::vector<CdfBin> bins;  ///< k = 1..max observed, cumulative, ends at 1

  friend bool operator==(const InterArrivalCdf&, const InterArrivalCdf&) = default;
};

/// Frame-counter based loss accounting: expected = unrolled fcnt span + 1,
/// received = distinct frame counts inside the window.
struct LossRow {
  std::string device_id;  ///< "overall" for the pooled row
  std::uint64_t expected = 0;
  std::uint64_t received = 0;
  double loss = 0.0;  ///< [0, 1]

  friend bool operator==(const LossRow&, const LossRow&) = default;
};

struct LossReport {
  std::vector<LossRow> per_device;  ///< sorted by device_id
  std::optional<LossRow> overall;   ///< weighted by expected counts
  std::vector<std::string> diagnostics;

  friend bool operator==(const LossReport&, const LossReport&) = default;
};

/// Optional fallback for devices whose records carry no position.
using DevicePositionResolver =
    std::function<std::optional<geo::GeoPoint>(const std::string& device_id)>;

GatewayReachStats gateway_reach(std::span<const fieldlog::UplinkRecord> records);

ShareResult gateway_share(std::span<const fieldlog::UplinkRecord> records,
                          const fieldlog::GatewayRegistry& registry,
                          const DevicePositionResolver& resolver = {});

InterArrivalCdf interarrival_cdf(std::span<const fieldlog::UplinkRecord> records,
                                 double target_interval_s,
                                 double guard_fraction = 0.1);

LossReport loss(std::span<const fieldlog::UplinkRecord> records);

struct ReportConfig {
  double target_interval_s = 30.0;
  double interarrival_guard_fraction = 0.1;
  fieldlog::GatewayRegistry registry;
  DevicePositionResolver device_position_resolver;
};

struct MetricsReport {
  GatewayReachStats reach;
  ShareResult share;
  InterArrivalCdf interarrival;
  LossReport loss;
};

/// All four metric families in one pass over the log. Records are
/// canonicalized internally, so the report is invariant under input
/// permutation.
MetricsReport report(std::span<const fieldlog::UplinkRecord> records,
                     const ReportConfig& config);

void write_reach_csv(const GatewayReachStats& stats, std::ostream& out);
void write_share_csv(const ShareResult& share, std::ostream& out);
void write_interarrival_csv(const InterArrivalCdf& cdf, std::ostream& out);
void write_loss_csv(const LossReport& loss, std::ostream& out);

/// Writes reach.csv, gateway_share.csv, interarrival.csv and loss.csv
/// into dir (created if missing).
void write_report_csvs(const MetricsReport& report, const std::filesystem::path& dir);

}  // namespace lorakit::metrics
