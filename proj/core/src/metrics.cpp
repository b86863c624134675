#include "lorakit/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <set>

#include "lorakit/errors.hpp"

namespace lorakit::metrics {

namespace {

using fieldlog::UplinkRecord;

void append_double(std::string& out, double value) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  out.append(buf, res.ptr);
}

/// Canonical processing order so every metric is permutation-invariant.
std::vector<const UplinkRecord*> sorted_view(std::span<const UplinkRecord> records) {
  std::vector<const UplinkRecord*> view;
  view.reserve(records.size());
  for (const auto& rec : records) view.push_back(&rec);
  std::sort(view.begin(), view.end(), [](const UplinkRecord* a, const UplinkRecord* b) {
    if (a->rx_time_s != b->rx_time_s) return a->rx_time_s < b->rx_time_s;
    if (a->device_id != b->device_id) return a->device_id < b->device_id;
    return a->fcnt < b->fcnt;
  });
  return view;
}

double component_median(std::vector<double>& values) {
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return (values[n / 2 - 1] + values[n / 2]) / 2.0;
}

}  // namespace

GatewayReachStats gateway_reach(std::span<const UplinkRecord> records) {
  GatewayReachStats stats;
  if (records.empty()) return stats;

  struct Acc {
    std::size_t messages = 0;
    std::uint64_t total = 0;
    int min = 0;
    int max = 0;
  };
  std::map<std::string, Acc> per_device;
  Acc overall;
  for (const auto& rec : records) {
    const int count = static_cast<int>(rec.receptions.size());
    auto& acc = per_device[rec.device_id];
    for (Acc* a : {&acc, &overall}) {
      if (a->messages == 0) {
        a->min = count;
        a->max = count;
      } else {
        a->min = std::min(a->min, count);
        a->max = std::max(a->max, count);
      }
      ++a->messages;
      a->total += static_cast<std::uint64_t>(count);
    }
  }

  const auto to_row = [](const std::string& id, const Acc& acc) {
    ReachRow row;
    row.device_id = id;
    row.messages = acc.messages;
    row.min_gateways = acc.min;
    row.max_gateways = acc.max;
    row.mean_gateways = static_cast<double>(acc.total) / static_cast<double>(acc.messages);
    return row;
  };
  for (const auto& [id, acc] : per_device) {
    stats.per_device.push_back(to_row(id, acc));
  }
  stats.overall = to_row("overall", overall);
  return stats;
}

ShareResult gateway_share(std::span<const UplinkRecord> records,
                          const fieldlog::GatewayRegistry& registry,
                          const DevicePositionResolver& resolver) {
  ShareResult result;
  if (records.empty()) return result;

  const auto view = sorted_view(records);
  const std::size_t total = view.size();

  std::map<std::string, std::size_t> gateway_count;
  std::map<std::string, geo::GeoPoint> inline_positions;
  std::map<std::string, std::optional<geo::GeoPoint>> resolved_devices;
  std::vector<double> ref_lats, ref_lons;

  for (const UplinkRecord* rec : view) {
    for (const auto& gr : rec->receptions) {
      ++gateway_count[gr.gateway_id];
      if (gr.gateway_position && !inline_positions.count(gr.gateway_id)) {
        inline_positions.emplace(gr.gateway_id, *gr.gateway_position);
      }
    }
    // Reference position pool: one sample per record so mobile devices
    // contribute their whole trace and the median stays outlier-robust.
    std::optional<geo::GeoPoint> pos = rec->device_position;
    if (!pos && resolver) {
      auto [it, inserted] = resolved_devices.try_emplace(rec->device_id);
      if (inserted) it->second = resolver(rec->device_id);
      pos = it->second;
    }
    if (pos) {
      ref_lats.push_back(pos->lat_deg);
      ref_lons.push_back(pos->lon_deg);
    }
  }

  std::optional<geo::GeoPoint> reference;
  if (!ref_lats.empty()) {
    reference = geo::GeoPoint{component_median(ref_lats), component_median(ref_lons), 0.0};
  } else {
    result.diagnostics.push_back(
        "no device positions available; gateway distances are unknown");
  }

  for (const auto& [gateway_id, count] : gateway_count) {
    GatewayShareRow row;
    row.gateway_id = gateway_id;
    row.messages = count;
    row.share = static_cast<double>(count) / static_cast<double>(total);

    std::optional<geo::GeoPoint> gw_pos;
    if (const auto it = registry.find(gateway_id); it != registry.end()) {
      gw_pos = it->second;
    } else if (const auto inline_it = inline_positions.find(gateway_id);
               inline_it != inline_positions.end()) {
      gw_pos = inline_it->second;
    } else {
      result.diagnostics.push_back("gateway '" + gateway_id + "': position unknown");
    }
    if (gw_pos && reference) {
      row.distance_m = geo::haversine_m(*reference, *gw_pos);
    }
    result.rows.push_back(std::move(row));
  }

  std::sort(result.rows.begin(), result.rows.end(),
            [](const GatewayShareRow& a, const GatewayShareRow& b) {
              if (a.distance_m.has_value() != b.distance_m.has_value()) {
                return a.distance_m.has_value();
              }
              if (a.distance_m && b.distance_m && *a.distance_m != *b.distance_m) {
                return *a.distance_m < *b.distance_m;
              }
              return a.gateway_id < b.gateway_id;
            });
  return result;
}

InterArrivalCdf interarrival_cdf(std::span<const UplinkRecord> records,
                                 double target_interval_s, double guard_fraction) {
  if (!(target_interval_s > 0.0)) {
    throw ValidationError("target_interval_s must be > 0");
  }
  InterArrivalCdf cdf;
  cdf.target_interval_s = target_interval_s;
  cdf.guard_s = guard_fraction * target_interval_s;

  const auto view = sorted_view(records);
  std::map<std::string, double> last_rx;
  std::map<int, std::size_t> bin_counts;
  for (const UplinkRecord* rec : view) {
    const auto it = last_rx.find(rec->device_id);
    if (it != last_rx.end()) {
      const double delta = rec->rx_time_s - it->second;
      const int k = std::max(
          1, static_cast<int>(std::ceil((delta - cdf.guard_s) / target_interval_s)));
      ++bin_counts[k];
      ++cdf.samples;
      it->second = rec->rx_time_s;
    } else {
      last_rx.emplace(rec->device_id, rec->rx_time_s);
    }
  }
  if (cdf.samples == 0) return cdf;

  const int max_k = bin_counts.rbegin()->first;
  std::size_t cumulative = 0;
  cdf.bins.reserve(static_cast<std::size_t>(max_k));
  for (int k = 1; k <= max_k; ++k) {
    if (const auto it = bin_counts.find(k); it != bin_counts.end()) {
      cumulative += it->second;
    }
    cdf.bins.push_back(
        {k, static_cast<double>(cumulative) / static_cast<double>(cdf.samples)});
  }
  return cdf;
}

LossReport loss(std::span<const UplinkRecord> records) {
  LossReport report;
  if (records.empty()) return report;

  const auto view = sorted_view(records);

  struct Acc {
    std::int64_t cycles = 0;
    std::optional<int> prev_raw;
    std::set<std::int64_t> seen;
    std::int64_t min_ext = 0;
    std::int64_t max_ext = 0;
  };
  std::map<std::string, Acc> per_device;
  for (const UplinkRecord* rec : view) {
    auto& acc = per_device[rec->device_id];
    // unroll the 16-bit counter: a backward jump of more than half the
    // counter space is a wrap, smaller ones are reordering/duplicates
    if (acc.prev_raw && rec->fcnt < *acc.prev_raw - 32768) {
      acc.cycles += 65536;
    }
    const std::int64_t ext = acc.cycles + rec->fcnt;
    if (acc.seen.empty()) {
      acc.min_ext = ext;
      acc.max_ext = ext;
    } else {
      acc.min_ext = std::min(acc.min_ext, ext);
      acc.max_ext = std::max(acc.max_ext, ext);
    }
    if (!acc.seen.insert(ext).second) {
      report.diagnostics.push_back("device '" + rec->device_id + "': duplicate fcnt " +
                                   std::to_string(rec->fcnt) + "; counted once");
    }
    acc.prev_raw = rec->fcnt;
  }

  std::uint64_t total_expected = 0;
  std::uint64_t total_received = 0;
  for (const auto& [device_id, acc] : per_device) {
    LossRow row;
    row.device_id = device_id;
    row.expected = static_cast<std::uint64_t>(acc.max_ext - acc.min_ext + 1);
    row.received = acc.seen.size();
    row.loss = 1.0 - static_cast<double>(row.received) / static_cast<double>(row.expected);
    total_expected += row.expected;
    total_received += row.received;
    report.per_device.push_back(std::move(row));
  }
  LossRow overall;
  overall.device_id = "overall";
  overall.expected = total_expected;
  overall.received = total_received;
  overall.loss =
      1.0 - static_cast<double>(total_received) / static_cast<double>(total_expected);
  report.overall = overall;
  return report;
}

MetricsReport report(std::span<const UplinkRecord> records, const ReportConfig& config) {
  MetricsReport out;
  out.reach = gateway_reach(records);
  out.share = gateway_share(records, config.registry, config.device_position_resolver);
  out.interarrival =
      interarrival_cdf(records, config.target_interval_s, config.interarrival_guard_fraction);
  out.loss = loss(records);
  return out;
}

void write_reach_csv(const GatewayReachStats& stats, std::ostream& out) {
  std::string buf = "device_id,min,mean,max\n";
  const auto row = [&buf](const ReachRow& r) {
    buf.append(r.device_id);
    buf.push_back(',');
    buf.append(std::to_string(r.min_gateways));
    buf.push_back(',');
    append_double(buf, r.mean_gateways);
    buf.push_back(',');
    buf.append(std::to_string(r.max_gateways));
    buf.push_back('\n');
  };
  for (const auto& r : stats.per_device) row(r);
  if (stats.overall) row(*stats.overall);
  out << buf;
}

void write_share_csv(const ShareResult& share, std::ostream& out) {
  std::string buf = "gateway_id,distance_m,share\n";
  for (const auto& row : share.rows) {
    buf.append(row.gateway_id);
    buf.push_back(',');
    if (row.distance_m) append_double(buf, *row.distance_m);
    buf.push_back(',');
    append_double(buf, row.share);
    buf.push_back('\n');
  }
  out << buf;
}

void write_interarrival_csv(const InterArrivalCdf& cdf, std::ostream& out) {
  std::string buf = "k,cumulative_fraction\n";
  for (const auto& bin : cdf.bins) {
    buf.append(std::to_string(bin.k));
    buf.push_back(',');
    append_double(buf, bin.cumulative_fraction);
    buf.push_back('\n');
  }
  out << buf;
}

void write_loss_csv(const LossReport& report, std::ostream& out) {
  std::string buf = "device_id,expected,received,loss\n";
  const auto row = [&buf](const LossRow& r) {
    buf.append(r.device_id);
    buf.push_back(',');
    buf.append(std::to_string(r.expected));
    buf.push_back(',');
    buf.append(std::to_string(r.received));
    buf.push_back(',');
    append_double(buf, r.loss);
    buf.push_back('\n');
  };
  for (const auto& r : report.per_device) row(r);
  if (report.overall) row(*report.overall);
  out << buf;
}

void write_report_csvs(const MetricsReport& report, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) {
    throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
  }
  const auto write_file = [&dir](const char* name, const auto& writer) {
    const auto path = dir / name;
    std::ofstream out(path);
    if (!out) {
      throw IoError("cannot open for writing: " + path.string());
    }
    writer(out);
    if (!out) {
      throw IoError("I/O failure while writing " + path.string());
    }
  };
  write_file("reach.csv", [&](std::ostream& out) { write_reach_csv(report.reach, out); });
  write_file("gateway_share.csv",
             [&](std::ostream& out) { write_share_csv(report.share, out); });
  write_file("interarrival.csv",
             [&](std::ostream& out) { write_interarrival_csv(report.interarrival, out); });
  write_file("loss.csv", [&](std::ostream& out) { write_loss_csv(report.loss, out); });
}

}  // namespace lorakit::metrics
