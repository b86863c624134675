// lorakit - LoRaWAN deployment toolkit.
//
// Subcommands:
//   airtime   time-on-air and duty-cycle minimal interval for one uplink
//   plan      per-SF feasibility table for a target message interval
//   simulate  run a scenario file, write uplink log + ground truth
//   analyze   compute reach/share/interarrival/loss CSVs from an uplink log
//
// Exit codes: 0 success, 1 validation/configuration error, 2 I/O error.
// stdout carries results, stderr carries diagnostics.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "lorakit/errors.hpp"
#include "lorakit/fieldlog.hpp"
#include "lorakit/metrics.hpp"
#include "lorakit/netsim.hpp"
#include "lorakit/phy.hpp"

namespace {

namespace phy = lorakit::phy;
namespace sim = lorakit::sim;
namespace fieldlog = lorakit::fieldlog;
namespace metrics = lorakit::metrics;

std::string fmt2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string fmt4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

struct AirtimeArgs {
  int sf = 9;
  int bw = 125000;
  int cr = 1;
  int payload = 0;
  int preamble = 8;
  int overhead = 13;
  double duty = 0.01;
};

int cmd_airtime(const AirtimeArgs& args) {
  phy::PhyParams params = phy::eu868_uplink_params(7, 0);
  params.sf = args.sf;
  params.bandwidth_hz = args.bw;
  params.coding_rate = args.cr;
  params.preamble_symbols = args.preamble;
  params.phy_payload_bytes = args.payload + args.overhead;
  phy::validate(params);
  const phy::DutyCyclePolicy policy{args.duty};

  const double toa = phy::time_on_air_s(params);
  const double min_interval = phy::min_interval_s(params, policy);
  std::cout << "phy payload:  " << params.phy_payload_bytes << " B (" << args.payload
            << " B app + " << args.overhead << " B overhead)\n";
  std::cout << "time on air:  " << fmt2(toa) << " s\n";
  std::cout << "min interval: " << fmt2(min_interval) << " s at " << fmt2(args.duty * 100.0)
            << " % duty cycle\n";
  std::cout << "toa_s=" << fmt2(toa) << " min_interval_s=" << fmt2(min_interval) << "\n";
  return 0;
}

struct PlanArgs {
  int payload = 0;
  int overhead = 13;
  double target = 30.0;
  double duty = 0.01;
  std::string csv_path;
};

int cmd_plan(const PlanArgs& args) {
  phy::AppMessageSpec spec;
  spec.app_payload_bytes = args.payload;
  spec.mac_overhead_bytes = args.overhead;
  spec.target_interval_s = args.target;
  const phy::DutyCyclePolicy policy{args.duty};
  const phy::PlanResult result = phy::plan_spreading_factor(spec, policy);

  std::cout << "sf  time_on_air_s  min_interval_s  feasible\n";
  for (const auto& entry : result.per_sf) {
    std::printf("%2d  %13s  %14s  %s\n", entry.sf, fmt2(entry.time_on_air_s).c_str(),
                fmt2(entry.min_interval_s).c_str(), entry.feasible ? "yes" : "no");
  }
  if (result.chosen_sf) {
    std::cout << "chosen: SF" << *result.chosen_sf << " (min interval "
              << fmt2(result.per_sf[*result.chosen_sf - 7].min_interval_s)
              << " s <= target " << fmt2(args.target) << " s)\n";
    std::cout << "chosen_sf=" << *result.chosen_sf << "\n";
  } else {
    std::cout << "infeasible: smallest achievable interval is "
              << fmt2(result.best_achievable_interval_s) << " s at SF7\n";
    std::cout << "chosen_sf=none best_interval_s=" << fmt2(result.best_achievable_interval_s)
              << "\n";
  }

  if (!args.csv_path.empty()) {
    std::ofstream out(args.csv_path);
    if (!out) {
      throw lorakit::IoError("cannot open for writing: " + args.csv_path);
    }
    out << "sf,time_on_air_s,min_interval_s,feasible\n";
    for (const auto& entry : result.per_sf) {
      out << entry.sf << ',' << fmt2(entry.time_on_air_s) << ','
          << fmt2(entry.min_interval_s) << ',' << (entry.feasible ? 1 : 0) << '\n';
    }
  }
  return 0;
}

int cmd_simulate(const std::string& scenario_path, const std::string& out_dir) {
  const sim::Scenario scenario = sim::load_scenario_file(scenario_path);
  const sim::SimResult result = sim::run_scenario(scenario);

  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) {
    throw lorakit::IoError("cannot create output directory " + out_dir + ": " + ec.message());
  }
  const auto log_path = std::filesystem::path(out_dir) / "uplink.jsonl";
  const auto truth_path = std::filesystem::path(out_dir) / "ground_truth.csv";
  fieldlog::write_log_file(result.uplinks, log_path.string());
  {
    std::ofstream out(truth_path);
    if (!out) {
      throw lorakit::IoError("cannot open for writing: " + truth_path.string());
    }
    sim::write_ground_truth_csv(result.ground_truth, out);
  }

  const double loss =
      result.total_transmissions == 0
          ? 0.0
          : 1.0 - static_cast<double>(result.uplinks.size()) /
                      static_cast<double>(result.total_transmissions);
  if (!scenario.name.empty()) {
    std::cout << "scenario=" << scenario.name << "\n";
  }
  std::cout << "transmissions=" << result.total_transmissions
            << " records=" << result.uplinks.size() << " loss=" << fmt4(loss) << "\n";
  std::cout << "uplink_log=" << log_path.string() << "\n";
  std::cout << "ground_truth=" << truth_path.string() << "\n";
  return 0;
}

struct AnalyzeArgs {
  std::string log_path;
  std::string registry_path;
  double target_interval = 30.0;
  std::string out_dir;
};

int cmd_analyze(const AnalyzeArgs& args) {
  const fieldlog::ParseResult parsed = fieldlog::parse_log_file(args.log_path);
  for (const auto& diag : parsed.diagnostics) {
    std::cerr << args.log_path << ":" << diag.line << ": " << diag.reason << "\n";
  }
  if (parsed.records.empty()) {
    throw lorakit::ValidationError("no valid records in " + args.log_path);
  }
  const auto records = fieldlog::merge_duplicates(parsed.records);

  metrics::ReportConfig config;
  config.target_interval_s = args.target_interval;
  if (!args.registry_path.empty()) {
    config.registry = fieldlog::load_registry_file(args.registry_path);
  }
  const metrics::MetricsReport report = metrics::report(records, config);
  for (const auto& diag : report.share.diagnostics) {
    std::cerr << diag << "\n";
  }
  for (const auto& diag : report.loss.diagnostics) {
    std::cerr << diag << "\n";
  }
  metrics::write_report_csvs(report, args.out_dir);

  const double first_interval =
      report.interarrival.bins.empty() ? 0.0
                                       : report.interarrival.bins.front().cumulative_fraction;
  std::cout << "records=" << records.size() << " devices=" << report.reach.per_device.size()
            << " gateways=" << report.share.rows.size() << "\n";
  std::cout << "overall_loss=" << fmt4(report.loss.overall ? report.loss.overall->loss : 0.0)
            << " mean_reach="
            << fmt4(report.reach.overall ? report.reach.overall->mean_gateways : 0.0)
            << " first_interval_fraction=" << fmt4(first_interval) << "\n";
  std::cout << "out_dir=" << args.out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LoRaWAN deployment toolkit: airtime planning, uplink simulation, "
               "field-log analytics"};
  app.set_version_flag("--version", "lorakit 0.1.0");
  app.require_subcommand(1);

  AirtimeArgs airtime;
  CLI::App* airtime_cmd =
      app.add_subcommand("airtime", "Time-on-air and duty-cycle minimal interval");
  airtime_cmd->add_option("--sf", airtime.sf, "Spreading factor 7..12")->required();
  airtime_cmd->add_option("--bw", airtime.bw, "Bandwidth in Hz (default 125000)");
  airtime_cmd->add_option("--cr", airtime.cr, "Coding rate 1..4, meaning 4/(4+cr)");
  airtime_cmd->add_option("--payload", airtime.payload, "Application payload bytes")
      ->required();
  airtime_cmd->add_option("--preamble", airtime.preamble, "Preamble symbols (default 8)");
  airtime_cmd->add_option("--overhead", airtime.overhead,
                          "Uplink MAC overhead bytes (default 13)");
  airtime_cmd->add_option("--duty", airtime.duty, "Duty cycle fraction (default 0.01)");

  PlanArgs plan;
  CLI::App* plan_cmd =
      app.add_subcommand("plan", "Pick the best spreading factor for a target interval");
  plan_cmd->add_option("--payload", plan.payload, "Application payload bytes")->required();
  plan_cmd->add_option("--overhead", plan.overhead, "Uplink MAC overhead bytes (default 13)");
  plan_cmd->add_option("--target", plan.target, "Target message interval in seconds")
      ->required();
  plan_cmd->add_option("--duty", plan.duty, "Duty cycle fraction (default 0.01)");
  plan_cmd->add_option("--csv", plan.csv_path, "Also write the per-SF table as CSV");

  std::string scenario_path, sim_out_dir;
  CLI::App* simulate_cmd = app.add_subcommand("simulate", "Run a scenario file");
  simulate_cmd->add_option("--scenario", scenario_path, "Scenario JSON file")->required();
  simulate_cmd->add_option("--out", sim_out_dir, "Output directory")->required();

  AnalyzeArgs analyze;
  CLI::App* analyze_cmd =
      app.add_subcommand("analyze", "Compute reliability metrics from an uplink log");
  analyze_cmd->add_option("--log", analyze.log_path, "Uplink log (JSON-Lines)")->required();
  analyze_cmd->add_option("--registry", analyze.registry_path,
                          "Gateway registry JSON (id -> position)");
  analyze_cmd->add_option("--target-interval", analyze.target_interval,
                          "Target message interval in seconds (default 30)");
  analyze_cmd->add_option("--out", analyze.out_dir, "Output directory for the metric CSVs")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help();
    return 1;
  }

  try {
    if (airtime_cmd->parsed()) return cmd_airtime(airtime);
    if (plan_cmd->parsed()) return cmd_plan(plan);
    if (simulate_cmd->parsed()) return cmd_simulate(scenario_path, sim_out_dir);
    if (analyze_cmd->parsed()) return cmd_analyze(analyze);
  } catch (const lorakit::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const lorakit::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
