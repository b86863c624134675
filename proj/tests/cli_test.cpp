#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"

namespace fs = std::filesystem;

namespace {

struct CliResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

fs::path fresh_dir(const std::string& tag) {
  static int counter = 0;
  const fs::path dir =
      fs::temp_directory_path() / ("lorakit-test-" + tag + "-" + std::to_string(counter++) +
                                   "-" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

CliResult run_cli(const std::string& args) {
  const fs::path err_file = fresh_dir("stderr") / "stderr.txt";
  const std::string command =
      std::string(LORAKIT_CLI_PATH) + " " + args + " 2>" + err_file.string();
  CliResult result;
  FILE* pipe = ::popen(command.c_str(), "r");
  REQUIRE(pipe != nullptr);
  char buffer[4096];
  std::size_t n;
  while ((n = std::fread(buffer, 1, sizeof buffer, pipe)) > 0) {
    result.out.append(buffer, n);
  }
  const int status = ::pclose(pipe);
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  result.err = slurp(err_file);
  return result;
}

std::string scenario_path(const char* name) {
  return std::string(LORAKIT_SCENARIO_DIR) + "/" + name;
}

}  // namespace

TEST_CASE("cli airtime prints the machine-readable summary") {
  SUBCASE("tracker profile") {
    const auto result = run_cli("airtime --sf 9 --payload 11 --overhead 13 --duty 0.01");
    CHECK(result.exit_code == 0);
    CHECK(result.out.find("min_interval_s=20.58") != std::string::npos);
  }
  SUBCASE("sensor profile") {
    const auto result = run_cli("airtime --sf 10 --payload 8 --overhead 13 --duty 0.01");
    CHECK(result.exit_code == 0);
    CHECK(result.out.find("min_interval_s=37.07") != std::string::npos);
  }
  SUBCASE("invalid spreading factor exits 1") {
    const auto result = run_cli("airtime --sf 13 --payload 11");
    CHECK(result.exit_code == 1);
    CHECK(result.err.find("sf") != std::string::npos);
    CHECK(result.out.find("min_interval_s") == std::string::npos);
  }
  SUBCASE("unknown flags are rejected with usage text") {
    const auto result = run_cli("airtime --sf 9 --payload 11 --frobnicate 3");
    CHECK(result.exit_code == 1);
  }
}

TEST_CASE("cli plan selects the documented spreading factors") {
  SUBCASE("11 B at 30 s picks SF9") {
    const auto result = run_cli("plan --payload 11 --target 30");
    CHECK(result.exit_code == 0);
    CHECK(result.out.find("chosen_sf=9") != std::string::npos);
  }
  SUBCASE("8 B at 60 s picks SF10") {
    const auto result = run_cli("plan --payload 8 --target 60");
    CHECK(result.exit_code == 0);
    CHECK(result.out.find("chosen_sf=10") != std::string::npos);
  }
  SUBCASE("impossible target reports infeasible with the SF7 floor, exit 0") {
    const auto result = run_cli("plan --payload 8 --target 0.1");
    CHECK(result.exit_code == 0);
    CHECK(result.out.find("chosen_sf=none") != std::string::npos);
    CHECK(result.out.find("infeasible") != std::string::npos);
  }
  SUBCASE("csv table output") {
    const fs::path dir = fresh_dir("plan");
    const auto result =
        run_cli("plan --payload 11 --target 30 --csv " + (dir / "plan.csv").string());
    CHECK(result.exit_code == 0);
    const std::string csv = slurp(dir / "plan.csv");
    CHECK(csv.rfind("sf,time_on_air_s,min_interval_s,feasible\n", 0) == 0);
    CHECK(csv.find("\n9,") != std::string::npos);
  }
}

TEST_CASE("cli simulate writes deterministic outputs") {
  SUBCASE("bundled scenario runs and the outputs are stable across runs") {
    const fs::path dir_a = fresh_dir("sim-a");
    const fs::path dir_b = fresh_dir("sim-b");
    const std::string scenario = scenario_path("dom_with_gateway.json");
    const auto first = run_cli("simulate --scenario " + scenario + " --out " + dir_a.string());
    REQUIRE(first.exit_code == 0);
    CHECK(first.out.find("transmissions=720") != std::string::npos);
    const auto second = run_cli("simulate --scenario " + scenario + " --out " + dir_b.string());
    REQUIRE(second.exit_code == 0);
    CHECK(slurp(dir_a / "uplink.jsonl") == slurp(dir_b / "uplink.jsonl"));
    CHECK(slurp(dir_a / "ground_truth.csv") == slurp(dir_b / "ground_truth.csv"));
    CHECK(!slurp(dir_a / "uplink.jsonl").empty());
  }
  SUBCASE("the on-site gateway scenario loses fewer packets than its counterpart") {
    const auto parse_loss = [](const std::string& out) {
      const auto pos = out.find("loss=");
      REQUIRE(pos != std::string::npos);
      return std::stod(out.substr(pos + 5));
    };
    const fs::path dir_with = fresh_dir("sim-with");
    const fs::path dir_without = fresh_dir("sim-without");
    const auto with_gw = run_cli("simulate --scenario " +
                                 scenario_path("dom_with_gateway.json") + " --out " +
                                 dir_with.string());
    const auto without_gw = run_cli("simulate --scenario " +
                                    scenario_path("dom_without_gateway.json") + " --out " +
                                    dir_without.string());
    REQUIRE(with_gw.exit_code == 0);
    REQUIRE(without_gw.exit_code == 0);
    CHECK(parse_loss(with_gw.out) < parse_loss(without_gw.out));
  }
  SUBCASE("missing scenario file exits 2") {
    const auto result = run_cli("simulate --scenario /nonexistent.json --out /tmp/x");
    CHECK(result.exit_code == 2);
  }
  SUBCASE("schema violation exits 1 and names the offending key") {
    const fs::path dir = fresh_dir("sim-bad");
    const fs::path bad = dir / "bad.json";
    std::ofstream(bad) << R"({"duration_s": 100, "seed": 1, "surprise": true,
      "gateways": [{"gateway_id": "gw", "position": {"lat": 0, "lon": 0}}],
      "devices": [{"device_id": "d", "sf": 9, "app_payload_bytes": 11,
                   "interval_s": 30, "position": {"lat": 0, "lon": 0}}]})";
    const auto result = run_cli("simulate --scenario " + bad.string() + " --out " +
                                (dir / "out").string());
    CHECK(result.exit_code == 1);
    CHECK(result.err.find("surprise") != std::string::npos);
  }
}

TEST_CASE("cli analyze end to end") {
  const fs::path sim_dir = fresh_dir("analyze-sim");
  const std::string scenario = scenario_path("dom_with_gateway.json");
  REQUIRE(run_cli("simulate --scenario " + scenario + " --out " + sim_dir.string())
              .exit_code == 0);
  const std::string log = (sim_dir / "uplink.jsonl").string();

  SUBCASE("produces the four metric csvs and headline numbers") {
    const fs::path out = fresh_dir("analyze-out");
    const auto result =
        run_cli("analyze --log " + log + " --target-interval 30 --out " + out.string());
    REQUIRE(result.exit_code == 0);
    CHECK(result.out.find("overall_loss=") != std::string::npos);
    for (const char* name :
         {"reach.csv", "gateway_share.csv", "interarrival.csv", "loss.csv"}) {
      CHECK(fs::exists(out / name));
    }
  }
  SUBCASE("shuffled log yields identical csvs") {
    std::vector<std::string> lines;
    {
      std::ifstream in(log);
      std::string line;
      while (std::getline(in, line)) lines.push_back(line);
    }
    REQUIRE(lines.size() > 10);
    // deterministic reorder: reverse plus a stride permutation
    std::vector<std::string> shuffled;
    for (std::size_t stride = 0; stride < 7; ++stride) {
      for (std::size_t i = lines.size(); i-- > 0;) {
        if (i % 7 == stride) shuffled.push_back(lines[i]);
      }
    }
    REQUIRE(shuffled.size() == lines.size());
    const fs::path dir = fresh_dir("analyze-shuffled");
    const fs::path shuffled_log = dir / "shuffled.jsonl";
    {
      std::ofstream out_file(shuffled_log);
      for (const auto& line : shuffled) out_file << line << '\n';
    }
    const fs::path out_a = fresh_dir("analyze-a");
    const fs::path out_b = fresh_dir("analyze-b");
    REQUIRE(run_cli("analyze --log " + log + " --out " + out_a.string()).exit_code == 0);
    REQUIRE(run_cli("analyze --log " + shuffled_log.string() + " --out " + out_b.string())
                .exit_code == 0);
    for (const char* name :
         {"reach.csv", "gateway_share.csv", "interarrival.csv", "loss.csv"}) {
      CHECK(slurp(out_a / name) == slurp(out_b / name));
    }
  }
  SUBCASE("malformed lines are tolerated and reported on stderr") {
    const fs::path dir = fresh_dir("analyze-dirty");
    const fs::path dirty_log = dir / "dirty.jsonl";
    {
      std::ifstream in(log);
      std::ofstream out_file(dirty_log);
      std::string line;
      std::size_t i = 0;
      while (std::getline(in, line)) {
        if (i++ % 20 == 7) out_file << "{\"broken\": \n";
        out_file << line << '\n';
      }
    }
    const fs::path out = fresh_dir("analyze-dirty-out");
    const auto result = run_cli("analyze --log " + dirty_log.string() + " --out " +
                                out.string());
    CHECK(result.exit_code == 0);
    CHECK(!result.err.empty());
    CHECK(result.err.find("invalid JSON") != std::string::npos);
  }
  SUBCASE("log with zero valid records exits 1") {
    const fs::path dir = fresh_dir("analyze-empty");
    const fs::path empty_log = dir / "empty.jsonl";
    std::ofstream(empty_log) << "not json\nnot json either\n";
    const auto result =
        run_cli("analyze --log " + empty_log.string() + " --out " + (dir / "out").string());
    CHECK(result.exit_code == 1);
  }
  SUBCASE("unreadable log exits 2") {
    const auto result = run_cli("analyze --log /nonexistent.jsonl --out /tmp/x");
    CHECK(result.exit_code == 2);
  }
}
