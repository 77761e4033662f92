// Copyright 2026 The Taskad Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Command-line front end: run the service, simulate the field experiment,
// analyze a report, calibrate the behaviour model.

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "taskad/error.hpp"
#include "taskad/http_server.hpp"
#include "taskad/platform.hpp"
#include "taskad/sim.hpp"

namespace {

using taskad::json;
namespace sim = taskad::sim;

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw taskad::Error(taskad::ErrorCode::ConfigInvalid, "cannot open", path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw taskad::Error(taskad::ErrorCode::ConfigInvalid, e.what(), path);
  }
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text << '\n';
    return;
  }
  std::ofstream out(path);
  if (!out) throw taskad::Error(taskad::ErrorCode::StorageFailure, "cannot write", path);
  out << text << '\n';
}

std::string cell(const json& block, const char* key, int precision) {
  if (!block.contains(key) || block.at(key).is_null()) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", precision, block.at(key).get<double>());
  return buf;
}

void print_table(const json& analysis, std::ostream& os) {
  static const std::pair<const char*, int> kBlocks[] = {
      {"images_labeled", 0}, {"correct_labels", 0}, {"success_rate", 2}, {"time_per_label", 2}};
  const auto& desc = analysis.at("descriptives");
  for (const auto& [metric, precision] : kBlocks) {
    os << metric << '\n';
    char line[160];
    std::snprintf(line, sizeof line, "  %-12s %6s %6s %8s %8s %8s %8s %8s\n", "condition", "n",
                  "miss", "median", "mean", "sd", "min", "max");
    os << line;
    for (const auto& [name, c] : desc.items()) {
      if (!c.contains(metric)) continue;
      const auto& b = c.at(metric);
      std::snprintf(line, sizeof line, "  %-12s %6d %6d %8s %8s %8s %8s %8s\n", name.c_str(),
                    c.value("participants", 0), c.value("missing", 0),
                    cell(b, "median", precision).c_str(), cell(b, "mean", precision).c_str(),
                    cell(b, "sd", 2).c_str(), cell(b, "min", precision).c_str(),
                    cell(b, "max", precision).c_str());
      os << line;
    }
  }
  for (const char* metric : {"success_rate", "time_per_label"}) {
    const auto& t = analysis.at(metric);
    os << '\n' << metric << '\n';
    for (const char* test : {"levene", "welch"}) {
      const auto& r = t.at(test);
      if (r.contains("error")) {
        os << "  " << test << ": " << r.at("error").get<std::string>() << '\n';
        continue;
      }
      char line[160];
      std::snprintf(line, sizeof line, "  %-7s F(%.0f, %.2f) = %.3f, p = %.4g\n", test,
                    r.at("df1").get<double>(), r.at("df2").get<double>(),
                    r.at("statistic").get<double>(), r.at("p_value").get<double>());
      os << line;
    }
    if (t.at("games_howell").is_array()) {
      for (const auto& p : t.at("games_howell")) {
        char line[160];
        std::snprintf(line, sizeof line, "  %-12s vs %-12s diff %+.3f  p = %.4g%s\n",
                      p.at("pair").at(0).get<std::string>().c_str(),
                      p.at("pair").at(1).get<std::string>().c_str(),
                      p.at("mean_difference").get<double>(), p.at("p_value").get<double>(),
                      p.at("significant").get<bool>() ? "  *" : "");
        os << line;
      }
    }
  }
}

int serve(const std::string& config_path) {
  auto config = taskad::service::ServiceConfig::load(config_path, [](const char* k) {
    return std::getenv(k);
  });
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);

  taskad::SystemClock clock;
  taskad::service::Platform platform(config, clock);
  platform.start_sweeper(std::max(1.0, config.reservation_ttl / 4.0));
  taskad::service::HttpServer server(platform);
  const int port = server.bind(config.host, config.port);
  server.start();
  std::cerr << "listening on " << config.host << ':' << port << " (recovered "
            << platform.recovered_events() << " events)" << std::endl;
  int sig = 0;
  sigwait(&set, &sig);
  std::cerr << "shutting down" << std::endl;
  server.stop();
  platform.stop_sweeper();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"taskad: crowdsourcing through in-game task ads"};
  app.require_subcommand(1);

  std::string config_path;
  auto* serve_cmd = app.add_subcommand("serve", "run the HTTP service");
  serve_cmd->add_option("--config", config_path, "JSON service configuration");

  std::string condition = "all";
  int n = 0;
  std::uint64_t seed = 1;
  std::string out_path = "-";
  std::string scenario_path;
  bool quiet = false;
  auto* sim_cmd = app.add_subcommand("simulate", "simulate the three-condition field experiment");
  sim_cmd->add_option("--condition", condition, "control|rewarded|nonoptional|all");
  sim_cmd->add_option("--n", n, "participants per condition (0: reference counts)");
  sim_cmd->add_option("--seed", seed, "master seed");
  sim_cmd->add_option("--out", out_path, "report file ('-' for stdout)");
  sim_cmd->add_option("--scenario", scenario_path, "JSON scenario overrides");
  sim_cmd->add_flag("--quiet", quiet, "omit the summary table");

  std::string report_path;
  bool as_json = false;
  auto* an_cmd = app.add_subcommand("analyze", "descriptives and tests for a report");
  an_cmd->add_option("report", report_path, "report JSON from simulate")->required();
  an_cmd->add_flag("--json", as_json, "print the analysis document");

  std::string target_path;
  int seeds = 3;
  std::string cal_out = "-";
  auto* cal_cmd = app.add_subcommand("calibrate", "fit gameover rate, batch size and opt-in");
  cal_cmd->add_option("--target", target_path, "JSON targets (defaults to the reference table)");
  cal_cmd->add_option("--seeds", seeds, "replications per grid point");
  cal_cmd->add_option("--out", cal_out, "result file ('-' for stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*serve_cmd) return serve(config_path);

    if (*sim_cmd) {
      sim::ScenarioConfig cfg = scenario_path.empty() ? sim::ScenarioConfig{}
                                                      : sim::scenario_from_json(read_json(scenario_path));
      cfg.master_seed = seed;
      if (condition != "all") cfg.conditions = {sim::condition_from(condition)};
      if (n > 0) {
        for (auto c : cfg.conditions) cfg.n_participants[c] = n;
      }
      const auto report = sim::run_experiment(cfg);
      write_text(out_path, sim::to_json(report).dump(2));
      if (!quiet && out_path != "-" && report.analysis.is_object()) print_table(report.analysis, std::cout);
      for (const auto& v : report.violations) std::cerr << "violation: " << v << '\n';
      return report.violations.empty() ? 0 : 3;
    }

    if (*an_cmd) {
      const auto report = sim::report_from_json(read_json(report_path));
      const auto analysis = sim::analyze(report);
      if (as_json) {
        std::cout << analysis.dump(2) << '\n';
      } else {
        print_table(analysis, std::cout);
      }
      return 0;
    }

    if (*cal_cmd) {
      const auto targets = target_path.empty() ? sim::reference_targets()
                                               : sim::targets_from_json(read_json(target_path));
      const auto result = sim::calibrate(targets, sim::ScenarioConfig{}, seeds);
      write_text(cal_out, sim::to_json(result).dump(2));
      return 0;
    }
  } catch (const taskad::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
