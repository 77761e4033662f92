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

// Runs each primary acceptance criterion at its stated tolerance and prints
// one PASS/FAIL line per criterion. Exit status is non-zero if any fails.
//
//   taskad_acceptance [--only N]...

#include <fcntl.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "support/fixtures.hpp"
#include "support/reference_stats.hpp"
#include "support/toy_data.hpp"
#include "taskad/engine.hpp"
#include "taskad/metrics.hpp"
#include "taskad/platform.hpp"
#include "taskad/sim.hpp"
#include "taskad/stats.hpp"
#include "taskad/store.hpp"

namespace {

using namespace taskad;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double median(std::vector<double> v) {
  if (v.empty()) return NAN;
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double percentile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const auto idx = static_cast<std::size_t>(std::ceil(q * static_cast<double>(v.size()))) - 1;
  return v[std::min(idx, v.size() - 1)];
}

// Recount never-twice and quota straight from stored responses.
std::pair<int, int> recount(const std::vector<dissem::StoredResponse>& responses, int k) {
  std::map<std::tuple<std::string, std::string, std::string>, int> per_user;
  std::map<std::pair<std::string, std::string>, int> per_item;
  int dup = 0, over = 0;
  for (const auto& r : responses) {
    if (++per_user[{r.campaign_id, r.user_id, r.item_id}] == 2) ++dup;
    if (++per_item[{r.campaign_id, r.item_id}] == k + 1) ++over;
  }
  return {dup, over};
}

// 1. Randomized schedule over serve / submit / expire.
Outcome never_twice_and_quota() {
  const auto t0 = Clock::now();
  constexpr int kItems = 50, kK = 3, kUsers = 200, kOps = 100000;
  std::mt19937_64 rng(0x5eed);
  long ops = 0, completions = 0, rejected = 0, campaigns = 0;
  int dup = 0, over = 0;
  std::size_t audit_issues = 0;

  for (bool overcommit : {false, true}) {
    dissem::Engine engine(rng());
    const dissem::ReservationPolicy policy{120.0, overcommit};
    Timestamp now = 0;
    const auto ds = engine.add_dataset(testing::make_manifest(kItems, "c1"), now);
    std::vector<std::string> live;
    auto open_campaign = [&] {
      const auto id = engine.create_campaign(ds, testing::make_config(kK, 5), now);
      engine.set_status(id, CampaignStatus::Published, now);
      live.push_back(id);
      ++campaigns;
    };
    for (int i = 0; i < 3; ++i) open_campaign();
    std::vector<std::string> held;
    const int phase_ops = overcommit ? kOps * 2 / 5 : kOps * 3 / 5;
    for (int op = 0; op < phase_ops; ++op, ++ops) {
      now += std::uniform_real_distribution<double>(0.0, 0.6)(rng);
      const auto roll = rng() % 100;
      if (roll < 40) {
        const auto user = "u" + std::to_string(rng() % kUsers);
        auto batch = engine.select_batch(dissem::CampaignFilter::all(), user, now, policy);
        for (const auto& t : batch.tasks) held.push_back(t.assignment_id);
        if (batch.no_tasks()) {
          std::erase_if(live, [&](const std::string& id) {
            return engine.campaign(id).status == CampaignStatus::Complete;
          });
          if (live.size() < 3) open_campaign();
        }
      } else if (roll < 88) {
        if (held.empty()) continue;
        // Mostly recent reservations; occasionally a stale one that may have expired.
        const auto window = rng() % 10 == 0 ? held.size() : std::min<std::size_t>(held.size(), 8);
        const auto i = held.size() - 1 - rng() % window;
        const auto id = held[i];
        held[i] = held.back();
        held.pop_back();
        try {
          engine.record_completion(id, Response{id, rng() % 2 ? "Yes" : "No", 2.0, now}, now);
          ++completions;
        } catch (const Error& e) {
          ++rejected;
        }
      } else {
        engine.expire_stale(now);
      }
    }
    audit_issues += engine.audit(overcommit).size();
    auto [d, o] = recount(engine.responses(), kK);
    dup += d;
    over += o;
  }
  const double secs = seconds_since(t0);
  const bool pass = ops >= kOps && dup == 0 && over == 0 && audit_issues == 0 && secs < 60.0;
  return {pass, fmt("ops=%ld completions=%ld rejected=%ld campaigns=%ld duplicates=%d over_quota=%d "
                    "audit=%zu time=%.1fs (limit 60s)",
                    ops, completions, rejected, campaigns, dup, over, audit_issues, secs)};
}

// 2. Exhaustive consolidation against a direct vote count.
Outcome consolidation_oracle() {
  const std::string options[] = {"Yes", "No", "Not sure"};
  int checked = 0, mismatches = 0;
  for (int len = 0; len <= 5; ++len) {
    int total = 1;
    for (int i = 0; i < len; ++i) total *= 3;
    for (int code = 0; code < total; ++code) {
      std::vector<std::string> seq;
      int c = code;
      for (int i = 0; i < len; ++i, c /= 3) seq.push_back(options[c % 3]);
      for (int k : {len, 5}) {
        if (k == 0) continue;
        const auto got = metrics::consolidate(seq, k);
        std::map<std::string, int> counts;
        for (const auto& o : options) {
          const auto n = std::count(seq.begin(), seq.end(), o);
          if (n) counts[o] = static_cast<int>(n);
        }
        const int yes = counts.count("Yes") ? counts["Yes"] : 0;
        const int no = counts.count("No") ? counts["No"] : 0;
        const taskad::Verdict want = yes == no ? taskad::Verdict::Undecided
                                     : yes > no ? taskad::Verdict::Yes
                                                : taskad::Verdict::No;
        ++checked;
        if (got.verdict != want || got.vote_counts != counts || got.complete != (len == k)) ++mismatches;
      }
    }
  }
  return {mismatches == 0 && checked > 0, fmt("sequences_checked=%d mismatches=%d", checked, mismatches)};
}

// 3. Group tests against the independent oracle, df rule, null calibration.
Outcome statkit() {
  namespace ref = testing::reference;
  double worst_stat = 0, worst_p = 0;
  for (const auto& c : testing::toy_cases()) {
    std::vector<stats::Sample> s;
    for (std::size_t i = 0; i < c.groups.size(); ++i) s.push_back({"g" + std::to_string(i), c.groups[i]});
    const auto lev = stats::levene(s);
    const auto rl = ref::levene(c.groups);
    const auto w = stats::welch_anova(s);
    const auto rw = ref::welch(c.groups);
    worst_stat = std::max({worst_stat, std::fabs(lev.statistic - rl.stat), std::fabs(w.statistic - rw.stat)});
    worst_p = std::max({worst_p, std::fabs(lev.p_value - rl.p), std::fabs(w.p_value - rw.p)});
    const auto gh = stats::games_howell(s);
    const auto rg = ref::games_howell(c.groups);
    for (std::size_t i = 0; i < gh.size(); ++i) {
      worst_stat = std::max(worst_stat, std::fabs(gh[i].statistic - rg[i].q));
      worst_p = std::max(worst_p, std::fabs(gh[i].p_value - rg[i].p));
    }
  }

  std::mt19937_64 rng(265);
  const int sizes[] = {99, 72, 97};
  auto draw = [&](double mean, const double sd[3]) {
    std::vector<stats::Sample> s(3);
    for (int g = 0; g < 3; ++g) {
      std::normal_distribution<double> z(mean, sd[g]);
      s[g].group_name = "g" + std::to_string(g);
      for (int i = 0; i < sizes[g]; ++i) s[g].values.push_back(z(rng));
    }
    return s;
  };
  const double equal_sd[3] = {1.0, 1.0, 1.0};
  const double unequal_sd[3] = {1.0, 2.5, 0.6};
  const auto df = stats::levene(draw(0.0, equal_sd));
  const bool df_ok = df.df1 == 2.0 && df.df2 == 265.0;

  const int trials = 2000;
  int welch_rej = 0, levene_rej = 0;
  for (int t = 0; t < trials; ++t) {
    welch_rej += stats::welch_anova(draw(5.0, unequal_sd)).significant();
    levene_rej += stats::levene(draw(5.0, equal_sd)).significant();
  }
  const double wr = welch_rej / double(trials), lr = levene_rej / double(trials);
  const bool pass = worst_stat <= 1e-6 && worst_p <= 1e-4 && df_ok && std::fabs(wr - 0.05) <= 0.02 &&
                    std::fabs(lr - 0.05) <= 0.02;
  return {pass, fmt("max|dstat|=%.2e (<=1e-6) max|dp|=%.2e (<=1e-4) levene_df=(%g,%g) "
                    "null_reject welch=%.4f levene=%.4f (0.05+-0.02, %d trials)",
                    worst_stat, worst_p, df.df1, df.df2, wr, lr, trials)};
}

// 4. Field experiment reproduction over 100 seeds.
Outcome experiment() {
  const auto t0 = Clock::now();
  constexpr int kSeeds = 100;
  const std::map<std::string, double> success_target = {{"control", 0.82}, {"rewarded", 0.80}, {"nonoptional", 0.84}};
  const std::map<std::string, double> time_target = {{"control", 6.42}, {"rewarded", 3.99}, {"nonoptional", 3.32}};
  std::map<std::string, std::vector<double>> success_medians, time_medians;
  int welch_time_sig = 0, gh_pattern = 0, welch_success_ns = 0, violations = 0;
  for (int seed = 1; seed <= kSeeds; ++seed) {
    sim::ScenarioConfig cfg;
    cfg.master_seed = static_cast<std::uint64_t>(seed);
    cfg.keep_event_log = false;
    const auto report = sim::run_experiment(cfg);
    violations += static_cast<int>(report.violations.size());
    for (const auto& s : sim::metric_samples(report, "success_rate")) {
      success_medians[s.group_name].push_back(median(s.values));
    }
    for (const auto& s : sim::metric_samples(report, "time_per_label")) {
      time_medians[s.group_name].push_back(median(s.values));
    }
    const auto& a = report.analysis;
    welch_time_sig += a["time_per_label"]["welch"]["p_value"].get<double>() < 0.05;
    welch_success_ns += a["success_rate"]["welch"]["p_value"].get<double>() > 0.05;
    bool pattern = true;
    for (const auto& p : a["time_per_label"]["games_howell"]) {
      const auto x = p["pair"][0].get<std::string>(), y = p["pair"][1].get<std::string>();
      const bool sig = p["significant"].get<bool>();
      const bool involves_control = x == "control" || y == "control";
      if (sig != involves_control) pattern = false;
    }
    gh_pattern += pattern;
  }
  const double secs = seconds_since(t0);

  bool a_ok = true, b_ok = true;
  std::string a_txt, b_txt;
  for (const auto& [cond, target] : success_target) {
    const double m = median(success_medians[cond]);
    a_ok = a_ok && std::fabs(m - target) <= 0.05;
    a_txt += fmt(" %s=%.3f/%.2f", cond.c_str(), m, target);
  }
  for (const auto& [cond, target] : time_target) {
    const double m = median(time_medians[cond]);
    b_ok = b_ok && std::fabs(m - target) <= 0.5;
    b_txt += fmt(" %s=%.2f/%.2f", cond.c_str(), m, target);
  }
  const double c1 = welch_time_sig / double(kSeeds), c2 = gh_pattern / double(kSeeds),
               d = welch_success_ns / double(kSeeds);
  const bool c_ok = c1 >= 0.90 && c2 >= 0.80;
  const bool d_ok = d >= 0.70;
  const bool pass = a_ok && b_ok && c_ok && d_ok && secs < 600.0 && violations == 0;
  return {pass, fmt("(a)%s success median %s | (b)%s time median %s | (c) welch_time_sig=%.2f (>=0.90) "
                    "gh_pattern=%.2f (>=0.80) %s | (d) welch_success_ns=%.2f (>=0.70) %s | seeds=%d "
                    "violations=%d time=%.0fs (limit 600s)",
                    a_txt.c_str(), a_ok ? "ok" : "OUT", b_txt.c_str(), b_ok ? "ok" : "OUT", c1, c2,
                    c_ok ? "ok" : "OUT", d, d_ok ? "ok" : "OUT", kSeeds, violations, secs)};
}

json call(service::Platform& p, const std::string& method, const std::string& path, const json& body,
          const std::string& token, int* status = nullptr) {
  service::ApiRequest r;
  r.method = method;
  r.path = path;
  r.body = body.is_string() ? body.get<std::string>() : body.dump();
  r.bearer_token = token;
  auto res = p.handle(r);
  if (status) *status = res.status;
  return json::parse(res.body);
}

// 5. Sustained serve/submit through the JSON API on a file-backed store.
Outcome load_soak() {
  const auto dir = testing::scratch_dir("soak");
  service::ServiceConfig cfg;
  cfg.store_path = dir.string();
  cfg.compact_every = 2000;
  SystemClock clock;
  constexpr int kInteractions = 5000, kThreads = 4;
  std::atomic<int> errors{0}, interactions{0}, accepted{0}, empty{0};
  std::vector<double> latencies[kThreads];
  std::size_t audit_issues = 0, after_restart = 0;
  json before;
  {
    service::Platform platform(cfg, clock);
    const auto manifest = serialize_manifest(sim::gold_dataset());
    int st = 0;
    const auto ds = call(platform, "POST", "/datasets", json(manifest), cfg.practitioner_token, &st)["payload"]["dataset_id"];
    std::mutex mu;
    auto fresh_campaign = [&] {
      std::lock_guard lock(mu);
      // Keep two campaigns live so a nearly complete one does not starve users.
      int live = 0;
      for (const auto& c : platform.engine().campaigns()) live += c.status == CampaignStatus::Published;
      if (live >= 2) return;
      json body = {{"dataset_id", ds}, {"config", testing::make_config(40, 5)}};
      const auto id = call(platform, "POST", "/campaigns", body, cfg.practitioner_token)["payload"]["campaign_id"].get<std::string>();
      call(platform, "POST", "/campaigns/" + id + "/publish", json::object(), cfg.practitioner_token);
    };
    fresh_campaign();
    fresh_campaign();
    std::vector<std::thread> workers;
    for (int w = 0; w < kThreads; ++w) {
      workers.emplace_back([&, w] {
        std::mt19937_64 rng(w + 1);
        while (interactions.load() < kInteractions) {
          const auto user = "soak-" + std::to_string(rng() % 400);
          int status = 0;
          const auto t = Clock::now();
          auto doc = call(platform, "POST", "/serve", {{"user_id", user}}, cfg.client_token, &status);
          latencies[w].push_back(seconds_since(t) * 1000.0);
          if (status != 200) {
            ++errors;
            continue;
          }
          const auto& payload = doc["payload"];
          if (payload["no_tasks"].get<bool>()) {
            ++empty;
            fresh_campaign();
            continue;
          }
          json responses = json::array();
          for (const auto& task : payload["tasks"]) {
            responses.push_back({{"assignment_id", task["assignment_id"]},
                                 {"choice", rng() % 2 ? "Yes" : "No"},
                                 {"elapsed", 1.0 + static_cast<double>(rng() % 5000) / 1000.0}});
          }
          auto ack = call(platform, "POST", "/responses", {{"batch_id", payload["batch_id"]}, {"responses", responses}},
                          cfg.client_token, &status);
          if (status != 200) {
            ++errors;
            continue;
          }
          ++interactions;
          for (const auto& a : ack["payload"]["acks"]) {
            if (a["status"] == "accepted") {
              ++accepted;
            } else {
              ++errors;
            }
          }
        }
      });
    }
    for (auto& t : workers) t.join();
    audit_issues = platform.engine().audit().size();
    before = platform.engine().snapshot();
  }
  {
    service::Platform again(cfg, clock);
    after_restart = again.engine().audit().size();
    if (again.engine().snapshot() != before) ++after_restart;
  }
  std::filesystem::remove_all(dir);
  std::vector<double> all;
  for (auto& l : latencies) all.insert(all.end(), l.begin(), l.end());
  const double p95 = percentile(all, 0.95);
  const bool pass = interactions >= 4477 && errors == 0 && audit_issues == 0 && after_restart == 0 && p95 < 50.0;
  return {pass, fmt("interactions=%d (>=4477) serve_calls=%zu empty=%d accepted=%d errors=%d audit=%zu restart_mismatch=%zu "
                    "serve_p95=%.2fms (<50ms) p50=%.2fms",
                    interactions.load(), all.size(), empty.load(), accepted.load(), errors.load(), audit_issues, after_restart, p95,
                    percentile(all, 0.5))};
}

// Child side of the crash test: label forever, log each acknowledged id.
[[noreturn]] void crash_child(const service::ServiceConfig& cfg, const std::string& ack_path, std::uint64_t seed) {
  SystemClock clock;
  service::Platform platform(cfg, clock);
  const int fd = ::open(ack_path.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
  if (fd < 0) _exit(3);
  std::mt19937_64 rng(seed);
  std::string ds;
  for (;;) {
    auto batch = platform.serve("crash-" + std::to_string(rng() % 150));
    if (batch.no_tasks()) {
      if (ds.empty()) {
        if (platform.engine().campaigns().empty()) {
          ds = platform.upload_dataset(serialize_manifest(sim::gold_dataset()), "crash").dataset_id;
        } else {
          ds = platform.engine().campaigns().front().dataset_id;
        }
      }
      platform.publish(platform.create_campaign(ds, testing::make_config(10, 5)));
      continue;
    }
    std::vector<Response> rs;
    for (const auto& t : batch.tasks) rs.push_back({t.assignment_id, rng() % 2 ? "Yes" : "No", 1.0, 0});
    for (const auto& ack : platform.submit(batch.batch_id, rs)) {
      if (!ack.accepted) continue;
      const std::string line = ack.assignment_id + "\n";
      if (::write(fd, line.data(), line.size()) != static_cast<ssize_t>(line.size())) _exit(4);
    }
  }
}

// 6. SIGKILL the service at random points, then recover and audit.
Outcome crash_recovery() {
  const auto dir = testing::scratch_dir("crash");
  const auto ack_path = (dir / "acked.txt").string();
  service::ServiceConfig cfg;
  cfg.store_path = (dir / "store").string();
  cfg.compact_every = 250;
  std::mt19937_64 rng(606);
  int rounds = 0, failures = 0;
  std::size_t acked_total = 0, lost = 0, audit_issues = 0, torn = 0;
  std::string first_problem;
  for (int round = 0; round < 10; ++round) {
    const pid_t pid = fork();
    if (pid == 0) crash_child(cfg, ack_path, rng());
    const auto wait_ms = 50 + static_cast<int>(rng() % 450);
    std::this_thread::sleep_for(std::chrono::milliseconds(wait_ms));
    ::kill(pid, SIGKILL);
    int wstatus = 0;
    ::waitpid(pid, &wstatus, 0);
    if (!WIFSIGNALED(wstatus)) {
      ++failures;
      if (first_problem.empty()) first_problem = "child exited on its own, status " + std::to_string(wstatus);
    }
    ++rounds;

    try {
      store::FileStore probe(cfg.store_path);
      torn += probe.load().torn_records;
    } catch (const Error& e) {
      ++failures;
      if (first_problem.empty()) first_problem = e.what();
      continue;
    }
    ManualClock clock(0);
    service::Platform recovered(cfg, clock);
    const auto issues = recovered.engine().audit();
    audit_issues += issues.size();
    if (!issues.empty() && first_problem.empty()) first_problem = issues.front();
    std::set<std::string> stored;
    for (const auto& r : recovered.engine().responses()) stored.insert(r.assignment_id);
    std::ifstream in(ack_path);
    std::size_t acked = 0;
    for (std::string id; std::getline(in, id);) {
      if (id.empty()) continue;
      ++acked;
      if (!stored.count(id)) ++lost;
    }
    acked_total = acked;
  }
  std::filesystem::remove_all(dir);
  const bool pass = rounds == 10 && failures == 0 && lost == 0 && audit_issues == 0 && acked_total > 0;
  return {pass, fmt("kills=%d acknowledged=%zu lost=%zu audit=%zu torn_tails_trimmed=%zu failures=%d%s%s",
                    rounds, acked_total, lost, audit_issues, torn, failures,
                    first_problem.empty() ? "" : " first_problem=", first_problem.c_str())};
}

}  // namespace

int main(int argc, char** argv) {
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> all = {
      {1, "never-twice-and-quota", never_twice_and_quota},
      {2, "consolidation-oracle", consolidation_oracle},
      {3, "statkit-correctness", statkit},
      {4, "experiment-reproduction", experiment},
      {5, "load-soak", load_soak},
      {6, "crash-recovery", crash_recovery},
  };
  std::set<int> only;
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::strcmp(argv[i], "--only") == 0) only.insert(std::atoi(argv[++i]));
  }
  int failed = 0;
  for (const auto& c : all) {
    if (!only.empty() && !only.count(c.id)) continue;
    Outcome v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s [%d %s] %s\n", v.pass ? "PASS" : "FAIL", c.id, c.name, v.detail.c_str());
    std::fflush(stdout);
    failed += !v.pass;
  }
  return failed == 0 ? 0 : 1;
}
