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

#include "taskad/sim.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>

#include "taskad/error.hpp"
#include "taskad/platform.hpp"
#include "taskad/sdk.hpp"
#include "taskad/store.hpp"

namespace taskad::sim {
namespace {

constexpr Timestamp kEpoch = 1.6e9;

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive(std::uint64_t master, std::uint64_t a, std::uint64_t b) {
  return splitmix(splitmix(master ^ splitmix(a + 1)) ^ splitmix(b + 0x51ed));
}

int condition_index(Condition c) { return static_cast<int>(c); }

std::string user_id_for(Condition c, int i) {
  std::string id(to_string(c));
  id += '-';
  id += std::to_string(i + 1);
  return id;
}

double beta_draw(double mean, double sd, std::mt19937_64& rng) {
  const double var = sd * sd;
  const double cap = mean * (1.0 - mean);
  if (!(mean > 0.0 && mean < 1.0) || !(var > 0.0) || var >= cap) {
    throw Error(ErrorCode::InfeasibleCalibration,
                "no beta distribution has mean " + std::to_string(mean) + " and sd " +
                    std::to_string(sd));
  }
  const double nu = cap / var - 1.0;
  std::gamma_distribution<double> ga(mean * nu, 1.0), gb((1.0 - mean) * nu, 1.0);
  const double x = ga(rng);
  const double y = gb(rng);
  return x / (x + y);
}

json stats_block(const stats::Descriptives& d) {
  json j = {{"n", d.n}, {"median", d.median}, {"mean", d.mean}, {"min", d.min}, {"max", d.max}};
  j["sd"] = d.sd ? json(*d.sd) : json(nullptr);
  return j;
}

}  // namespace

std::string_view to_string(Condition condition) {
  switch (condition) {
    case Condition::Control: return "control";
    case Condition::Rewarded: return "rewarded";
    case Condition::NonOptional: return "nonoptional";
  }
  return "control";
}

Condition condition_from(std::string_view text) {
  std::string s;
  for (char c : text) {
    if (c == '-' || c == '_') continue;
    s += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  if (s == "control") return Condition::Control;
  if (s == "rewarded") return Condition::Rewarded;
  if (s == "nonoptional") return Condition::NonOptional;
  throw Error(ErrorCode::ConfigInvalid, "unknown condition", std::string(text));
}

LognormalParams fit_lognormal(double median, double mean) {
  if (!(median > 0.0) || !(mean > 0.0) || !std::isfinite(median) || !std::isfinite(mean)) {
    throw Error(ErrorCode::InfeasibleCalibration, "median and mean must be positive");
  }
  if (mean < median) {
    throw Error(ErrorCode::InfeasibleCalibration,
                "a lognormal cannot have its mean below its median");
  }
  return {std::log(median), std::sqrt(2.0 * std::log(mean / median))};
}

CalibrationTargets reference_targets() {
  CalibrationTargets t;
  t.conditions[Condition::Control] = {99, 50, 47.14, 0.82, 0.815, 0.10, 6.42, 7.88, 5.29};
  t.conditions[Condition::Rewarded] = {72, 17, 20.33, 0.80, 0.763, 0.22, 3.99, 4.58, 3.39};
  t.conditions[Condition::NonOptional] = {97, 25, 26.77, 0.84, 0.806, 0.14, 3.32, 4.39, 3.41};
  t.engager_probability = 0.72;
  return t;
}

void WorkerProfile::validate() const {
  auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!prob(p_correct) || !prob(p_notsure) || p_correct + p_notsure > 1.0 + 1e-12) {
    throw Error(ErrorCode::ConfigInvalid, "answer probabilities must lie in [0, 1] and sum to at most 1");
  }
  if (!std::isfinite(latency.mu) || !(latency.sigma >= 0.0)) {
    throw Error(ErrorCode::ConfigInvalid, "latency parameters must be finite");
  }
}

WorkerProfile make_profile(Condition condition, const ConditionTargets& targets, std::uint64_t seed,
                           const BehaviorParams& behavior, double engager_probability) {
  std::mt19937_64 rng(seed);
  WorkerProfile p;
  p.rng_seed = splitmix(seed);
  p.p_correct = std::clamp(beta_draw(targets.success_mean, targets.success_sd, rng), 0.0, 1.0);
  p.p_notsure = (1.0 - p.p_correct) * std::clamp(behavior.notsure_share, 0.0, 1.0);

  const auto population = fit_lognormal(targets.time_median, targets.time_mean);
  std::normal_distribution<double> z;
  p.mean_time = std::exp(population.mu + population.sigma * z(rng));
  const double w = std::max(0.0, behavior.within_sigma);
  p.latency = {std::log(p.mean_time) - 0.5 * w * w, w};

  std::uniform_real_distribution<double> u;
  const double draw = u(rng);
  p.engager = condition != Condition::Rewarded || draw < engager_probability;
  p.validate();
  return p;
}

AnswerDraw answer(const LabelItem& item, const WorkerProfile& profile, std::mt19937_64& rng,
                  double time_budget) {
  std::uniform_real_distribution<double> u;
  const Gold truth = item.gold.value_or(Gold::Yes);
  const std::string right(truth == Gold::Yes ? kYes : kNo);
  const std::string wrong(truth == Gold::Yes ? kNo : kYes);
  AnswerDraw out;
  const double r = u(rng);
  if (r < profile.p_correct) {
    out.choice = right;
  } else if (r < profile.p_correct + profile.p_notsure) {
    out.choice = std::string(kNotSure);
  } else {
    out.choice = wrong;
  }
  std::lognormal_distribution<double> ln(profile.latency.mu, profile.latency.sigma);
  double t = profile.latency.sigma > 0.0 ? ln(rng) : std::exp(profile.latency.mu);
  t = std::min(t, time_budget);
  out.elapsed = std::max(t, 1e-3);
  return out;
}

DatasetManifest gold_dataset() {
  static const char* kClasses[] = {"Aircraft", "Bird", "Bicycle", "Boat", "Dog"};
  DatasetManifest m;
  m.name = "gold-50";
  int n = 0;
  for (const char* cls : kClasses) {
    std::string lower(cls);
    for (auto& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    for (int k = 0; k < 10; ++k) {
      ++n;
      LabelItem item;
      item.item_id = "img-" + std::to_string(n);
      item.media_ref = "images/" + lower + "/" + std::to_string(k + 1) + ".jpg";
      item.class_name = cls;
      item.gold = k < 5 ? Gold::Yes : Gold::No;
      m.items.push_back(std::move(item));
    }
  }
  return m;
}

void ScenarioConfig::validate() const {
  if (conditions.empty()) throw Error(ErrorCode::ConfigInvalid, "no conditions to simulate");
  for (auto c : conditions) {
    auto it = n_participants.find(c);
    if (it == n_participants.end() || it->second < 1) {
      throw Error(ErrorCode::ConfigInvalid, "participant count must be at least 1",
                  std::string(to_string(c)));
    }
    if (!targets.conditions.count(c)) {
      throw Error(ErrorCode::ConfigInvalid, "no calibration targets", std::string(to_string(c)));
    }
  }
  if (!(session_length > 0.0)) throw Error(ErrorCode::ConfigInvalid, "session_length must be positive");
  if (!(gameover_rate > 0.0)) throw Error(ErrorCode::ConfigInvalid, "gameover_rate must be positive");
  if (!(ad_interval > 0.0)) throw Error(ErrorCode::ConfigInvalid, "ad_interval must be positive");
  if (rewarded_optin < 0.0 || rewarded_optin > 1.0 || engager_probability < 0.0 ||
      engager_probability > 1.0) {
    throw Error(ErrorCode::ConfigInvalid, "probabilities must lie in [0, 1]");
  }
  if (required_engagements < 0) throw Error(ErrorCode::ConfigInvalid, "required_engagements must be >= 0");
  if (!(reservation_ttl > 0.0)) throw Error(ErrorCode::ConfigInvalid, "reservation_ttl must be positive");
}

ExperimentReport run_experiment(const ScenarioConfig& config) {
  config.validate();
  ExperimentReport report;
  report.config = to_json(config);

  ManualClock clock(kEpoch);
  service::ServiceConfig sc;
  sc.reservation_ttl = config.reservation_ttl;
  sc.selection_seed = derive(config.master_seed, 99, 0);
  sc.compact_every = 0;
  service::Platform platform(sc, clock, std::make_unique<store::MemoryStore>());

  const DatasetManifest gold = gold_dataset();
  std::map<std::string, LabelItem> by_id;
  for (const auto& item : gold.items) by_id[item.item_id] = item;
  const auto dataset = platform.upload_dataset(serialize_manifest(gold), gold.name);

  auto log = [&](json line) {
    if (config.keep_event_log) report.event_log.push_back(line.dump());
  };

  sdk::InProcessTransport transport(platform, sc.client_token);
  sdk::ClientOptions options;
  options.enforce_deadline = false;

  for (Condition cond : config.conditions) {
    const int n = config.n_participants.at(cond);
    const auto& targets = config.targets.conditions.at(cond);

    CampaignConfig cc;
    cc.required_engagements = config.required_engagements > 0 ? config.required_engagements : n;
    cc.batch_size = config.batch_size;
    cc.time_budget = config.time_budget;
    cc.reward_points = config.reward_points;
    const auto campaign_id = platform.create_campaign(dataset.dataset_id, cc);
    platform.publish(campaign_id);
    log({{"t", clock.now() - kEpoch}, {"ev", "publish"}, {"condition", to_string(cond)},
         {"campaign", campaign_id}});

    for (int i = 0; i < n; ++i) {
      ParticipantRecord rec;
      rec.condition = cond;
      rec.user_id = user_id_for(cond, i);
      rec.profile = make_profile(cond, targets, derive(config.master_seed, condition_index(cond), i),
                                 config.behavior, config.engager_probability);
      std::mt19937_64 rng(rec.profile.rng_seed);
      std::uniform_real_distribution<double> u;

      sdk::SeenCache cache;
      sdk::TaskAdClient client(transport, cache, clock, options);
      bool first_offer = true;

      sdk::AdSlotContext ctx;
      ctx.user_id = rec.user_id;
      ctx.mode = cond == Condition::Rewarded ? sdk::AdMode::Rewarded : sdk::AdMode::NonOptional;
      ctx.reward_points = config.reward_points;
      ctx.time_budget = config.time_budget;
      ctx.hook.offer = [&](int) {
        const bool take = rec.profile.engager && (first_offer || u(rng) < config.rewarded_optin);
        first_offer = false;
        return take;
      };
      ctx.hook.present = [&](const sdk::TaskView& view) -> std::optional<sdk::Answer> {
        const auto draw = answer(by_id.at(view.item_id), rec.profile, rng, config.time_budget);
        clock.advance(draw.elapsed);
        return sdk::Answer{draw.choice, draw.elapsed};
      };

      auto show = [&]() {
        const auto out = client.show_task_ad(ctx);
        rec.client_answered += out.n_answered;
        rec.rewards += out.reward_granted;
        if (out.status == sdk::AdStatus::Error) {
          report.violations.push_back(rec.user_id + ": " + out.error);
        }
        log({{"t", clock.now() - kEpoch}, {"ev", "ad"}, {"user", rec.user_id},
             {"status", to_string(out.status)}, {"served", out.n_served},
             {"answered", out.n_answered}, {"reward", out.reward_granted}});
        return out.status;
      };

      if (cond == Condition::Control) {
        // Unrestricted labeling: keep requesting until the campaign is dry.
        for (int guard = 0; guard < 10000; ++guard) {
          const auto status = show();
          if (status == sdk::AdStatus::NoTasks || status == sdk::AdStatus::Error) break;
        }
      } else {
        std::exponential_distribution<double> gap(config.gameover_rate / 60.0);
        const Timestamp start = clock.now();
        double gameplay = 0.0;
        double next_boundary = config.ad_interval;
        bool dry = false;
        for (;;) {
          const double dt = gap(rng);
          const double left = config.session_length - (clock.now() - start);
          if (dt >= left) {
            clock.advance(std::max(left, 0.0));
            break;
          }
          clock.advance(dt);
          gameplay += dt;
          if (dry) continue;
          if (cond == Condition::NonOptional) {
            if (gameplay < next_boundary) continue;
            next_boundary = (std::floor(gameplay / config.ad_interval) + 1.0) * config.ad_interval;
          }
          const auto status = show();
          if (status == sdk::AdStatus::NoTasks || status == sdk::AdStatus::Error) dry = true;
        }
      }
      rec.ads_shown = static_cast<int>(client.metrics().ads_shown);
      rec.offers_declined = static_cast<int>(client.metrics().offers_declined);
      report.participants.push_back(std::move(rec));
      clock.advance(1.0);
    }

    if (platform.engine().campaign(campaign_id).status == CampaignStatus::Published) {
      platform.unpublish(campaign_id);
    }
    const auto view = platform.engine().view(campaign_id);
    std::map<std::string, std::vector<metrics::ScoredRecord>> per_user;
    for (const auto& r : view.responses) {
      per_user[r.user_id].push_back({r.choice, by_id.at(r.item_id).gold.value_or(Gold::Yes),
                                     r.elapsed});
    }
    for (auto& rec : report.participants) {
      if (rec.condition != cond) continue;
      auto it = per_user.find(rec.user_id);
      if (it == per_user.end()) {
        rec.missing = true;
        rec.score.user_id = rec.user_id;
      } else {
        rec.score = metrics::score_participant(it->second, rec.user_id);
      }
      if (rec.score.n_labeled != rec.client_answered) {
        report.violations.push_back(rec.user_id + ": service stored " +
                                    std::to_string(rec.score.n_labeled) + " labels, client saw " +
                                    std::to_string(rec.client_answered));
      }
    }
  }

  for (auto& v : platform.engine().audit(sc.overcommit)) report.violations.push_back(v);

  std::size_t groups = 0;
  for (Condition cond : config.conditions) {
    for (const auto& r : report.participants) {
      if (r.condition == cond && !r.missing) {
        ++groups;
        break;
      }
    }
  }
  if (groups >= 2) report.analysis = analyze(report);
  return report;
}

std::vector<stats::Sample> metric_samples(const ExperimentReport& report, std::string_view metric) {
  std::vector<Condition> order;
  for (const auto& r : report.participants) {
    if (std::find(order.begin(), order.end(), r.condition) == order.end()) order.push_back(r.condition);
  }
  std::vector<stats::Sample> out;
  for (Condition c : order) {
    stats::Sample s{std::string(to_string(c)), {}};
    for (const auto& r : report.participants) {
      if (r.condition != c || r.missing) continue;
      if (metric == "success_rate") s.values.push_back(r.score.success_rate);
      else if (metric == "time_per_label") s.values.push_back(r.score.mean_time);
      else if (metric == "images_labeled") s.values.push_back(r.score.n_labeled);
      else if (metric == "correct_labels") s.values.push_back(r.score.n_correct);
      else throw Error(ErrorCode::ConfigInvalid, "unknown metric", std::string(metric));
    }
    if (!s.values.empty()) out.push_back(std::move(s));
  }
  return out;
}

json analyze(const ExperimentReport& report, double alpha) {
  static const char* kMetrics[] = {"images_labeled", "correct_labels", "success_rate",
                                   "time_per_label"};
  json doc;
  const auto labeled = metric_samples(report, "images_labeled");
  if (labeled.size() < 2) {
    throw Error(ErrorCode::InsufficientGroups, "analysis needs at least two conditions with data");
  }

  json conditions = json::object();
  for (const auto& r : report.participants) {
    auto& c = conditions[std::string(to_string(r.condition))];
    if (c.is_null()) c = {{"participants", 0}, {"missing", 0}};
    c[r.missing ? "missing" : "participants"] = c[r.missing ? "missing" : "participants"].get<int>() + 1;
  }
  for (const char* m : kMetrics) {
    for (const auto& s : metric_samples(report, m)) {
      conditions[s.group_name][m] = stats_block(stats::descriptives(s));
    }
  }
  doc["descriptives"] = conditions;
  doc["alpha"] = alpha;

  for (const char* m : {"success_rate", "time_per_label"}) {
    const auto samples = metric_samples(report, m);
    json block;
    auto attempt = [&](const char* name, auto&& fn) {
      try {
        block[name] = fn();
      } catch (const Error& e) {
        block[name] = {{"error", std::string(to_string(e.code()))}, {"message", e.what()}};
      }
    };
    attempt("levene", [&] { return stats::to_json(stats::levene(samples, stats::LeveneCenter::Mean, alpha)); });
    attempt("welch", [&] { return stats::to_json(stats::welch_anova(samples, alpha)); });
    attempt("games_howell", [&] {
      json arr = json::array();
      for (const auto& p : stats::games_howell(samples, alpha)) arr.push_back(stats::to_json(p));
      return arr;
    });
    doc[m] = block;
  }
  return doc;
}

namespace {

double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

struct LabelStats {
  double median = 0.0;
  double mean = 0.0;
};

// Median over seeds of the per-run median and mean label counts.
LabelStats label_stats(const ScenarioConfig& cfg, int seeds) {
  std::vector<double> medians, means;
  for (int s = 0; s < seeds; ++s) {
    ScenarioConfig run = cfg;
    run.master_seed = derive(cfg.master_seed, 1000, s);
    run.keep_event_log = false;
    const auto rep = run_experiment(run);
    std::vector<double> v;
    for (const auto& r : rep.participants) {
      if (!r.missing) v.push_back(r.score.n_labeled);
    }
    double sum = 0.0;
    for (double x : v) sum += x;
    medians.push_back(median_of(v));
    means.push_back(v.empty() ? 0.0 : sum / static_cast<double>(v.size()));
  }
  return {median_of(medians), median_of(means)};
}

}  // namespace

CalibrationResult calibrate(const CalibrationTargets& targets, ScenarioConfig base, int seeds) {
  if (seeds < 1) throw Error(ErrorCode::ConfigInvalid, "seeds must be at least 1");
  for (auto c : {Condition::Rewarded, Condition::NonOptional}) {
    if (!targets.conditions.count(c)) {
      throw Error(ErrorCode::InfeasibleCalibration, "missing targets", std::string(to_string(c)));
    }
  }
  base.targets = targets;
  base.engager_probability = targets.engager_probability;
  CalibrationResult best;
  best.sweep = json::array();
  double best_err = std::numeric_limits<double>::infinity();

  const auto& non = targets.conditions.at(Condition::NonOptional);
  for (int batch : {3, 4, 5, 6}) {
    for (int step = 0; step <= 10; ++step) {
      const double rate = 0.5 + 0.25 * step;
      ScenarioConfig cfg = base;
      cfg.conditions = {Condition::NonOptional};
      cfg.batch_size = batch;
      cfg.gameover_rate = rate;
      const auto got = label_stats(cfg, seeds);
      const double med = got.median;
      // The median moves in steps of the batch size; the mean breaks ties.
      const double err = std::abs(med - non.labels_median) + 0.5 * std::abs(got.mean - non.labels_mean) +
                         (batch == base.batch_size ? 0.0 : 0.25);
      best.sweep.push_back({{"condition", "nonoptional"}, {"batch_size", batch},
                            {"gameover_rate", rate}, {"labels_median", med},
                            {"labels_mean", got.mean}});
      if (err < best_err) {
        best_err = err;
        best.batch_size = batch;
        best.gameover_rate = rate;
        best.nonoptional_labels_median = med;
      }
    }
  }

  const auto& rew = targets.conditions.at(Condition::Rewarded);
  best_err = std::numeric_limits<double>::infinity();
  for (int step = 0; step <= 20; ++step) {
    const double optin = 0.05 * step;
    ScenarioConfig cfg = base;
    cfg.conditions = {Condition::Rewarded};
    cfg.batch_size = best.batch_size;
    cfg.gameover_rate = best.gameover_rate;
    cfg.rewarded_optin = optin;
    const auto got = label_stats(cfg, seeds);
    const double med = got.median;
    best.sweep.push_back({{"condition", "rewarded"}, {"rewarded_optin", optin},
                          {"labels_median", med}, {"labels_mean", got.mean}});
    const double err = std::abs(med - rew.labels_median) + 0.5 * std::abs(got.mean - rew.labels_mean);
    if (err < best_err) {
      best_err = err;
      best.rewarded_optin = optin;
      best.rewarded_labels_median = med;
    }
  }
  return best;
}

json to_json(const CalibrationTargets& targets) {
  json j = {{"engager_probability", targets.engager_probability}, {"conditions", json::object()}};
  for (const auto& [c, t] : targets.conditions) {
    j["conditions"][std::string(to_string(c))] = {
        {"participants", t.participants},   {"labels_median", t.labels_median},
        {"labels_mean", t.labels_mean},     {"success_median", t.success_median},
        {"success_mean", t.success_mean},   {"success_sd", t.success_sd},
        {"time_median", t.time_median},     {"time_mean", t.time_mean},
        {"time_sd", t.time_sd}};
  }
  return j;
}

CalibrationTargets targets_from_json(const json& j) {
  CalibrationTargets t = reference_targets();
  t.engager_probability = j.value("engager_probability", t.engager_probability);
  if (j.contains("conditions")) {
    for (const auto& [name, v] : j.at("conditions").items()) {
      const Condition c = condition_from(name);
      auto& ct = t.conditions[c];
      ct.participants = v.value("participants", ct.participants);
      ct.labels_median = v.value("labels_median", ct.labels_median);
      ct.labels_mean = v.value("labels_mean", ct.labels_mean);
      ct.success_median = v.value("success_median", ct.success_median);
      ct.success_mean = v.value("success_mean", ct.success_mean);
      ct.success_sd = v.value("success_sd", ct.success_sd);
      ct.time_median = v.value("time_median", ct.time_median);
      ct.time_mean = v.value("time_mean", ct.time_mean);
      ct.time_sd = v.value("time_sd", ct.time_sd);
    }
  }
  return t;
}

json to_json(const ScenarioConfig& c) {
  json conds = json::array();
  json counts = json::object();
  for (auto cond : c.conditions) conds.push_back(std::string(to_string(cond)));
  for (const auto& [cond, n] : c.n_participants) counts[std::string(to_string(cond))] = n;
  return {{"conditions", conds},
          {"n_participants", counts},
          {"session_length", c.session_length},
          {"gameover_rate", c.gameover_rate},
          {"ad_interval", c.ad_interval},
          {"rewarded_optin", c.rewarded_optin},
          {"engager_probability", c.engager_probability},
          {"batch_size", c.batch_size},
          {"time_budget", c.time_budget},
          {"reward_points", c.reward_points},
          {"required_engagements", c.required_engagements},
          {"reservation_ttl", c.reservation_ttl},
          {"master_seed", c.master_seed},
          {"within_sigma", c.behavior.within_sigma},
          {"notsure_share", c.behavior.notsure_share},
          {"targets", to_json(c.targets)}};
}

ScenarioConfig scenario_from_json(const json& j) {
  ScenarioConfig c;
  if (j.contains("conditions")) {
    c.conditions.clear();
    for (const auto& s : j.at("conditions")) c.conditions.push_back(condition_from(s.get<std::string>()));
  }
  if (j.contains("n_participants")) {
    for (const auto& [name, n] : j.at("n_participants").items()) {
      c.n_participants[condition_from(name)] = n.get<int>();
    }
  }
  c.session_length = j.value("session_length", c.session_length);
  c.gameover_rate = j.value("gameover_rate", c.gameover_rate);
  c.ad_interval = j.value("ad_interval", c.ad_interval);
  c.rewarded_optin = j.value("rewarded_optin", c.rewarded_optin);
  c.engager_probability = j.value("engager_probability", c.engager_probability);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.time_budget = j.value("time_budget", c.time_budget);
  c.reward_points = j.value("reward_points", c.reward_points);
  c.required_engagements = j.value("required_engagements", c.required_engagements);
  c.reservation_ttl = j.value("reservation_ttl", c.reservation_ttl);
  c.master_seed = j.value("master_seed", c.master_seed);
  c.behavior.within_sigma = j.value("within_sigma", c.behavior.within_sigma);
  c.behavior.notsure_share = j.value("notsure_share", c.behavior.notsure_share);
  if (j.contains("targets")) c.targets = targets_from_json(j.at("targets"));
  return c;
}

json to_json(const ExperimentReport& report) {
  json parts = json::array();
  for (const auto& r : report.participants) {
    json score;
    metrics::to_json(score, r.score);
    parts.push_back({{"condition", to_string(r.condition)},
                     {"user_id", r.user_id},
                     {"missing", r.missing},
                     {"score", score},
                     {"client_answered", r.client_answered},
                     {"ads_shown", r.ads_shown},
                     {"offers_declined", r.offers_declined},
                     {"rewards", r.rewards},
                     {"profile",
                      {{"p_correct", r.profile.p_correct},
                       {"p_notsure", r.profile.p_notsure},
                       {"mean_time", r.profile.mean_time},
                       {"latency_mu", r.profile.latency.mu},
                       {"latency_sigma", r.profile.latency.sigma},
                       {"engager", r.profile.engager},
                       {"rng_seed", r.profile.rng_seed}}}});
  }
  return {{"config", report.config},
          {"participants", parts},
          {"event_log", report.event_log},
          {"violations", report.violations},
          {"analysis", report.analysis}};
}

ExperimentReport report_from_json(const json& j) {
  ExperimentReport r;
  r.config = j.value("config", json::object());
  for (const auto& p : j.at("participants")) {
    ParticipantRecord rec;
    rec.condition = condition_from(p.at("condition").get<std::string>());
    rec.user_id = p.at("user_id").get<std::string>();
    rec.missing = p.value("missing", false);
    metrics::from_json(p.at("score"), rec.score);
    rec.client_answered = p.value("client_answered", 0);
    rec.ads_shown = p.value("ads_shown", 0);
    rec.offers_declined = p.value("offers_declined", 0);
    rec.rewards = p.value("rewards", 0);
    if (p.contains("profile")) {
      const auto& pr = p.at("profile");
      rec.profile.p_correct = pr.value("p_correct", 1.0);
      rec.profile.p_notsure = pr.value("p_notsure", 0.0);
      rec.profile.mean_time = pr.value("mean_time", 0.0);
      rec.profile.latency = {pr.value("latency_mu", 0.0), pr.value("latency_sigma", 0.0)};
      rec.profile.engager = pr.value("engager", true);
      rec.profile.rng_seed = pr.value("rng_seed", std::uint64_t{0});
    }
    r.participants.push_back(std::move(rec));
  }
  if (j.contains("event_log")) r.event_log = j.at("event_log").get<std::vector<std::string>>();
  if (j.contains("violations")) r.violations = j.at("violations").get<std::vector<std::string>>();
  r.analysis = j.value("analysis", json());
  return r;
}

json to_json(const CalibrationResult& result) {
  return {{"batch_size", result.batch_size},
          {"gameover_rate", result.gameover_rate},
          {"rewarded_optin", result.rewarded_optin},
          {"nonoptional_labels_median", result.nonoptional_labels_median},
          {"rewarded_labels_median", result.rewarded_labels_median},
          {"sweep", result.sweep}};
}

}  // namespace taskad::sim
