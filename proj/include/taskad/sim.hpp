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

#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "taskad/metrics.hpp"
#include "taskad/model.hpp"
#include "taskad/stats.hpp"

namespace taskad::sim {

enum class Condition { Control, Rewarded, NonOptional };

std::string_view to_string(Condition condition);
/// Accepts "control", "rewarded", "nonoptional" (any case).
Condition condition_from(std::string_view text);

struct LognormalParams {
  double mu = 0.0;
  double sigma = 0.0;
};

/// Lognormal with the given median and mean: mu = ln(median),
/// sigma = sqrt(2 ln(mean / median)). Throws InfeasibleCalibration when
/// mean < median or either is non-positive.
LognormalParams fit_lognormal(double median, double mean);

/// Per-condition descriptive targets, across participants.
struct ConditionTargets {
  int participants = 0;
  double labels_median = 0.0;
  double labels_mean = 0.0;
  double success_median = 0.0;
  double success_mean = 0.0;
  double success_sd = 0.0;
  double time_median = 0.0;
  double time_mean = 0.0;
  double time_sd = 0.0;
};

struct CalibrationTargets {
  std::map<Condition, ConditionTargets> conditions;
  double engager_probability = 0.72;
};

/// The reported per-condition statistics of the field experiment.
CalibrationTargets reference_targets();

/// Behavioural knobs the descriptive targets do not pin down.
struct BehaviorParams {
  double within_sigma = 0.45;   // per-label log-spread around a participant's own mean time
  double notsure_share = 0.3;   // share of non-correct answers that are "Not sure"
};

struct WorkerProfile {
  double p_correct = 1.0;
  double p_notsure = 0.0;
  LognormalParams latency;  // this participant's per-label seconds
  double mean_time = 0.0;   // exp(mu + sigma^2 / 2)
  bool engager = true;
  std::uint64_t rng_seed = 0;

  void validate() const;
};

/// Draws one participant. p_correct comes from a Beta distribution
/// moment-matched to the condition's success mean/sd. The participant's own
/// mean time per label comes from the lognormal fitted to the condition's
/// median/mean; individual labels scatter around it with `within_sigma`.
WorkerProfile make_profile(Condition condition, const ConditionTargets& targets, std::uint64_t seed,
                           const BehaviorParams& behavior = {},
                           double engager_probability = 0.72);

struct AnswerDraw {
  std::string choice;
  double elapsed = 0.0;
};

/// Correct option with p_correct, "Not sure" with p_notsure, the wrong one
/// otherwise. Elapsed is truncated to (0, time_budget].
AnswerDraw answer(const LabelItem& item, const WorkerProfile& profile, std::mt19937_64& rng,
                  double time_budget = kMaxTimeBudget);

/// 50 items, five classes, five true and five false positives per class.
DatasetManifest gold_dataset();

struct ScenarioConfig {
  std::vector<Condition> conditions = {Condition::Control, Condition::Rewarded,
                                       Condition::NonOptional};
  std::map<Condition, int> n_participants = {
      {Condition::Control, 99}, {Condition::Rewarded, 100}, {Condition::NonOptional, 97}};
  double session_length = 600.0;    // seconds of wall time per game session
  double gameover_rate = 1.25;      // gameovers per minute of gameplay (calibrated)
  double ad_interval = 60.0;        // non-optional: one ad per this much gameplay
  double rewarded_optin = 0.35;     // engagers: acceptance of each offer after the first (calibrated)
  double engager_probability = 0.72;
  int batch_size = 5;
  double time_budget = kMaxTimeBudget;
  int reward_points = 5;
  int required_engagements = 0;     // 0: one engagement per participant
  double reservation_ttl = 180.0;
  std::uint64_t master_seed = 1;
  CalibrationTargets targets = reference_targets();
  BehaviorParams behavior;
  bool keep_event_log = true;

  void validate() const;
};

struct ParticipantRecord {
  Condition condition = Condition::Control;
  std::string user_id;
  metrics::ParticipantScore score;
  bool missing = false;      // no accepted label
  int client_answered = 0;   // sum of SDK-reported accepted answers
  int ads_shown = 0;
  int offers_declined = 0;
  int rewards = 0;
  WorkerProfile profile;
};

struct ExperimentReport {
  json config;
  std::vector<ParticipantRecord> participants;
  std::vector<std::string> event_log;
  std::vector<std::string> violations;  // invariant or reconciliation failures
  json analysis;
};

ExperimentReport run_experiment(const ScenarioConfig& config);

/// Descriptives in the four-block layout (images labeled, correct labels,
/// success rate, time per label) plus Levene, Welch ANOVA and Games-Howell on
/// success rate and time per label. Throws InsufficientGroups with fewer than
/// two non-empty conditions.
json analyze(const ExperimentReport& report, double alpha = stats::kDefaultAlpha);

/// Per-condition samples of one metric over non-missing participants.
std::vector<stats::Sample> metric_samples(const ExperimentReport& report, std::string_view metric);

struct CalibrationResult {
  int batch_size = 5;
  double gameover_rate = 1.0;
  double rewarded_optin = 0.3;
  double nonoptional_labels_median = 0.0;
  double rewarded_labels_median = 0.0;
  json sweep;
};

/// Grid search over batch size and gameover rate (non-optional label count)
/// and then the rewarded opt-in rate (rewarded label count).
CalibrationResult calibrate(const CalibrationTargets& targets, ScenarioConfig base, int seeds = 3);

json to_json(const ScenarioConfig& config);
ScenarioConfig scenario_from_json(const json& j);
json to_json(const CalibrationTargets& targets);
CalibrationTargets targets_from_json(const json& j);
json to_json(const ExperimentReport& report);
ExperimentReport report_from_json(const json& j);
json to_json(const CalibrationResult& result);

}  // namespace taskad::sim
