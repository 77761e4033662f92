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

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "taskad/clock.hpp"
#include "taskad/error.hpp"

namespace taskad {

using json = nlohmann::json;

// Canonical option labels. Only "Yes" and "No" carry a vote; anything else
// abstains.
inline constexpr std::string_view kYes = "Yes";
inline constexpr std::string_view kNo = "No";
inline constexpr std::string_view kNotSure = "Not sure";

inline constexpr std::string_view kClassPlaceholder = "{class}";
inline constexpr double kMaxTimeBudget = 30.0;

enum class Gold { Yes, No };
enum class Vote { Yes, No, Abstain };
enum class Verdict { Yes, No, Undecided };
enum class CampaignStatus { Draft, Published, Unpublished, Complete };
enum class AssignmentState { InFlight, Completed, Expired };

Vote vote_of(std::string_view choice);
std::string_view to_string(Gold gold);
std::string_view to_string(Verdict verdict);
std::string_view to_string(CampaignStatus status);
std::string_view to_string(AssignmentState state);
CampaignStatus campaign_status_from(std::string_view text);
AssignmentState assignment_state_from(std::string_view text);

struct LabelItem {
  std::string item_id;
  std::string media_ref;
  std::string class_name;
  std::optional<Gold> gold;

  bool operator==(const LabelItem&) const = default;
};

struct DatasetManifest {
  std::string dataset_id;
  std::string name;
  std::vector<LabelItem> items;
  Timestamp created_at = 0.0;
};

struct CampaignConfig {
  std::string prompt_template = "Does this image contain a {class}?";
  std::vector<std::string> options = {std::string(kYes), std::string(kNo),
                                      std::string(kNotSure)};
  int required_engagements = 3;
  int batch_size = 5;
  double time_budget = kMaxTimeBudget;  // seconds per task display
  int reward_points = 5;

  /// Throws InvalidConfig naming the first violated invariant.
  void validate() const;
  bool has_option(std::string_view choice) const;
};

struct Campaign {
  std::string campaign_id;
  std::string dataset_id;
  CampaignConfig config;
  CampaignStatus status = CampaignStatus::Draft;
};

struct WorkerIdentity {
  std::string user_id;
  Timestamp created_at = 0.0;
};

struct Assignment {
  std::string assignment_id;
  std::string campaign_id;
  std::string item_id;
  std::string user_id;
  std::string batch_id;
  Timestamp reserved_at = 0.0;
  Timestamp expires_at = 0.0;
  AssignmentState state = AssignmentState::InFlight;
};

struct Response {
  std::string assignment_id;
  std::string choice;
  double elapsed = 0.0;  // display to answer, client-measured
  Timestamp submitted_at = 0.0;
};

struct ConsolidatedLabel {
  std::string item_id;
  Verdict verdict = Verdict::Undecided;
  std::map<std::string, int> vote_counts;
  bool complete = false;
};

/// Parses and checks a line-delimited manifest. Blank lines are skipped; line
/// numbers in errors are 1-based.
DatasetManifest validate_manifest(std::string_view raw);

/// Inverse of validate_manifest: one record per line, gold included.
std::string serialize_manifest(const DatasetManifest& manifest);

std::string render_prompt(const CampaignConfig& config, const LabelItem& item);

bool transition_allowed(CampaignStatus from, CampaignStatus to);
Campaign transition(const Campaign& campaign, CampaignStatus target);

// JSON mapping. The item mapping carries gold; client-facing payloads are
// built elsewhere and never go through it.
void to_json(json& j, const LabelItem& item);
void from_json(const json& j, LabelItem& item);
void to_json(json& j, const DatasetManifest& manifest);
void from_json(const json& j, DatasetManifest& manifest);
void to_json(json& j, const CampaignConfig& config);
void from_json(const json& j, CampaignConfig& config);
void to_json(json& j, const Campaign& campaign);
void from_json(const json& j, Campaign& campaign);
void to_json(json& j, const Assignment& assignment);
void from_json(const json& j, Assignment& assignment);
void to_json(json& j, const ConsolidatedLabel& label);

}  // namespace taskad
