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
#include <span>
#include <string>
#include <vector>

#include "taskad/engine.hpp"
#include "taskad/model.hpp"

namespace taskad::metrics {

/// Plurality over Yes/No; every other option abstains. A Yes/No tie (including
/// 0-0) is Undecided. Throws TooManyResponses when more than K are given.
ConsolidatedLabel consolidate(std::span<const std::string> choices, int required_engagements,
                              std::string item_id = {});

struct ScoredRecord {
  std::string choice;
  Gold gold = Gold::Yes;
  double elapsed = 0.0;
};

struct ParticipantScore {
  std::string user_id;
  int n_labeled = 0;
  int n_correct = 0;
  double success_rate = 0.0;
  double mean_time = 0.0;
  double median_time = 0.0;
};

bool is_correct(std::string_view choice, Gold gold);

/// "Not sure" (or any non Yes/No option) counts as labeled and incorrect.
ParticipantScore score_participant(std::span<const ScoredRecord> records,
                                   std::string user_id = {});

struct ProgressReport {
  std::string campaign_id;
  CampaignStatus status = CampaignStatus::Draft;
  int items_total = 0;
  int items_complete = 0;
  int responses_total = 0;
  int in_flight = 0;
  std::map<Verdict, int> verdict_histogram;  // over complete items only
  Timestamp generated_at = 0.0;
  std::uint64_t version = 0;
};

ProgressReport progress(const dissem::CampaignView& view, Timestamp now);

/// One export line per item: {item_id, verdict, vote_counts, n_responses,
/// complete} plus gold_match when the item has gold and a Yes/No verdict.
/// With `detail`, each record also lists its responses.
std::vector<json> export_records(const dissem::CampaignView& view, bool detail = false);
std::string export_ndjson(const dissem::CampaignView& view, bool detail = false);

void to_json(json& j, const ParticipantScore& s);
void from_json(const json& j, ParticipantScore& s);
void to_json(json& j, const ProgressReport& r);

}  // namespace taskad::metrics
