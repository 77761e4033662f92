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

#include "taskad/metrics.hpp"

#include <algorithm>
#include <numeric>

namespace taskad::metrics {

ConsolidatedLabel consolidate(std::span<const std::string> choices, int required_engagements,
                              std::string item_id) {
  if (static_cast<long>(choices.size()) > required_engagements) {
    throw Error(ErrorCode::TooManyResponses,
                std::to_string(choices.size()) + " responses for K=" +
                    std::to_string(required_engagements),
                item_id);
  }
  ConsolidatedLabel label;
  label.item_id = std::move(item_id);
  int yes = 0, no = 0;
  for (const auto& c : choices) {
    ++label.vote_counts[c];
    switch (vote_of(c)) {
      case Vote::Yes: ++yes; break;
      case Vote::No: ++no; break;
      case Vote::Abstain: break;
    }
  }
  label.verdict = yes > no ? Verdict::Yes : no > yes ? Verdict::No : Verdict::Undecided;
  label.complete = static_cast<long>(choices.size()) == required_engagements;
  return label;
}

bool is_correct(std::string_view choice, Gold gold) {
  Vote v = vote_of(choice);
  return (gold == Gold::Yes && v == Vote::Yes) || (gold == Gold::No && v == Vote::No);
}

ParticipantScore score_participant(std::span<const ScoredRecord> records, std::string user_id) {
  if (records.empty()) throw Error(ErrorCode::EmptyInput, "no scored records", user_id);
  ParticipantScore s;
  s.user_id = std::move(user_id);
  std::vector<double> times;
  times.reserve(records.size());
  for (const auto& r : records) {
    ++s.n_labeled;
    if (is_correct(r.choice, r.gold)) ++s.n_correct;
    times.push_back(r.elapsed);
  }
  s.success_rate = static_cast<double>(s.n_correct) / s.n_labeled;
  s.mean_time = std::accumulate(times.begin(), times.end(), 0.0) / times.size();
  std::sort(times.begin(), times.end());
  std::size_t n = times.size();
  s.median_time = n % 2 ? times[n / 2] : 0.5 * (times[n / 2 - 1] + times[n / 2]);
  return s;
}

ProgressReport progress(const dissem::CampaignView& view, Timestamp now) {
  ProgressReport r;
  r.campaign_id = view.campaign.campaign_id;
  r.status = view.campaign.status;
  r.generated_at = now;
  r.version = view.version;
  r.items_total = static_cast<int>(view.items.size());
  r.responses_total = static_cast<int>(view.responses.size());
  for (auto v : {Verdict::Yes, Verdict::No, Verdict::Undecided}) r.verdict_histogram[v] = 0;
  for (const auto& tally : view.items) {
    r.in_flight += tally.in_flight;
    if (tally.completed >= tally.quota) {
      ++r.items_complete;
      ++r.verdict_histogram[consolidate(tally.choices, tally.quota).verdict];
    }
  }
  return r;
}

std::vector<json> export_records(const dissem::CampaignView& view, bool detail) {
  std::vector<json> out;
  out.reserve(view.items.size());
  std::map<std::string, std::vector<const dissem::StoredResponse*>> by_item;
  if (detail) {
    for (const auto& r : view.responses) by_item[r.item_id].push_back(&r);
  }
  for (const auto& tally : view.items) {
    auto label = consolidate(tally.choices, tally.quota, tally.item.item_id);
    json rec{{"item_id", label.item_id},
             {"verdict", to_string(label.verdict)},
             {"vote_counts", label.vote_counts},
             {"n_responses", static_cast<int>(tally.choices.size())},
             {"complete", label.complete}};
    if (tally.item.gold && label.verdict != Verdict::Undecided) {
      bool match = (label.verdict == Verdict::Yes) == (*tally.item.gold == Gold::Yes);
      rec["gold_match"] = match;
    }
    if (detail) {
      json responses = json::array();
      for (const auto* r : by_item[tally.item.item_id]) {
        responses.push_back({{"user_id", r->user_id},
                             {"choice", r->choice},
                             {"elapsed", r->elapsed},
                             {"submitted_at", r->submitted_at}});
      }
      rec["responses"] = std::move(responses);
    }
    out.push_back(std::move(rec));
  }
  return out;
}

std::string export_ndjson(const dissem::CampaignView& view, bool detail) {
  std::string out;
  for (const auto& rec : export_records(view, detail)) {
    out += rec.dump();
    out += '\n';
  }
  return out;
}

void to_json(json& j, const ParticipantScore& s) {
  j = json{{"user_id", s.user_id},         {"n_labeled", s.n_labeled},
           {"n_correct", s.n_correct},     {"success_rate", s.success_rate},
           {"mean_time", s.mean_time},     {"median_time", s.median_time}};
}

void from_json(const json& j, ParticipantScore& s) {
  s.user_id = j.at("user_id").get<std::string>();
  s.n_labeled = j.at("n_labeled").get<int>();
  s.n_correct = j.at("n_correct").get<int>();
  s.success_rate = j.at("success_rate").get<double>();
  s.mean_time = j.at("mean_time").get<double>();
  s.median_time = j.at("median_time").get<double>();
}

void to_json(json& j, const ProgressReport& r) {
  json hist = json::object();
  for (const auto& [v, n] : r.verdict_histogram) hist[std::string(to_string(v))] = n;
  j = json{{"campaign_id", r.campaign_id},
           {"status", to_string(r.status)},
           {"items_total", r.items_total},
           {"items_complete", r.items_complete},
           {"responses_total", r.responses_total},
           {"in_flight", r.in_flight},
           {"verdict_histogram", hist},
           {"generated_at", r.generated_at},
           {"version", r.version}};
}

}  // namespace taskad::metrics
