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

#include "taskad/model.hpp"

#include <cmath>
#include <set>
#include <unordered_set>

namespace taskad {

Vote vote_of(std::string_view choice) {
  if (choice == kYes) return Vote::Yes;
  if (choice == kNo) return Vote::No;
  return Vote::Abstain;
}

std::string_view to_string(Gold gold) { return gold == Gold::Yes ? "yes" : "no"; }

std::string_view to_string(Verdict verdict) {
  switch (verdict) {
    case Verdict::Yes: return "Yes";
    case Verdict::No: return "No";
    case Verdict::Undecided: return "Undecided";
  }
  return "Undecided";
}

std::string_view to_string(CampaignStatus status) {
  switch (status) {
    case CampaignStatus::Draft: return "Draft";
    case CampaignStatus::Published: return "Published";
    case CampaignStatus::Unpublished: return "Unpublished";
    case CampaignStatus::Complete: return "Complete";
  }
  return "Draft";
}

std::string_view to_string(AssignmentState state) {
  switch (state) {
    case AssignmentState::InFlight: return "InFlight";
    case AssignmentState::Completed: return "Completed";
    case AssignmentState::Expired: return "Expired";
  }
  return "InFlight";
}

CampaignStatus campaign_status_from(std::string_view text) {
  for (auto s : {CampaignStatus::Draft, CampaignStatus::Published,
                 CampaignStatus::Unpublished, CampaignStatus::Complete}) {
    if (to_string(s) == text) return s;
  }
  throw Error(ErrorCode::BadRequest, "unknown campaign status '" + std::string(text) + "'");
}

AssignmentState assignment_state_from(std::string_view text) {
  for (auto s : {AssignmentState::InFlight, AssignmentState::Completed,
                 AssignmentState::Expired}) {
    if (to_string(s) == text) return s;
  }
  throw Error(ErrorCode::BadRequest, "unknown assignment state '" + std::string(text) + "'");
}

void CampaignConfig::validate() const {
  if (required_engagements < 1) {
    throw Error(ErrorCode::InvalidConfig, "required_engagements must be >= 1");
  }
  if (batch_size < 1) {
    throw Error(ErrorCode::InvalidConfig, "batch_size must be >= 1");
  }
  if (!(time_budget > 0.0) || time_budget > kMaxTimeBudget) {
    throw Error(ErrorCode::InvalidConfig, "time_budget must lie in (0, 30] seconds");
  }
  if (reward_points < 0) {
    throw Error(ErrorCode::InvalidConfig, "reward_points must be non-negative");
  }
  std::set<std::string> distinct(options.begin(), options.end());
  if (distinct.size() < 2 || distinct.size() != options.size()) {
    throw Error(ErrorCode::InvalidConfig, "options need at least two distinct, non-repeated entries");
  }
  if (distinct.count("")) {
    throw Error(ErrorCode::InvalidConfig, "options may not be empty strings");
  }
  // Surfaces MissingPlaceholder / MultiplePlaceholders early.
  render_prompt(*this, LabelItem{"probe", "", "probe", std::nullopt});
}

bool CampaignConfig::has_option(std::string_view choice) const {
  for (const auto& o : options) {
    if (o == choice) return true;
  }
  return false;
}

namespace {

[[noreturn]] void malformed(std::size_t line, const std::string& what) {
  throw Error(ErrorCode::MalformedRecord, "line " + std::to_string(line) + ": " + what,
              std::to_string(line));
}

std::string required_string(const json& rec, const char* key, std::size_t line) {
  auto it = rec.find(key);
  if (it == rec.end() || !it->is_string()) {
    malformed(line, std::string("missing or non-string field '") + key + "'");
  }
  return it->get<std::string>();
}

}  // namespace

DatasetManifest validate_manifest(std::string_view raw) {
  DatasetManifest manifest;
  std::unordered_set<std::string> seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= raw.size()) {
    std::size_t end = raw.find('\n', pos);
    if (end == std::string_view::npos) end = raw.size();
    std::string_view line = raw.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) {
      if (end == raw.size()) break;
      continue;
    }

    json rec = json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (rec.is_discarded() || !rec.is_object()) malformed(line_no, "not a JSON object");

    LabelItem item;
    item.item_id = required_string(rec, "item_id", line_no);
    item.media_ref = required_string(rec, "media_ref", line_no);
    item.class_name = required_string(rec, "class_name", line_no);
    if (item.item_id.empty()) malformed(line_no, "empty item_id");
    if (item.class_name.empty()) malformed(line_no, "empty class_name");
    if (auto g = rec.find("gold"); g != rec.end() && !g->is_null()) {
      if (!g->is_string()) malformed(line_no, "gold must be \"yes\" or \"no\"");
      const auto& v = g->get_ref<const std::string&>();
      if (v == "yes") {
        item.gold = Gold::Yes;
      } else if (v == "no") {
        item.gold = Gold::No;
      } else {
        malformed(line_no, "gold must be \"yes\" or \"no\"");
      }
    }
    if (!seen.insert(item.item_id).second) {
      throw Error(ErrorCode::DuplicateItemId,
                  "line " + std::to_string(line_no) + ": duplicate item_id '" + item.item_id + "'",
                  item.item_id);
    }
    manifest.items.push_back(std::move(item));
    if (end == raw.size()) break;
  }
  if (manifest.items.empty()) {
    throw Error(ErrorCode::EmptyDataset, "manifest contains no items");
  }
  return manifest;
}

std::string serialize_manifest(const DatasetManifest& manifest) {
  std::string out;
  for (const auto& item : manifest.items) {
    out += json(item).dump();
    out += '\n';
  }
  return out;
}

std::string render_prompt(const CampaignConfig& config, const LabelItem& item) {
  const std::string& tpl = config.prompt_template;
  std::size_t first = tpl.find(kClassPlaceholder);
  if (first == std::string::npos) {
    throw Error(ErrorCode::MissingPlaceholder, "prompt template has no {class} placeholder");
  }
  if (tpl.find(kClassPlaceholder, first + kClassPlaceholder.size()) != std::string::npos) {
    throw Error(ErrorCode::MultiplePlaceholders, "prompt template has more than one {class} placeholder");
  }
  std::string out = tpl;
  out.replace(first, kClassPlaceholder.size(), item.class_name);
  return out;
}

bool transition_allowed(CampaignStatus from, CampaignStatus to) {
  using S = CampaignStatus;
  switch (from) {
    case S::Draft: return to == S::Published;
    case S::Published: return to == S::Unpublished || to == S::Complete;
    case S::Unpublished: return to == S::Published;
    case S::Complete: return false;
  }
  return false;
}

Campaign transition(const Campaign& campaign, CampaignStatus target) {
  if (!transition_allowed(campaign.status, target)) {
    throw Error(ErrorCode::IllegalTransition,
                std::string(to_string(campaign.status)) + " -> " + std::string(to_string(target)),
                campaign.campaign_id);
  }
  Campaign next = campaign;
  next.status = target;
  return next;
}

void to_json(json& j, const LabelItem& item) {
  j = json{{"item_id", item.item_id}, {"media_ref", item.media_ref}, {"class_name", item.class_name}};
  if (item.gold) j["gold"] = to_string(*item.gold);
}

void from_json(const json& j, LabelItem& item) {
  item.item_id = j.at("item_id").get<std::string>();
  item.media_ref = j.at("media_ref").get<std::string>();
  item.class_name = j.at("class_name").get<std::string>();
  item.gold.reset();
  if (auto g = j.find("gold"); g != j.end() && g->is_string()) {
    item.gold = g->get<std::string>() == "yes" ? Gold::Yes : Gold::No;
  }
}

void to_json(json& j, const DatasetManifest& m) {
  j = json{{"dataset_id", m.dataset_id}, {"name", m.name}, {"created_at", m.created_at}, {"items", m.items}};
}

void from_json(const json& j, DatasetManifest& m) {
  m.dataset_id = j.at("dataset_id").get<std::string>();
  m.name = j.value("name", std::string{});
  m.created_at = j.value("created_at", 0.0);
  m.items = j.at("items").get<std::vector<LabelItem>>();
}

void to_json(json& j, const CampaignConfig& c) {
  j = json{{"prompt_template", c.prompt_template},
           {"options", c.options},
           {"required_engagements", c.required_engagements},
           {"batch_size", c.batch_size},
           {"time_budget", c.time_budget},
           {"reward_points", c.reward_points}};
}

void from_json(const json& j, CampaignConfig& c) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, "config must be an object");
  try {
    CampaignConfig d;
    c.prompt_template = j.value("prompt_template", d.prompt_template);
    c.options = j.value("options", d.options);
    c.required_engagements = j.value("required_engagements", d.required_engagements);
    c.batch_size = j.value("batch_size", d.batch_size);
    c.time_budget = j.value("time_budget", d.time_budget);
    c.reward_points = j.value("reward_points", d.reward_points);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, e.what());
  }
}

void to_json(json& j, const Campaign& c) {
  j = json{{"campaign_id", c.campaign_id},
           {"dataset_id", c.dataset_id},
           {"config", c.config},
           {"status", to_string(c.status)}};
}

void from_json(const json& j, Campaign& c) {
  c.campaign_id = j.at("campaign_id").get<std::string>();
  c.dataset_id = j.at("dataset_id").get<std::string>();
  c.config = j.at("config").get<CampaignConfig>();
  c.status = campaign_status_from(j.at("status").get<std::string>());
}

void to_json(json& j, const Assignment& a) {
  j = json{{"assignment_id", a.assignment_id}, {"campaign_id", a.campaign_id},
           {"item_id", a.item_id},             {"user_id", a.user_id},
           {"batch_id", a.batch_id},           {"reserved_at", a.reserved_at},
           {"expires_at", a.expires_at},       {"state", to_string(a.state)}};
}

void from_json(const json& j, Assignment& a) {
  a.assignment_id = j.at("assignment_id").get<std::string>();
  a.campaign_id = j.at("campaign_id").get<std::string>();
  a.item_id = j.at("item_id").get<std::string>();
  a.user_id = j.at("user_id").get<std::string>();
  a.batch_id = j.value("batch_id", std::string{});
  a.reserved_at = j.at("reserved_at").get<double>();
  a.expires_at = j.at("expires_at").get<double>();
  a.state = assignment_state_from(j.at("state").get<std::string>());
}

void to_json(json& j, const ConsolidatedLabel& l) {
  j = json{{"item_id", l.item_id},
           {"verdict", to_string(l.verdict)},
           {"vote_counts", l.vote_counts},
           {"complete", l.complete}};
}

}  // namespace taskad
