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

#include "taskad/engine.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>
#include <unordered_set>

namespace taskad::dissem {

namespace {

void bump(std::uint64_t& counter, const std::string& id) {
  auto dash = id.rfind('-');
  if (dash == std::string::npos) return;
  try {
    counter = std::max<std::uint64_t>(counter, std::stoull(id.substr(dash + 1)));
  } catch (const std::exception&) {
  }
}

}  // namespace

void ReservationPolicy::validate() const {
  if (!(ttl > 0.0) || !std::isfinite(ttl)) {
    throw Error(ErrorCode::InvalidConfig, "reservation ttl must be positive");
  }
}

bool CampaignFilter::matches(const std::string& id) const {
  return campaign_ids.empty() ||
         std::find(campaign_ids.begin(), campaign_ids.end(), id) != campaign_ids.end();
}

Engine::Engine(std::uint64_t selection_seed) : rng_(selection_seed) {}

void Engine::set_journal(Journal journal) {
  std::lock_guard lock(mu_);
  journal_ = std::move(journal);
}

void Engine::commit(json event) {
  event["v"] = version_ + 1;
  if (journal_) journal_(event);
  apply(event);
  version_ = event["v"].get<std::uint64_t>();
}

void Engine::replay(const json& event) {
  std::lock_guard lock(mu_);
  auto v = event.at("v").get<std::uint64_t>();
  if (v <= version_) return;
  apply(event);
  version_ = v;
}

Engine::CampaignState& Engine::campaign_state(const std::string& campaign_id) {
  auto it = campaigns_.find(campaign_id);
  if (it == campaigns_.end()) {
    throw Error(ErrorCode::UnknownCampaign, "no campaign '" + campaign_id + "'", campaign_id);
  }
  return it->second;
}

const Engine::CampaignState& Engine::campaign_state(const std::string& campaign_id) const {
  return const_cast<Engine*>(this)->campaign_state(campaign_id);
}

// --- event application ----------------------------------------------------

void Engine::apply(const json& ev) {
  const auto& type = ev.at("type").get_ref<const std::string&>();
  if (type == "batch_reserved") {
    apply_batch_reserved(ev);
  } else if (type == "response_recorded") {
    apply_response_recorded(ev);
  } else if (type == "assignments_expired") {
    apply_expired(ev);
  } else if (type == "dataset_added") {
    auto manifest = std::make_shared<DatasetManifest>(ev.at("dataset").get<DatasetManifest>());
    auto state = std::make_unique<DatasetState>();
    for (std::size_t i = 0; i < manifest->items.size(); ++i) {
      state->index.emplace(manifest->items[i].item_id, i);
    }
    bump(dataset_seq_, manifest->dataset_id);
    state->manifest = std::move(manifest);
    datasets_[state->manifest->dataset_id] = std::move(state);
  } else if (type == "campaign_created") {
    auto c = ev.at("campaign").get<Campaign>();
    CampaignState state;
    state.dataset = datasets_.at(c.dataset_id).get();
    state.items.resize(state.dataset->manifest->items.size());
    state.seq = ++campaign_seq_;
    bump(campaign_seq_, c.campaign_id);
    state.campaign = std::move(c);
    campaigns_[state.campaign.campaign_id] = std::move(state);
  } else if (type == "campaign_status") {
    apply_status(campaign_state(ev.at("campaign_id").get<std::string>()),
                 campaign_status_from(ev.at("status").get<std::string>()));
  } else if (type == "item_reopened") {
    auto& state = campaign_state(ev.at("campaign_id").get<std::string>());
    std::size_t i = state.dataset->index.at(ev.at("item_id").get<std::string>());
    bool was = state.items[i].completed >= state.quota(i);
    state.items[i].extra_quota += ev.at("extra").get<int>();
    bool now_complete = state.items[i].completed >= state.quota(i);
    if (was && !now_complete) --state.items_complete;
  } else if (type == "worker_seen") {
    workers_.try_emplace(ev.at("user_id").get<std::string>(), ev.at("ts").get<double>());
  } else {
    throw Error(ErrorCode::StorageFailure, "unknown event type '" + type + "'");
  }
}

void Engine::apply_status(CampaignState& state, CampaignStatus status) {
  state.campaign.status = status;
  if (status == CampaignStatus::Published && state.items_complete == state.items.size()) {
    state.campaign.status = CampaignStatus::Complete;
  }
}

void Engine::apply_batch_reserved(const json& ev) {
  const auto batch_id = ev.at("batch_id").get<std::string>();
  const auto campaign_id = ev.at("campaign_id").get<std::string>();
  const auto user_id = ev.at("user_id").get<std::string>();
  const Timestamp ts = ev.at("ts").get<double>();
  const Timestamp expires_at = ev.at("expires_at").get<double>();
  auto& state = campaign_state(campaign_id);
  workers_.try_emplace(user_id, ts);
  auto& marks = state.marks[user_id];
  marks.resize(state.items.size(), kNone);

  BatchRecord batch{campaign_id, user_id, {}};
  for (const auto& a : ev.at("assignments")) {
    AssignmentRecord rec;
    rec.assignment.assignment_id = a.at("assignment_id").get<std::string>();
    rec.assignment.campaign_id = campaign_id;
    rec.assignment.item_id = a.at("item_id").get<std::string>();
    rec.assignment.user_id = user_id;
    rec.assignment.batch_id = batch_id;
    rec.assignment.reserved_at = ts;
    rec.assignment.expires_at = expires_at;
    rec.item = state.dataset->index.at(rec.assignment.item_id);
    state.items[rec.item].in_flight += 1;
    marks[rec.item] = kInFlight;
    in_flight_by_expiry_.emplace(expires_at, rec.assignment.assignment_id);
    bump(assignment_seq_, rec.assignment.assignment_id);
    batch.assignment_ids.push_back(rec.assignment.assignment_id);
    assignments_.emplace(rec.assignment.assignment_id, std::move(rec));
  }
  bump(batch_seq_, batch_id);
  batches_.emplace(batch_id, std::move(batch));
}

void Engine::apply_response_recorded(const json& ev) {
  auto& rec = assignments_.at(ev.at("assignment_id").get<std::string>());
  auto& a = rec.assignment;
  auto& state = campaign_state(a.campaign_id);
  auto& item = state.items[rec.item];
  in_flight_by_expiry_.erase({a.expires_at, a.assignment_id});
  a.state = AssignmentState::Completed;
  item.in_flight -= 1;
  item.completed += 1;
  state.marks[a.user_id][rec.item] = kCompleted;
  if (item.completed == state.quota(rec.item)) ++state.items_complete;

  StoredResponse r;
  r.assignment_id = a.assignment_id;
  r.campaign_id = a.campaign_id;
  r.item_id = a.item_id;
  r.user_id = a.user_id;
  r.choice = ev.at("choice").get<std::string>();
  r.elapsed = ev.at("elapsed").get<double>();
  r.submitted_at = ev.at("ts").get<double>();
  state.responses.push_back(responses_.size());
  responses_.push_back(std::move(r));

  if (state.campaign.status == CampaignStatus::Published &&
      state.items_complete == state.items.size()) {
    state.campaign.status = CampaignStatus::Complete;
  }
}

void Engine::expire_one(AssignmentRecord& rec) {
  auto& a = rec.assignment;
  if (a.state != AssignmentState::InFlight) return;
  auto& state = campaign_state(a.campaign_id);
  in_flight_by_expiry_.erase({a.expires_at, a.assignment_id});
  a.state = AssignmentState::Expired;
  state.items[rec.item].in_flight -= 1;
  state.marks[a.user_id][rec.item] = kNone;
}

void Engine::apply_expired(const json& ev) {
  for (const auto& id : ev.at("ids")) {
    expire_one(assignments_.at(id.get<std::string>()));
  }
}

// --- practitioner side -----------------------------------------------------

std::string Engine::add_dataset(DatasetManifest manifest, Timestamp now) {
  std::lock_guard lock(mu_);
  if (manifest.items.empty()) throw Error(ErrorCode::EmptyDataset, "manifest contains no items");
  std::unordered_set<std::string> ids;
  for (const auto& item : manifest.items) {
    if (!ids.insert(item.item_id).second) {
      throw Error(ErrorCode::DuplicateItemId, "duplicate item_id '" + item.item_id + "'",
                  item.item_id);
    }
  }
  manifest.dataset_id = "ds-" + std::to_string(dataset_seq_ + 1);
  manifest.created_at = now;
  std::string id = manifest.dataset_id;
  commit(json{{"type", "dataset_added"}, {"ts", now}, {"dataset", manifest}});
  return id;
}

std::string Engine::create_campaign(const std::string& dataset_id, const CampaignConfig& config,
                                    Timestamp now) {
  std::lock_guard lock(mu_);
  if (!datasets_.count(dataset_id)) {
    throw Error(ErrorCode::UnknownDataset, "no dataset '" + dataset_id + "'", dataset_id);
  }
  config.validate();
  Campaign c;
  c.campaign_id = "cmp-" + std::to_string(campaign_seq_ + 1);
  c.dataset_id = dataset_id;
  c.config = config;
  c.status = CampaignStatus::Draft;
  commit(json{{"type", "campaign_created"}, {"ts", now}, {"campaign", c}});
  return c.campaign_id;
}

Campaign Engine::set_status(const std::string& campaign_id, CampaignStatus target, Timestamp now) {
  std::lock_guard lock(mu_);
  auto& state = campaign_state(campaign_id);
  transition(state.campaign, target);  // validates the edge
  commit(json{{"type", "campaign_status"},
              {"ts", now},
              {"campaign_id", campaign_id},
              {"status", to_string(target)}});
  return state.campaign;
}

void Engine::reopen_item(const std::string& campaign_id, const std::string& item_id, int extra,
                         Timestamp now) {
  std::lock_guard lock(mu_);
  auto& state = campaign_state(campaign_id);
  if (state.campaign.status == CampaignStatus::Complete) {
    throw Error(ErrorCode::IllegalTransition, "campaign is Complete", campaign_id);
  }
  if (!state.dataset->index.count(item_id)) {
    throw Error(ErrorCode::UnknownItem, "no item '" + item_id + "'", item_id);
  }
  if (extra < 1) throw Error(ErrorCode::BadRequest, "extra must be >= 1");
  commit(json{{"type", "item_reopened"},
              {"ts", now},
              {"campaign_id", campaign_id},
              {"item_id", item_id},
              {"extra", extra}});
}

// --- serving side ----------------------------------------------------------

std::vector<std::size_t> Engine::eligible_locked(const CampaignState& state,
                                                 const std::string& user_id,
                                                 bool overcommit) const {
  std::vector<std::size_t> out;
  const std::vector<std::uint8_t>* marks = nullptr;
  if (auto it = state.marks.find(user_id); it != state.marks.end()) marks = &it->second;
  for (std::size_t i = 0; i < state.items.size(); ++i) {
    if (marks && (*marks)[i] != kNone) continue;
    const auto& item = state.items[i];
    int used = item.completed + (overcommit ? 0 : item.in_flight);
    if (used < state.quota(i)) out.push_back(i);
  }
  return out;
}

long Engine::remaining_work(const CampaignState& state, bool overcommit) const {
  long work = 0;
  for (std::size_t i = 0; i < state.items.size(); ++i) {
    const auto& item = state.items[i];
    int used = item.completed + (overcommit ? 0 : item.in_flight);
    work += std::max(0, state.quota(i) - used);
  }
  return work;
}

std::set<std::string> Engine::eligible_items(const std::string& campaign_id,
                                             const std::string& user_id, Timestamp now,
                                             const ReservationPolicy& policy) const {
  std::lock_guard lock(mu_);
  const auto& state = campaign_state(campaign_id);
  if (state.campaign.status != CampaignStatus::Published) {
    throw Error(ErrorCode::CampaignNotPublished, "campaign is " +
                std::string(to_string(state.campaign.status)), campaign_id);
  }
  // Reservations past their expiry count as expired even before a sweep.
  CampaignState adjusted;
  adjusted.campaign = state.campaign;
  adjusted.items = state.items;
  if (auto it = state.marks.find(user_id); it != state.marks.end()) {
    adjusted.marks[user_id] = it->second;
  }
  for (auto it = in_flight_by_expiry_.begin();
       it != in_flight_by_expiry_.end() && it->first < now; ++it) {
    const auto& rec = assignments_.at(it->second);
    if (rec.assignment.campaign_id != campaign_id) continue;
    adjusted.items[rec.item].in_flight -= 1;
    if (rec.assignment.user_id == user_id) adjusted.marks[user_id][rec.item] = kNone;
  }
  std::set<std::string> out;
  for (std::size_t i : eligible_locked(adjusted, user_id, policy.overcommit)) {
    out.insert(state.dataset->manifest->items[i].item_id);
  }
  return out;
}

TaskBatch Engine::select_batch(const CampaignFilter& filter, const std::string& user_id,
                               Timestamp now, const ReservationPolicy& policy,
                               std::optional<std::uint64_t> seed) {
  policy.validate();
  std::lock_guard lock(mu_);
  expire_stale_locked(now);

  TaskBatch batch;
  batch.user_id = user_id;
  batch.issued_at = now;

  CampaignState* chosen = nullptr;
  std::vector<std::size_t> eligible;
  long best_work = -1;
  for (auto& [id, state] : campaigns_) {
    if (state.campaign.status != CampaignStatus::Published || !filter.matches(id)) continue;
    auto elig = eligible_locked(state, user_id, policy.overcommit);
    if (elig.empty()) continue;
    long work = remaining_work(state, policy.overcommit);
    if (work > best_work || (work == best_work && state.seq < chosen->seq)) {
      chosen = &state;
      eligible = std::move(elig);
      best_work = work;
    }
  }

  const bool new_user = !workers_.count(user_id);
  if (!chosen) {
    if (new_user) commit(json{{"type", "worker_seen"}, {"ts", now}, {"user_id", user_id}});
    return batch;
  }

  std::mt19937_64 seeded(seed.value_or(0));
  std::mt19937_64& gen = seed ? seeded : rng_;
  std::shuffle(eligible.begin(), eligible.end(), gen);
  std::stable_sort(eligible.begin(), eligible.end(), [&](std::size_t a, std::size_t b) {
    return chosen->items[a].completed < chosen->items[b].completed;
  });
  const auto& cfg = chosen->campaign.config;
  eligible.resize(std::min<std::size_t>(eligible.size(), cfg.batch_size));

  batch.batch_id = "b-" + std::to_string(batch_seq_ + 1);
  batch.campaign_id = chosen->campaign.campaign_id;
  batch.expires_at = now + policy.ttl;
  batch.time_budget = cfg.time_budget;

  json assignments = json::array();
  std::uint64_t next = assignment_seq_;
  const auto& items = chosen->dataset->manifest->items;
  for (std::size_t i : eligible) {
    BatchTask task;
    task.assignment_id = "a-" + std::to_string(++next);
    task.item_id = items[i].item_id;
    task.prompt = render_prompt(cfg, items[i]);
    task.media_ref = items[i].media_ref;
    task.options = cfg.options;
    assignments.push_back({{"assignment_id", task.assignment_id}, {"item_id", task.item_id}});
    batch.tasks.push_back(std::move(task));
  }
  commit(json{{"type", "batch_reserved"},
              {"ts", now},
              {"batch_id", batch.batch_id},
              {"campaign_id", batch.campaign_id},
              {"user_id", user_id},
              {"expires_at", batch.expires_at},
              {"assignments", std::move(assignments)}});
  return batch;
}

CompletionDelta Engine::record_completion(const std::string& assignment_id,
                                          const Response& response, Timestamp now) {
  std::lock_guard lock(mu_);
  auto it = assignments_.find(assignment_id);
  if (it == assignments_.end()) {
    throw Error(ErrorCode::UnknownAssignment, "no assignment '" + assignment_id + "'",
                assignment_id);
  }
  auto& rec = it->second;
  const auto& a = rec.assignment;
  if (a.state == AssignmentState::Completed) {
    throw Error(ErrorCode::AlreadyCompleted, assignment_id, assignment_id);
  }
  if (a.state == AssignmentState::Expired) {
    throw Error(ErrorCode::ReservationExpired, assignment_id, assignment_id);
  }
  if (now > a.expires_at) {
    commit(json{{"type", "assignments_expired"}, {"ts", now}, {"ids", {assignment_id}}});
    throw Error(ErrorCode::ReservationExpired, assignment_id, assignment_id);
  }
  auto& state = campaign_state(a.campaign_id);
  if (!response.assignment_id.empty() && response.assignment_id != assignment_id) {
    throw Error(ErrorCode::InvalidResponse, "assignment id mismatch", assignment_id);
  }
  if (!state.campaign.config.has_option(response.choice)) {
    throw Error(ErrorCode::InvalidResponse, "choice '" + response.choice + "' is not an option",
                assignment_id);
  }
  if (!(response.elapsed > 0.0) || !std::isfinite(response.elapsed)) {
    throw Error(ErrorCode::InvalidResponse, "elapsed must be positive", assignment_id);
  }
  if (state.items[rec.item].completed >= state.quota(rec.item)) {
    // Only reachable with overcommit: the item filled while this was in flight.
    commit(json{{"type", "assignments_expired"}, {"ts", now}, {"ids", {assignment_id}}});
    throw Error(ErrorCode::QuotaFilled, assignment_id, assignment_id);
  }
  commit(json{{"type", "response_recorded"},
              {"ts", now},
              {"assignment_id", assignment_id},
              {"choice", response.choice},
              {"elapsed", response.elapsed}});

  CompletionDelta delta;
  delta.campaign_id = a.campaign_id;
  delta.item_id = a.item_id;
  delta.user_id = a.user_id;
  delta.engagements = state.items[rec.item].completed;
  delta.quota = state.quota(rec.item);
  delta.item_complete = delta.engagements >= delta.quota;
  delta.campaign_complete = state.campaign.status == CampaignStatus::Complete;
  return delta;
}

std::size_t Engine::expire_stale_locked(Timestamp now) {
  json ids = json::array();
  for (auto it = in_flight_by_expiry_.begin();
       it != in_flight_by_expiry_.end() && it->first < now; ++it) {
    ids.push_back(it->second);
  }
  if (ids.empty()) return 0;
  std::size_t n = ids.size();
  commit(json{{"type", "assignments_expired"}, {"ts", now}, {"ids", std::move(ids)}});
  return n;
}

std::size_t Engine::expire_stale(Timestamp now) {
  std::lock_guard lock(mu_);
  return expire_stale_locked(now);
}

// --- reads -------------------------------------------------------------------

Campaign Engine::campaign(const std::string& campaign_id) const {
  std::lock_guard lock(mu_);
  return campaign_state(campaign_id).campaign;
}

std::vector<Campaign> Engine::campaigns() const {
  std::lock_guard lock(mu_);
  std::vector<std::pair<std::uint64_t, Campaign>> ordered;
  for (const auto& [id, state] : campaigns_) ordered.emplace_back(state.seq, state.campaign);
  std::sort(ordered.begin(), ordered.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<Campaign> out;
  for (auto& [seq, c] : ordered) out.push_back(std::move(c));
  return out;
}

DatasetManifest Engine::dataset(const std::string& dataset_id) const {
  std::lock_guard lock(mu_);
  auto it = datasets_.find(dataset_id);
  if (it == datasets_.end()) {
    throw Error(ErrorCode::UnknownDataset, "no dataset '" + dataset_id + "'", dataset_id);
  }
  return *it->second->manifest;
}

std::optional<Assignment> Engine::assignment(const std::string& assignment_id) const {
  std::lock_guard lock(mu_);
  auto it = assignments_.find(assignment_id);
  if (it == assignments_.end()) return std::nullopt;
  return it->second.assignment;
}

std::vector<std::string> Engine::batch_assignments(const std::string& batch_id) const {
  std::lock_guard lock(mu_);
  auto it = batches_.find(batch_id);
  if (it == batches_.end()) {
    throw Error(ErrorCode::UnknownBatch, "no batch '" + batch_id + "'", batch_id);
  }
  return it->second.assignment_ids;
}

std::optional<WorkerIdentity> Engine::worker(const std::string& user_id) const {
  std::lock_guard lock(mu_);
  auto it = workers_.find(user_id);
  if (it == workers_.end()) return std::nullopt;
  return WorkerIdentity{it->first, it->second};
}

CampaignView Engine::view(const std::string& campaign_id) const {
  std::lock_guard lock(mu_);
  const auto& state = campaign_state(campaign_id);
  CampaignView v;
  v.campaign = state.campaign;
  v.dataset_name = state.dataset->manifest->name;
  v.version = version_;
  const auto& items = state.dataset->manifest->items;
  v.items.resize(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    v.items[i].item = items[i];
    v.items[i].completed = state.items[i].completed;
    v.items[i].in_flight = state.items[i].in_flight;
    v.items[i].quota = state.quota(i);
  }
  for (std::size_t r : state.responses) {
    const auto& resp = responses_[r];
    v.items[state.dataset->index.at(resp.item_id)].choices.push_back(resp.choice);
    v.responses.push_back(resp);
  }
  return v;
}

std::vector<StoredResponse> Engine::responses() const {
  std::lock_guard lock(mu_);
  return responses_;
}

std::size_t Engine::response_count() const {
  std::lock_guard lock(mu_);
  return responses_.size();
}

std::uint64_t Engine::version() const {
  std::lock_guard lock(mu_);
  return version_;
}

std::vector<std::string> Engine::audit(bool overcommit) const {
  std::lock_guard lock(mu_);
  std::vector<std::string> problems;
  using Key = std::tuple<std::string, std::string, std::string>;
  std::map<Key, int> completed_per_user_item, live_per_user_item;
  std::map<std::pair<std::string, std::string>, std::pair<int, int>> per_item;  // completed, in flight
  std::size_t n_completed = 0;

  for (const auto& [id, rec] : assignments_) {
    const auto& a = rec.assignment;
    auto cit = campaigns_.find(a.campaign_id);
    if (cit == campaigns_.end()) {
      problems.push_back("assignment " + id + " references unknown campaign");
      continue;
    }
    if (!cit->second.dataset->index.count(a.item_id)) {
      problems.push_back("assignment " + id + " references unknown item");
    }
    if (!(a.expires_at > a.reserved_at)) problems.push_back("assignment " + id + " expires_at <= reserved_at");
    Key key{a.campaign_id, a.user_id, a.item_id};
    if (a.state == AssignmentState::Completed) {
      ++completed_per_user_item[key];
      ++per_item[{a.campaign_id, a.item_id}].first;
      ++n_completed;
    }
    if (a.state == AssignmentState::InFlight) ++per_item[{a.campaign_id, a.item_id}].second;
    if (a.state != AssignmentState::Expired) ++live_per_user_item[key];
  }
  for (const auto& [key, n] : completed_per_user_item) {
    if (n > 1) {
      problems.push_back("never-twice violated: user " + std::get<1>(key) + " item " +
                         std::get<2>(key) + " completed " + std::to_string(n) + " times");
    }
  }
  for (const auto& [key, n] : live_per_user_item) {
    if (n > 1) {
      problems.push_back("user " + std::get<1>(key) + " holds " + std::to_string(n) +
                         " live assignments for item " + std::get<2>(key));
    }
  }
  for (const auto& [cid, state] : campaigns_) {
    if (!datasets_.count(state.campaign.dataset_id)) {
      problems.push_back("campaign " + cid + " references unknown dataset");
    }
    const auto& items = state.dataset->manifest->items;
    for (std::size_t i = 0; i < items.size(); ++i) {
      auto [completed, in_flight] = per_item[{cid, items[i].item_id}];
      if (completed != state.items[i].completed || in_flight != state.items[i].in_flight) {
        problems.push_back("counter drift on " + cid + "/" + items[i].item_id);
      }
      if (completed > state.quota(i)) {
        problems.push_back("quota exceeded on " + cid + "/" + items[i].item_id);
      }
      if (!overcommit && completed + in_flight > state.quota(i)) {
        problems.push_back("reservations exceed quota on " + cid + "/" + items[i].item_id);
      }
    }
  }
  if (responses_.size() != n_completed) {
    problems.push_back("conservation: " + std::to_string(responses_.size()) + " responses vs " +
                       std::to_string(n_completed) + " completed assignments");
  }
  for (const auto& r : responses_) {
    auto it = assignments_.find(r.assignment_id);
    if (it == assignments_.end() || it->second.assignment.state != AssignmentState::Completed) {
      problems.push_back("response for " + r.assignment_id + " has no completed assignment");
    }
  }
  return problems;
}

// --- persistence -------------------------------------------------------------

json Engine::snapshot() const {
  std::lock_guard lock(mu_);
  return snapshot_locked();
}

void Engine::checkpoint(const std::function<void(const json&)>& sink) const {
  std::lock_guard lock(mu_);
  sink(snapshot_locked());
}

json Engine::snapshot_locked() const {
  json j;
  j["version"] = version_;
  j["seq"] = {{"dataset", dataset_seq_},
              {"campaign", campaign_seq_},
              {"assignment", assignment_seq_},
              {"batch", batch_seq_}};
  std::vector<std::string> ds_ids;
  for (const auto& [id, _] : datasets_) ds_ids.push_back(id);
  std::sort(ds_ids.begin(), ds_ids.end());
  j["datasets"] = json::array();
  for (const auto& id : ds_ids) j["datasets"].push_back(*datasets_.at(id)->manifest);

  std::vector<const CampaignState*> cs;
  for (const auto& [id, state] : campaigns_) cs.push_back(&state);
  std::sort(cs.begin(), cs.end(), [](auto* a, auto* b) { return a->seq < b->seq; });
  j["campaigns"] = json::array();
  for (const auto* state : cs) {
    json extra = json::object();
    const auto& items = state->dataset->manifest->items;
    for (std::size_t i = 0; i < items.size(); ++i) {
      if (state->items[i].extra_quota) extra[items[i].item_id] = state->items[i].extra_quota;
    }
    j["campaigns"].push_back({{"campaign", state->campaign}, {"extra_quota", extra}});
  }

  std::vector<const Assignment*> as;
  for (const auto& [id, rec] : assignments_) as.push_back(&rec.assignment);
  std::sort(as.begin(), as.end(), [](auto* a, auto* b) {
    return std::make_pair(a->assignment_id.size(), a->assignment_id) <
           std::make_pair(b->assignment_id.size(), b->assignment_id);
  });
  j["assignments"] = json::array();
  for (const auto* a : as) j["assignments"].push_back(*a);

  j["batches"] = json::object();
  for (const auto& [id, b] : batches_) {
    j["batches"][id] = {{"campaign_id", b.campaign_id},
                        {"user_id", b.user_id},
                        {"assignment_ids", b.assignment_ids}};
  }
  j["workers"] = json::object();
  for (const auto& [id, ts] : workers_) j["workers"][id] = ts;
  j["responses"] = json::array();
  for (const auto& r : responses_) {
    j["responses"].push_back({{"assignment_id", r.assignment_id},
                              {"choice", r.choice},
                              {"elapsed", r.elapsed},
                              {"submitted_at", r.submitted_at}});
  }
  return j;
}

void Engine::restore(const json& j) {
  std::lock_guard lock(mu_);
  datasets_.clear();
  campaigns_.clear();
  assignments_.clear();
  in_flight_by_expiry_.clear();
  batches_.clear();
  workers_.clear();
  responses_.clear();
  dataset_seq_ = campaign_seq_ = assignment_seq_ = batch_seq_ = 0;

  for (const auto& d : j.at("datasets")) {
    apply(json{{"type", "dataset_added"}, {"dataset", d}});
  }
  for (const auto& c : j.at("campaigns")) {
    apply(json{{"type", "campaign_created"}, {"campaign", c.at("campaign")}});
    auto& state = campaigns_.at(c.at("campaign").at("campaign_id").get<std::string>());
    for (const auto& [item_id, extra] : c.at("extra_quota").items()) {
      state.items[state.dataset->index.at(item_id)].extra_quota = extra.get<int>();
    }
  }
  for (const auto& aj : j.at("assignments")) {
    AssignmentRecord rec;
    rec.assignment = aj.get<Assignment>();
    const auto& a = rec.assignment;
    auto& state = campaigns_.at(a.campaign_id);
    rec.item = state.dataset->index.at(a.item_id);
    auto& marks = state.marks[a.user_id];
    marks.resize(state.items.size(), kNone);
    if (a.state == AssignmentState::InFlight) {
      state.items[rec.item].in_flight += 1;
      marks[rec.item] = kInFlight;
      in_flight_by_expiry_.emplace(a.expires_at, a.assignment_id);
    } else if (a.state == AssignmentState::Completed) {
      state.items[rec.item].completed += 1;
      marks[rec.item] = kCompleted;
    }
    assignments_.emplace(a.assignment_id, std::move(rec));
  }
  for (const auto& [id, b] : j.at("batches").items()) {
    batches_.emplace(id, BatchRecord{b.at("campaign_id").get<std::string>(),
                                     b.at("user_id").get<std::string>(),
                                     b.at("assignment_ids").get<std::vector<std::string>>()});
  }
  for (const auto& [id, ts] : j.at("workers").items()) workers_.emplace(id, ts.get<double>());
  for (const auto& rj : j.at("responses")) {
    const auto& rec = assignments_.at(rj.at("assignment_id").get<std::string>());
    StoredResponse r;
    r.assignment_id = rec.assignment.assignment_id;
    r.campaign_id = rec.assignment.campaign_id;
    r.item_id = rec.assignment.item_id;
    r.user_id = rec.assignment.user_id;
    r.choice = rj.at("choice").get<std::string>();
    r.elapsed = rj.at("elapsed").get<double>();
    r.submitted_at = rj.at("submitted_at").get<double>();
    campaigns_.at(r.campaign_id).responses.push_back(responses_.size());
    responses_.push_back(std::move(r));
  }
  for (auto& [id, state] : campaigns_) {
    state.items_complete = 0;
    for (std::size_t i = 0; i < state.items.size(); ++i) {
      if (state.items[i].completed >= state.quota(i)) ++state.items_complete;
    }
  }
  const auto& seq = j.at("seq");
  dataset_seq_ = seq.at("dataset").get<std::uint64_t>();
  campaign_seq_ = seq.at("campaign").get<std::uint64_t>();
  assignment_seq_ = seq.at("assignment").get<std::uint64_t>();
  batch_seq_ = seq.at("batch").get<std::uint64_t>();
  version_ = j.at("version").get<std::uint64_t>();
}

}  // namespace taskad::dissem
