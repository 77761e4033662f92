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
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "taskad/model.hpp"

namespace taskad::dissem {

struct ReservationPolicy {
  double ttl = 120.0;       // seconds a reservation stays InFlight
  bool overcommit = false;  // when false, InFlight reservations count toward K

  void validate() const;
};

struct BatchTask {
  std::string assignment_id;
  std::string item_id;
  std::string prompt;
  std::string media_ref;
  std::vector<std::string> options;
};

/// A reserved set of tasks for one user from exactly one campaign. Carries no
/// gold labels.
struct TaskBatch {
  std::string batch_id;
  std::string campaign_id;
  std::string user_id;
  std::vector<BatchTask> tasks;
  Timestamp issued_at = 0.0;
  Timestamp expires_at = 0.0;
  double time_budget = 0.0;

  bool no_tasks() const { return tasks.empty(); }
};

/// Empty list means every published campaign.
struct CampaignFilter {
  std::vector<std::string> campaign_ids;

  static CampaignFilter all() { return {}; }
  static CampaignFilter only(std::string id) { return {{std::move(id)}}; }
  bool matches(const std::string& id) const;
};

struct CompletionDelta {
  std::string campaign_id;
  std::string item_id;
  std::string user_id;
  int engagements = 0;  // completed responses for the item after this one
  int quota = 0;
  bool item_complete = false;
  bool campaign_complete = false;
};

struct StoredResponse {
  std::string assignment_id;
  std::string campaign_id;
  std::string item_id;
  std::string user_id;
  std::string choice;
  double elapsed = 0.0;
  Timestamp submitted_at = 0.0;
};

struct ItemTally {
  LabelItem item;
  int completed = 0;
  int in_flight = 0;
  int quota = 0;
  std::vector<std::string> choices;  // completed responses, arrival order
};

/// Consistent copy of one campaign taken under a single lock.
struct CampaignView {
  Campaign campaign;
  std::string dataset_name;
  std::vector<ItemTally> items;
  std::vector<StoredResponse> responses;
  std::uint64_t version = 0;
};

/// Authoritative in-memory state of datasets, campaigns, reservations and
/// responses.
///
/// Every mutation is expressed as exactly one JSON event. The event is handed
/// to the journal first; if the journal throws, nothing changes. Replaying the
/// journaled events into a fresh engine reproduces the state exactly. All
/// public members are safe to call concurrently.
class Engine {
 public:
  using Journal = std::function<void(const json& event)>;

  explicit Engine(std::uint64_t selection_seed = 0x7a5cad);
  Engine(const Engine&) = delete;
  Engine& operator=(const Engine&) = delete;

  void set_journal(Journal journal);

  // Practitioner side.
  std::string add_dataset(DatasetManifest manifest, Timestamp now);
  std::string create_campaign(const std::string& dataset_id, const CampaignConfig& config,
                              Timestamp now);
  Campaign set_status(const std::string& campaign_id, CampaignStatus target, Timestamp now);
  /// Raises the item's quota by `extra` so it re-enters eligibility.
  void reopen_item(const std::string& campaign_id, const std::string& item_id, int extra,
                   Timestamp now);

  // Serving side.
  std::set<std::string> eligible_items(const std::string& campaign_id, const std::string& user_id,
                                       Timestamp now,
                                       const ReservationPolicy& policy = {}) const;
  TaskBatch select_batch(const CampaignFilter& filter, const std::string& user_id, Timestamp now,
                         const ReservationPolicy& policy = {},
                         std::optional<std::uint64_t> seed = std::nullopt);
  CompletionDelta record_completion(const std::string& assignment_id, const Response& response,
                                    Timestamp now);
  std::size_t expire_stale(Timestamp now);

  // Reads.
  Campaign campaign(const std::string& campaign_id) const;
  std::vector<Campaign> campaigns() const;
  DatasetManifest dataset(const std::string& dataset_id) const;
  std::optional<Assignment> assignment(const std::string& assignment_id) const;
  /// Assignment ids of a batch, in serve order. Throws UnknownBatch.
  std::vector<std::string> batch_assignments(const std::string& batch_id) const;
  std::optional<WorkerIdentity> worker(const std::string& user_id) const;
  CampaignView view(const std::string& campaign_id) const;
  std::vector<StoredResponse> responses() const;
  std::size_t response_count() const;
  std::uint64_t version() const;

  /// Checks never-twice, quota, conservation and referential integrity from
  /// the raw records. Empty result means all hold.
  std::vector<std::string> audit(bool overcommit = false) const;

  // Persistence.
  json snapshot() const;
  /// Hands a snapshot to `sink` while holding the state lock, so no event can
  /// be journaled between the two.
  void checkpoint(const std::function<void(const json&)>& sink) const;
  void restore(const json& snapshot);
  /// Applies a journaled event. Events at or below the current version are
  /// ignored so a log overlapping a snapshot replays cleanly.
  void replay(const json& event);

 private:
  struct DatasetState {
    std::shared_ptr<const DatasetManifest> manifest;
    std::unordered_map<std::string, std::size_t> index;
  };
  struct ItemState {
    int completed = 0;
    int in_flight = 0;
    int extra_quota = 0;
  };
  // Per-user mark for each item of a campaign.
  enum Mark : std::uint8_t { kNone = 0, kInFlight = 1, kCompleted = 2 };
  struct CampaignState {
    Campaign campaign;
    std::uint64_t seq = 0;
    const DatasetState* dataset = nullptr;
    std::vector<ItemState> items;
    std::unordered_map<std::string, std::vector<std::uint8_t>> marks;
    std::vector<std::size_t> responses;
    std::size_t items_complete = 0;

    int quota(std::size_t i) const {
      return campaign.config.required_engagements + items[i].extra_quota;
    }
  };
  struct AssignmentRecord {
    Assignment assignment;
    std::size_t item = 0;
  };
  struct BatchRecord {
    std::string campaign_id;
    std::string user_id;
    std::vector<std::string> assignment_ids;
  };

  void commit(json event);
  void apply(const json& event);
  void apply_batch_reserved(const json& event);
  void apply_response_recorded(const json& event);
  void apply_expired(const json& event);
  void apply_status(CampaignState& state, CampaignStatus status);
  void expire_one(AssignmentRecord& record);

  std::size_t expire_stale_locked(Timestamp now);
  json snapshot_locked() const;
  CampaignState& campaign_state(const std::string& campaign_id);
  const CampaignState& campaign_state(const std::string& campaign_id) const;
  std::vector<std::size_t> eligible_locked(const CampaignState& state, const std::string& user_id,
                                           bool overcommit) const;
  long remaining_work(const CampaignState& state, bool overcommit) const;

  mutable std::mutex mu_;
  Journal journal_;
  std::mt19937_64 rng_;
  std::uint64_t version_ = 0;
  std::uint64_t dataset_seq_ = 0;
  std::uint64_t campaign_seq_ = 0;
  std::uint64_t assignment_seq_ = 0;
  std::uint64_t batch_seq_ = 0;

  std::unordered_map<std::string, std::unique_ptr<DatasetState>> datasets_;
  std::unordered_map<std::string, CampaignState> campaigns_;
  std::unordered_map<std::string, AssignmentRecord> assignments_;
  std::set<std::pair<Timestamp, std::string>> in_flight_by_expiry_;
  std::unordered_map<std::string, BatchRecord> batches_;
  std::unordered_map<std::string, Timestamp> workers_;
  std::vector<StoredResponse> responses_;
};

}  // namespace taskad::dissem
