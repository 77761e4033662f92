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

#include <atomic>
#include <filesystem>
#include <functional>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "taskad/clock.hpp"
#include "taskad/model.hpp"

namespace taskad::service {
class Platform;
}

namespace taskad::sdk {

struct TransportReply {
  int status = 0;
  std::string body;
};

class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Carries one JSON API call. Implementations throw TransportError when the
/// service cannot be reached.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual TransportReply request(const std::string& method, const std::string& path,
                                 const std::string& body) = 0;
};

class InProcessTransport final : public Transport {
 public:
  InProcessTransport(service::Platform& platform, std::string token);
  TransportReply request(const std::string& method, const std::string& path,
                         const std::string& body) override;

 private:
  service::Platform& platform_;
  std::string token_;
  std::uint64_t next_request_ = 0;
};

class HttpTransport final : public Transport {
 public:
  HttpTransport(std::string host, int port, std::string token, double timeout_seconds = 5.0);
  TransportReply request(const std::string& method, const std::string& path,
                         const std::string& body) override;

 private:
  std::string host_;
  int port_;
  std::string token_;
  double timeout_;
  std::uint64_t next_request_ = 0;
};

/// Items this user has had accepted, per campaign. Only grows. Persisted as a
/// small JSON file when constructed with a path.
class SeenCache {
 public:
  SeenCache() = default;
  explicit SeenCache(std::filesystem::path file);

  static std::filesystem::path file_for(const std::filesystem::path& dir, const std::string& user_id);

  bool contains(const std::string& campaign_id, const std::string& item_id) const;
  void insert(const std::string& campaign_id, const std::string& item_id);
  std::size_t size() const { return entries_.size(); }
  const std::set<std::pair<std::string, std::string>>& entries() const { return entries_; }
  void save() const;

 private:
  std::optional<std::filesystem::path> file_;
  std::set<std::pair<std::string, std::string>> entries_;
};

struct TaskView {
  std::string campaign_id;
  std::string batch_id;
  std::string assignment_id;
  std::string item_id;
  std::string prompt;
  std::string media_ref;
  std::vector<std::string> options;
};

struct Answer {
  std::string choice;
  double elapsed = 0.0;  // seconds from display to answer
};

/// What the host app supplies to put a task ad on screen.
struct PresentationHook {
  /// Rewarded mode only: the opt-in prompt. false means Skip.
  std::function<bool(int reward_points)> offer;
  /// One task on screen. nullopt means the ad was dismissed.
  std::function<std::optional<Answer>(const TaskView&)> present;
};

enum class AdMode { Rewarded, NonOptional };
enum class AdStatus { Completed, Skipped, NoTasks, Abandoned, Error };

std::string_view to_string(AdStatus status);

struct AdSlotContext {
  std::string user_id;
  AdMode mode = AdMode::NonOptional;
  int reward_points = 5;
  double time_budget = kMaxTimeBudget;  // per task on screen
  PresentationHook hook;
};

struct AdOutcome {
  AdStatus status = AdStatus::Error;
  int n_served = 0;
  int n_answered = 0;  // accepted by the service
  int reward_granted = 0;
  double wall_time = 0.0;
  std::string batch_id;
  std::string error;
};

struct ServedTask {
  std::string assignment_id;
  std::string item_id;
};

struct SubmitAck {
  std::string assignment_id;
  bool accepted = false;
  std::string status;
};

/// Adds accepted items of `campaign_id` to the cache and persists it.
void cache_sync(SeenCache& cache, const std::string& campaign_id,
                const std::vector<ServedTask>& tasks, const std::vector<SubmitAck>& acks);

struct ClientOptions {
  /// Enforce the per-task budget against the wall clock by running the hook on
  /// a helper thread. Off for virtual-clock simulation.
  bool enforce_deadline = true;
  double grace = 2.0;
};

struct ClientMetrics {
  std::size_t offers_declined = 0;
  std::size_t cache_filtered = 0;
  std::size_t ads_shown = 0;
};

/// Runs a task ad: offer (rewarded), fetch, present, submit, hand control
/// back. Never throws into the host app.
class TaskAdClient {
 public:
  TaskAdClient(Transport& transport, SeenCache& cache, const Clock& clock,
               ClientOptions options = {});

  AdOutcome show_task_ad(const AdSlotContext& ctx) noexcept;
  const ClientMetrics& metrics() const { return metrics_; }

 private:
  AdOutcome run(const AdSlotContext& ctx);
  std::optional<Answer> present_with_deadline(const AdSlotContext& ctx, const TaskView& view,
                                              bool& timed_out);

  Transport& transport_;
  SeenCache& cache_;
  const Clock& clock_;
  ClientOptions options_;
  ClientMetrics metrics_;
  std::atomic<bool> busy_{false};
};

}  // namespace taskad::sdk
