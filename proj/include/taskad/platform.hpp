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
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "taskad/clock.hpp"
#include "taskad/engine.hpp"
#include "taskad/metrics.hpp"
#include "taskad/store.hpp"

namespace taskad::service {

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string store_path;  // empty: in-memory store
  double reservation_ttl = 120.0;
  bool overcommit = false;
  double alpha = 0.05;
  std::string practitioner_token = "practitioner-dev-token";
  std::string client_token = "client-dev-token";
  std::size_t compact_every = 5000;  // events between snapshots
  bool fsync = false;
  std::optional<std::uint64_t> selection_seed;

  dissem::ReservationPolicy policy() const { return {reservation_ttl, overcommit}; }

  /// Defaults, then the JSON file (if any), then TASKAD_* environment
  /// variables: TASKAD_LISTEN (host:port), TASKAD_STORE_PATH,
  /// TASKAD_RESERVATION_TTL, TASKAD_ALPHA, TASKAD_PRACTITIONER_TOKEN,
  /// TASKAD_CLIENT_TOKEN.
  static ServiceConfig load(const std::string& path = {},
                            const std::function<const char*(const char*)>& getenv = nullptr);
};

enum class Actor { Practitioner, AppClient };

struct ApiRequest {
  std::string method;
  std::string path;
  std::map<std::string, std::string> query;
  std::string body;
  std::string bearer_token;
  std::string request_id;
};

struct ApiResponse {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

struct DatasetSummary {
  std::string dataset_id;
  std::size_t n_items = 0;
  std::map<std::string, int> classes;
  std::size_t gold_items = 0;
};

struct Ack {
  std::string assignment_id;
  bool accepted = false;
  std::optional<ErrorCode> error;
  std::string message;
};

/// The service: persistence, the practitioner and client operations, and a
/// transport-agnostic JSON API (`handle`) that the HTTP binding and the
/// in-process SDK transport both call.
class Platform {
 public:
  Platform(ServiceConfig config, const Clock& clock,
           std::unique_ptr<store::EventStore> store = nullptr);
  ~Platform();
  Platform(const Platform&) = delete;
  Platform& operator=(const Platform&) = delete;

  DatasetSummary upload_dataset(std::string_view manifest, std::string name = {});
  std::string create_campaign(const std::string& dataset_id, const CampaignConfig& config);
  Campaign publish(const std::string& campaign_id);
  Campaign unpublish(const std::string& campaign_id);
  void reopen_item(const std::string& campaign_id, const std::string& item_id, int extra = 1);

  dissem::TaskBatch serve(const std::string& user_id,
                          const std::optional<std::string>& campaign_id = std::nullopt);
  std::vector<Ack> submit(const std::string& batch_id, const std::vector<Response>& responses);

  metrics::ProgressReport progress(const std::string& campaign_id) const;
  std::string export_campaign(const std::string& campaign_id, bool detail = false) const;

  std::size_t expire_stale();
  /// Runs expire_stale every `interval` seconds on a background thread.
  void start_sweeper(double interval);
  void stop_sweeper();

  ApiResponse handle(const ApiRequest& request);

  dissem::Engine& engine() { return engine_; }
  const dissem::Engine& engine() const { return engine_; }
  const ServiceConfig& config() const { return config_; }
  std::size_t recovered_events() const { return recovered_events_; }

 private:
  void maybe_compact();
  ApiResponse route(const ApiRequest& request, Actor actor, const json& envelope);

  ServiceConfig config_;
  const Clock& clock_;
  std::unique_ptr<store::EventStore> store_;
  dissem::Engine engine_;
  std::size_t recovered_events_ = 0;
  std::mutex compact_mu_;
  std::atomic<bool> sweeping_{false};
  std::thread sweeper_;
};

json batch_document(const dissem::TaskBatch& batch);
int http_status(ErrorCode code);

}  // namespace taskad::service
