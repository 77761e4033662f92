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

#include "taskad/sdk.hpp"

#include <httplib.h>

#include <chrono>
#include <condition_variable>
#include <fstream>
#include <memory>
#include <mutex>
#include <sstream>
#include <thread>

#include "taskad/platform.hpp"

namespace taskad::sdk {

namespace fs = std::filesystem;

std::string_view to_string(AdStatus status) {
  switch (status) {
    case AdStatus::Completed: return "Completed";
    case AdStatus::Skipped: return "Skipped";
    case AdStatus::NoTasks: return "NoTasks";
    case AdStatus::Abandoned: return "Abandoned";
    case AdStatus::Error: return "Error";
  }
  return "Error";
}

// --- transports --------------------------------------------------------------

InProcessTransport::InProcessTransport(service::Platform& platform, std::string token)
    : platform_(platform), token_(std::move(token)) {}

TransportReply InProcessTransport::request(const std::string& method, const std::string& path,
                                           const std::string& body) {
  service::ApiRequest req;
  req.method = method;
  auto q = path.find('?');
  req.path = path.substr(0, q);
  if (q != std::string::npos) {
    std::string query = path.substr(q + 1);
    std::size_t pos = 0;
    while (pos < query.size()) {
      auto amp = query.find('&', pos);
      if (amp == std::string::npos) amp = query.size();
      auto kv = query.substr(pos, amp - pos);
      auto eq = kv.find('=');
      req.query[kv.substr(0, eq)] = eq == std::string::npos ? "" : kv.substr(eq + 1);
      pos = amp + 1;
    }
  }
  req.body = body;
  req.bearer_token = token_;
  req.request_id = "sdk-" + std::to_string(++next_request_);
  auto res = platform_.handle(req);
  return {res.status, std::move(res.body)};
}

HttpTransport::HttpTransport(std::string host, int port, std::string token, double timeout_seconds)
    : host_(std::move(host)), port_(port), token_(std::move(token)), timeout_(timeout_seconds) {}

TransportReply HttpTransport::request(const std::string& method, const std::string& path,
                                      const std::string& body) {
  httplib::Client client(host_, port_);
  const auto secs = static_cast<time_t>(timeout_);
  const auto usecs = static_cast<time_t>((timeout_ - static_cast<double>(secs)) * 1e6);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);
  httplib::Headers headers{{"Authorization", "Bearer " + token_},
                           {"X-Request-Id", "sdk-" + std::to_string(++next_request_)}};
  httplib::Result res = method == "POST"
                            ? client.Post(path, headers, body, "application/json")
                            : client.Get(path, headers);
  if (!res) throw TransportError("transport failure: " + httplib::to_string(res.error()));
  return {res->status, res->body};
}

// --- seen cache ----------------------------------------------------------------

SeenCache::SeenCache(fs::path file) : file_(std::move(file)) {
  std::ifstream in(*file_);
  if (!in) return;
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.contains("seen")) return;
  for (const auto& e : j["seen"]) {
    entries_.emplace(e.at(0).get<std::string>(), e.at(1).get<std::string>());
  }
}

fs::path SeenCache::file_for(const fs::path& dir, const std::string& user_id) {
  std::string safe;
  for (char c : user_id) {
    safe += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_') ? c : '_';
  }
  return dir / (safe + ".seen.json");
}

bool SeenCache::contains(const std::string& campaign_id, const std::string& item_id) const {
  return entries_.count({campaign_id, item_id}) > 0;
}

void SeenCache::insert(const std::string& campaign_id, const std::string& item_id) {
  entries_.emplace(campaign_id, item_id);
}

void SeenCache::save() const {
  if (!file_) return;
  json seen = json::array();
  for (const auto& [c, i] : entries_) seen.push_back({c, i});
  std::error_code ec;
  if (file_->has_parent_path()) fs::create_directories(file_->parent_path(), ec);
  fs::path tmp = *file_;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    out << json{{"seen", seen}}.dump();
  }
  fs::rename(tmp, *file_, ec);
}

void cache_sync(SeenCache& cache, const std::string& campaign_id,
                const std::vector<ServedTask>& tasks, const std::vector<SubmitAck>& acks) {
  bool changed = false;
  for (const auto& ack : acks) {
    if (!ack.accepted) continue;
    for (const auto& t : tasks) {
      if (t.assignment_id == ack.assignment_id) {
        cache.insert(campaign_id, t.item_id);
        changed = true;
      }
    }
  }
  if (changed) cache.save();
}

// --- client ------------------------------------------------------------------------

TaskAdClient::TaskAdClient(Transport& transport, SeenCache& cache, const Clock& clock,
                           ClientOptions options)
    : transport_(transport), cache_(cache), clock_(clock), options_(options) {}

AdOutcome TaskAdClient::show_task_ad(const AdSlotContext& ctx) noexcept {
  if (busy_.exchange(true)) {
    AdOutcome out;
    out.status = AdStatus::Error;
    out.error = "a task ad is already showing";
    return out;
  }
  const Timestamp start = clock_.now();
  AdOutcome out;
  try {
    out = run(ctx);
  } catch (const std::exception& e) {
    out = AdOutcome{};
    out.status = AdStatus::Error;
    out.error = e.what();
  } catch (...) {
    out = AdOutcome{};
    out.status = AdStatus::Error;
    out.error = "unknown failure";
  }
  if (out.status != AdStatus::Completed) out.reward_granted = 0;
  out.wall_time = clock_.now() - start;
  busy_ = false;
  return out;
}

std::optional<Answer> TaskAdClient::present_with_deadline(const AdSlotContext& ctx,
                                                          const TaskView& view, bool& timed_out) {
  timed_out = false;
  if (!options_.enforce_deadline) return ctx.hook.present(view);

  struct Shared {
    std::mutex mu;
    std::condition_variable cv;
    bool done = false;
    std::optional<Answer> answer;
    std::exception_ptr failure;
  };
  auto shared = std::make_shared<Shared>();
  std::thread([shared, present = ctx.hook.present, view] {
    std::optional<Answer> a;
    std::exception_ptr failure;
    try {
      a = present(view);
    } catch (...) {
      failure = std::current_exception();
    }
    std::lock_guard lock(shared->mu);
    shared->answer = std::move(a);
    shared->failure = failure;
    shared->done = true;
    shared->cv.notify_all();
  }).detach();

  std::unique_lock lock(shared->mu);
  const auto deadline = std::chrono::duration<double>(ctx.time_budget + options_.grace);
  if (!shared->cv.wait_for(lock, deadline, [&] { return shared->done; })) {
    timed_out = true;
    return std::nullopt;
  }
  if (shared->failure) std::rethrow_exception(shared->failure);
  return shared->answer;
}

AdOutcome TaskAdClient::run(const AdSlotContext& ctx) {
  AdOutcome out;
  if (ctx.user_id.empty()) throw TransportError("user_id is required");
  if (!ctx.hook.present) throw TransportError("presentation hook has no present callback");

  if (ctx.mode == AdMode::Rewarded) {
    const bool accepted = ctx.hook.offer ? ctx.hook.offer(ctx.reward_points) : true;
    if (!accepted) {
      ++metrics_.offers_declined;
      out.status = AdStatus::Skipped;
      return out;
    }
  }

  auto served = transport_.request("POST", "/serve", json{{"user_id", ctx.user_id}}.dump());
  if (served.status != 200) {
    out.status = AdStatus::Error;
    out.error = "serve failed with status " + std::to_string(served.status);
    return out;
  }
  const json doc = json::parse(served.body).at("payload");
  if (doc.at("no_tasks").get<bool>()) {
    out.status = AdStatus::NoTasks;
    return out;
  }
  ++metrics_.ads_shown;
  const auto campaign_id = doc.at("campaign_id").get<std::string>();
  out.batch_id = doc.at("batch_id").get<std::string>();
  const double budget = std::min(ctx.time_budget, doc.value("time_budget", ctx.time_budget));

  std::vector<ServedTask> tasks;
  json answers = json::array();
  bool abandoned = false;
  for (const auto& t : doc.at("tasks")) {
    TaskView view{campaign_id,
                  out.batch_id,
                  t.at("assignment_id").get<std::string>(),
                  t.at("item_id").get<std::string>(),
                  t.at("prompt").get<std::string>(),
                  t.value("media_ref", std::string{}),
                  t.at("options").get<std::vector<std::string>>()};
    tasks.push_back({view.assignment_id, view.item_id});
    ++out.n_served;
    if (abandoned) continue;
    if (cache_.contains(campaign_id, view.item_id)) {
      ++metrics_.cache_filtered;
      continue;
    }
    AdSlotContext task_ctx = ctx;
    task_ctx.time_budget = budget;
    bool timed_out = false;
    auto answer = present_with_deadline(task_ctx, view, timed_out);
    if (!answer || timed_out || !(answer->elapsed > 0.0) || answer->elapsed > budget) {
      abandoned = true;
      continue;
    }
    answers.push_back({{"assignment_id", view.assignment_id},
                       {"choice", answer->choice},
                       {"elapsed", answer->elapsed}});
  }

  if (!answers.empty()) {
    auto submitted = transport_.request(
        "POST", "/responses", json{{"batch_id", out.batch_id}, {"responses", answers}}.dump());
    if (submitted.status != 200) {
      out.status = AdStatus::Error;
      out.error = "submit failed with status " + std::to_string(submitted.status);
      return out;
    }
    std::vector<SubmitAck> acks;
    const json reply = json::parse(submitted.body);
    for (const auto& a : reply.at("payload").at("acks")) {
      SubmitAck ack;
      ack.assignment_id = a.at("assignment_id").get<std::string>();
      ack.status = a.at("status").get<std::string>();
      ack.accepted = ack.status == "accepted";
      if (ack.accepted) ++out.n_answered;
      acks.push_back(std::move(ack));
    }
    cache_sync(cache_, campaign_id, tasks, acks);
  }

  out.status = abandoned ? AdStatus::Abandoned : AdStatus::Completed;
  if (ctx.mode == AdMode::Rewarded && out.status == AdStatus::Completed &&
      out.n_answered == out.n_served) {
    out.reward_granted = ctx.reward_points;
  }
  return out;
}

}  // namespace taskad::sdk
