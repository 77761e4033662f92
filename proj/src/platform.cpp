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

#include "taskad/platform.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace taskad::service {

namespace {

std::vector<std::string> split_path(std::string_view path) {
  std::vector<std::string> parts;
  std::size_t pos = 0;
  while (pos < path.size()) {
    std::size_t next = path.find('/', pos);
    if (next == std::string_view::npos) next = path.size();
    if (next > pos) parts.emplace_back(path.substr(pos, next - pos));
    pos = next + 1;
  }
  return parts;
}

json ack_json(const Ack& ack) {
  json j{{"assignment_id", ack.assignment_id},
         {"status", ack.accepted ? "accepted" : std::string(to_string(*ack.error))}};
  if (!ack.message.empty()) j["message"] = ack.message;
  return j;
}

json parse_body(const std::string& body) {
  if (body.empty()) return json::object();
  json j = json::parse(body, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::BadRequest, "request body is not valid JSON");
  return j;
}

}  // namespace

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::Unauthorized: return 401;
    case ErrorCode::Forbidden: return 403;
    case ErrorCode::UnknownCampaign:
    case ErrorCode::UnknownDataset:
    case ErrorCode::UnknownBatch:
    case ErrorCode::UnknownItem:
    case ErrorCode::UnknownAssignment:
    case ErrorCode::NotFound: return 404;
    case ErrorCode::IllegalTransition:
    case ErrorCode::AlreadyCompleted:
    case ErrorCode::ReservationExpired:
    case ErrorCode::QuotaFilled:
    case ErrorCode::CampaignNotPublished: return 409;
    case ErrorCode::StorageFailure: return 500;
    default: return 400;
  }
}

ServiceConfig ServiceConfig::load(const std::string& path,
                                  const std::function<const char*(const char*)>& getenv_fn) {
  ServiceConfig c;
  auto set_listen = [&](const std::string& listen) {
    auto colon = listen.rfind(':');
    if (colon == std::string::npos) {
      throw Error(ErrorCode::InvalidConfig, "listen address must be host:port");
    }
    c.host = listen.substr(0, colon);
    c.port = std::stoi(listen.substr(colon + 1));
  };
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::InvalidConfig, "cannot read config file " + path);
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      throw Error(ErrorCode::InvalidConfig, "config file is not a JSON object");
    }
    try {
      if (j.contains("listen")) set_listen(j["listen"].get<std::string>());
      c.store_path = j.value("store_path", c.store_path);
      c.reservation_ttl = j.value("reservation_ttl", c.reservation_ttl);
      c.overcommit = j.value("overcommit", c.overcommit);
      c.alpha = j.value("alpha", c.alpha);
      c.practitioner_token = j.value("practitioner_token", c.practitioner_token);
      c.client_token = j.value("client_token", c.client_token);
      c.compact_every = j.value("compact_every", c.compact_every);
      c.fsync = j.value("fsync", c.fsync);
      if (j.contains("selection_seed")) c.selection_seed = j["selection_seed"].get<std::uint64_t>();
    } catch (const json::exception& e) {
      throw Error(ErrorCode::InvalidConfig, e.what());
    }
  }
  auto env = [&](const char* name) -> const char* {
    return getenv_fn ? getenv_fn(name) : std::getenv(name);
  };
  try {
    if (const char* v = env("TASKAD_LISTEN")) set_listen(v);
    if (const char* v = env("TASKAD_STORE_PATH")) c.store_path = v;
    if (const char* v = env("TASKAD_RESERVATION_TTL")) c.reservation_ttl = std::stod(v);
    if (const char* v = env("TASKAD_ALPHA")) c.alpha = std::stod(v);
    if (const char* v = env("TASKAD_PRACTITIONER_TOKEN")) c.practitioner_token = v;
    if (const char* v = env("TASKAD_CLIENT_TOKEN")) c.client_token = v;
  } catch (const std::invalid_argument&) {
    throw Error(ErrorCode::InvalidConfig, "non-numeric environment override");
  }
  c.policy().validate();
  if (!(c.alpha > 0.0 && c.alpha < 1.0)) throw Error(ErrorCode::InvalidConfig, "alpha must lie in (0, 1)");
  return c;
}

Platform::Platform(ServiceConfig config, const Clock& clock,
                   std::unique_ptr<store::EventStore> store)
    : config_(std::move(config)),
      clock_(clock),
      store_(std::move(store)),
      engine_(config_.selection_seed.value_or(0x7a5cad)) {
  config_.policy().validate();
  if (!store_) {
    if (config_.store_path.empty()) {
      store_ = std::make_unique<store::MemoryStore>();
    } else {
      store_ = std::make_unique<store::FileStore>(config_.store_path, config_.fsync);
    }
  }
  auto recovered = store_->load();
  if (recovered.snapshot) engine_.restore(*recovered.snapshot);
  for (const auto& ev : recovered.events) engine_.replay(ev);
  recovered_events_ = recovered.events.size();
  engine_.set_journal([this](const json& ev) { store_->append(ev); });
}

Platform::~Platform() { stop_sweeper(); }

void Platform::maybe_compact() {
  if (config_.compact_every == 0 || store_->events_since_compaction() < config_.compact_every) return;
  std::unique_lock lock(compact_mu_, std::try_to_lock);
  if (!lock.owns_lock()) return;
  if (store_->events_since_compaction() < config_.compact_every) return;
  engine_.checkpoint([this](const json& snapshot) { store_->compact(snapshot); });
}

DatasetSummary Platform::upload_dataset(std::string_view manifest_text, std::string name) {
  DatasetManifest manifest;
  try {
    manifest = validate_manifest(manifest_text);
  } catch (const Error& e) {
    throw Error(ErrorCode::ValidationFailed, e.what(), e.subject(), e.code());
  }
  manifest.name = std::move(name);
  DatasetSummary summary;
  summary.n_items = manifest.items.size();
  for (const auto& item : manifest.items) {
    ++summary.classes[item.class_name];
    if (item.gold) ++summary.gold_items;
  }
  summary.dataset_id = engine_.add_dataset(std::move(manifest), clock_.now());
  maybe_compact();
  return summary;
}

std::string Platform::create_campaign(const std::string& dataset_id, const CampaignConfig& config) {
  auto id = engine_.create_campaign(dataset_id, config, clock_.now());
  maybe_compact();
  return id;
}

Campaign Platform::publish(const std::string& campaign_id) {
  auto c = engine_.set_status(campaign_id, CampaignStatus::Published, clock_.now());
  maybe_compact();
  return c;
}

Campaign Platform::unpublish(const std::string& campaign_id) {
  auto c = engine_.set_status(campaign_id, CampaignStatus::Unpublished, clock_.now());
  maybe_compact();
  return c;
}

void Platform::reopen_item(const std::string& campaign_id, const std::string& item_id, int extra) {
  engine_.reopen_item(campaign_id, item_id, extra, clock_.now());
  maybe_compact();
}

dissem::TaskBatch Platform::serve(const std::string& user_id,
                                  const std::optional<std::string>& campaign_id) {
  if (user_id.empty()) throw Error(ErrorCode::BadRequest, "user_id is required");
  auto filter = campaign_id ? dissem::CampaignFilter::only(*campaign_id) : dissem::CampaignFilter::all();
  auto batch = engine_.select_batch(filter, user_id, clock_.now(), config_.policy());
  maybe_compact();
  return batch;
}

std::vector<Ack> Platform::submit(const std::string& batch_id,
                                  const std::vector<Response>& responses) {
  const auto members = engine_.batch_assignments(batch_id);
  std::vector<Ack> acks;
  acks.reserve(responses.size());
  for (const auto& r : responses) {
    Ack ack;
    ack.assignment_id = r.assignment_id;
    if (std::find(members.begin(), members.end(), r.assignment_id) == members.end()) {
      ack.error = ErrorCode::UnknownAssignment;
      ack.message = "assignment is not part of batch " + batch_id;
    } else {
      try {
        engine_.record_completion(r.assignment_id, r, clock_.now());
        ack.accepted = true;
      } catch (const Error& e) {
        ack.error = e.code();
        ack.message = e.what();
      }
    }
    acks.push_back(std::move(ack));
  }
  maybe_compact();
  return acks;
}

metrics::ProgressReport Platform::progress(const std::string& campaign_id) const {
  return metrics::progress(engine_.view(campaign_id), clock_.now());
}

std::string Platform::export_campaign(const std::string& campaign_id, bool detail) const {
  return metrics::export_ndjson(engine_.view(campaign_id), detail);
}

std::size_t Platform::expire_stale() {
  auto n = engine_.expire_stale(clock_.now());
  maybe_compact();
  return n;
}

void Platform::start_sweeper(double interval) {
  stop_sweeper();
  sweeping_ = true;
  sweeper_ = std::thread([this, interval] {
    using namespace std::chrono;
    auto next = steady_clock::now() + duration_cast<steady_clock::duration>(duration<double>(interval));
    while (sweeping_) {
      std::this_thread::sleep_for(milliseconds(20));
      if (steady_clock::now() < next) continue;
      next += duration_cast<steady_clock::duration>(duration<double>(interval));
      try {
        expire_stale();
      } catch (const Error&) {
        // Storage trouble surfaces on the request path; the sweep retries.
      }
    }
  });
}

void Platform::stop_sweeper() {
  sweeping_ = false;
  if (sweeper_.joinable()) sweeper_.join();
}

json batch_document(const dissem::TaskBatch& batch) {
  json tasks = json::array();
  for (const auto& t : batch.tasks) {
    tasks.push_back({{"assignment_id", t.assignment_id},
                     {"item_id", t.item_id},
                     {"prompt", t.prompt},
                     {"options", t.options},
                     {"media_ref", t.media_ref}});
  }
  json doc{{"no_tasks", batch.no_tasks()}, {"issued_at", batch.issued_at}, {"tasks", std::move(tasks)}};
  if (!batch.no_tasks()) {
    doc["batch_id"] = batch.batch_id;
    doc["campaign_id"] = batch.campaign_id;
    doc["expires_at"] = batch.expires_at;
    doc["time_budget"] = batch.time_budget;
  }
  return doc;
}

ApiResponse Platform::handle(const ApiRequest& request) {
  static std::atomic<std::uint64_t> request_seq{0};
  json envelope{{"request_id", request.request_id.empty()
                                   ? "srv-" + std::to_string(++request_seq)
                                   : request.request_id},
                {"timestamp", clock_.now()}};
  auto error_response = [&](ErrorCode code, const std::string& message,
                            const std::string& subject, std::optional<ErrorCode> detail) {
    json err{{"code", to_string(code)}, {"message", message}};
    if (!subject.empty()) err["subject"] = subject;
    if (detail) err["detail_code"] = to_string(*detail);
    json body = envelope;
    body["error"] = std::move(err);
    return ApiResponse{http_status(code), body.dump(), "application/json"};
  };

  if (request.method == "GET" && request.path == "/health") {
    json body = envelope;
    body["payload"] = {{"ok", true}, {"version", engine_.version()}};
    return ApiResponse{200, body.dump()};
  }

  Actor actor;
  if (!config_.practitioner_token.empty() && request.bearer_token == config_.practitioner_token) {
    actor = Actor::Practitioner;
  } else if (!config_.client_token.empty() && request.bearer_token == config_.client_token) {
    actor = Actor::AppClient;
  } else {
    return error_response(ErrorCode::Unauthorized, "missing or unknown bearer token", {}, {});
  }
  envelope["actor"] = actor == Actor::Practitioner ? "Practitioner" : "AppClient";

  try {
    return route(request, actor, envelope);
  } catch (const Error& e) {
    return error_response(e.code(), e.what(), e.subject(), e.cause());
  } catch (const json::exception& e) {
    return error_response(ErrorCode::BadRequest, e.what(), {}, {});
  } catch (const std::exception& e) {
    return error_response(ErrorCode::StorageFailure, e.what(), {}, {});
  }
}

ApiResponse Platform::route(const ApiRequest& req, Actor actor, const json& envelope) {
  const auto parts = split_path(req.path);
  auto ok = [&](json payload, int status = 200) {
    json body = envelope;
    body["payload"] = std::move(payload);
    return ApiResponse{status, body.dump(), "application/json"};
  };
  auto require = [&](Actor needed) {
    if (actor != needed) throw Error(ErrorCode::Forbidden, "endpoint not available to this actor");
  };
  auto post = req.method == "POST";
  auto get = req.method == "GET";

  if (parts.size() == 1 && parts[0] == "serve" && post) {
    require(Actor::AppClient);
    json body = parse_body(req.body);
    std::optional<std::string> cid;
    if (body.contains("campaign_id") && !body["campaign_id"].is_null()) {
      cid = body["campaign_id"].get<std::string>();
    }
    return ok(batch_document(serve(body.at("user_id").get<std::string>(), cid)));
  }
  if (parts.size() == 1 && parts[0] == "responses" && post) {
    require(Actor::AppClient);
    json body = parse_body(req.body);
    const auto batch_id = body.at("batch_id").get<std::string>();
    std::vector<Response> responses;
    for (const auto& r : body.at("responses")) {
      Response resp;
      resp.assignment_id = r.at("assignment_id").get<std::string>();
      resp.choice = r.at("choice").get<std::string>();
      resp.elapsed = r.at("elapsed").get<double>();
      responses.push_back(std::move(resp));
    }
    json acks = json::array();
    for (const auto& a : submit(batch_id, responses)) acks.push_back(ack_json(a));
    return ok({{"batch_id", batch_id}, {"acks", std::move(acks)}});
  }

  if (parts.empty()) throw Error(ErrorCode::NotFound, "no route for " + req.method + " " + req.path);

  if (parts[0] == "datasets" && parts.size() == 1 && post) {
    require(Actor::Practitioner);
    auto it = req.query.find("name");
    auto summary = upload_dataset(req.body, it == req.query.end() ? std::string{} : it->second);
    return ok({{"dataset_id", summary.dataset_id},
               {"n_items", summary.n_items},
               {"classes", summary.classes},
               {"gold_items", summary.gold_items}},
              201);
  }
  if (parts[0] == "campaigns") {
    require(Actor::Practitioner);
    if (parts.size() == 1 && post) {
      json body = parse_body(req.body);
      CampaignConfig cfg = body.contains("config") ? body["config"].get<CampaignConfig>() : CampaignConfig{};
      auto id = create_campaign(body.at("dataset_id").get<std::string>(), cfg);
      return ok(engine_.campaign(id), 201);
    }
    if (parts.size() == 1 && get) {
      return ok(engine_.campaigns());
    }
    if (parts.size() == 2 && get) return ok(engine_.campaign(parts[1]));
    if (parts.size() == 3 && post && parts[2] == "publish") return ok(publish(parts[1]));
    if (parts.size() == 3 && post && parts[2] == "unpublish") return ok(unpublish(parts[1]));
    if (parts.size() == 3 && get && parts[2] == "progress") return ok(progress(parts[1]));
    if (parts.size() == 3 && get && parts[2] == "export") {
      auto it = req.query.find("detail");
      bool detail = it != req.query.end() && (it->second == "1" || it->second == "true");
      return ApiResponse{200, export_campaign(parts[1], detail), "application/x-ndjson"};
    }
    if (parts.size() == 5 && post && parts[2] == "items" && parts[4] == "reopen") {
      json body = parse_body(req.body);
      reopen_item(parts[1], parts[3], body.value("extra", 1));
      return ok(engine_.campaign(parts[1]));
    }
  }
  throw Error(ErrorCode::NotFound, "no route for " + req.method + " " + req.path);
}

}  // namespace taskad::service
