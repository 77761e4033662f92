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

#include <gtest/gtest.h>

#include <chrono>
#include <fstream>
#include <map>
#include <thread>

#include "support/fixtures.hpp"
#include "taskad/http_server.hpp"
#include "taskad/platform.hpp"
#include "taskad/sdk.hpp"
#include "taskad/store.hpp"

namespace taskad::service {
namespace {

class ApiTest : public ::testing::Test {
 protected:
  void SetUp() override { platform_ = std::make_unique<Platform>(config_, clock_); }

  ApiResponse call(const std::string& method, const std::string& path, const json& body = nullptr,
                   const std::string& token = "practitioner-dev-token",
                   std::map<std::string, std::string> query = {}) {
    ApiRequest r;
    r.method = method;
    r.path = path;
    r.body = body.is_string() ? body.get<std::string>() : (body.is_null() ? "" : body.dump());
    r.bearer_token = token;
    r.query = std::move(query);
    return platform_->handle(r);
  }
  ApiResponse client(const std::string& path, const json& body) {
    return call("POST", path, body, "client-dev-token");
  }
  static json parse(const ApiResponse& r) { return json::parse(r.body); }

  std::string ready_campaign(int items, int k, int batch) {
    auto up = call("POST", "/datasets", json(serialize_manifest(testing::make_manifest(items))), "practitioner-dev-token",
                   {{"name", "toy"}});
    EXPECT_EQ(up.status, 201) << up.body;
    json cfg = testing::make_config(k, batch);
    auto created = call("POST", "/campaigns", {{"dataset_id", parse(up)["payload"]["dataset_id"]}, {"config", cfg}});
    EXPECT_EQ(created.status, 201) << created.body;
    const auto id = parse(created)["payload"]["campaign_id"].get<std::string>();
    EXPECT_EQ(call("POST", "/campaigns/" + id + "/publish").status, 200);
    return id;
  }

  ServiceConfig config_;
  ManualClock clock_{1.7e9};
  std::unique_ptr<Platform> platform_;
};

TEST_F(ApiTest, HealthNeedsNoToken) {
  auto r = call("GET", "/health", nullptr, "");
  EXPECT_EQ(r.status, 200);
  EXPECT_TRUE(parse(r)["payload"]["ok"].get<bool>());
}

TEST_F(ApiTest, AuthAndRoleSeparation) {
  EXPECT_EQ(call("GET", "/campaigns", nullptr, "").status, 401);
  EXPECT_EQ(call("GET", "/campaigns", nullptr, "wrong").status, 401);
  EXPECT_EQ(call("GET", "/campaigns", nullptr, "client-dev-token").status, 403);
  EXPECT_EQ(call("POST", "/serve", {{"user_id", "u"}}).status, 403);
  EXPECT_EQ(call("GET", "/nowhere").status, 404);
  auto r = parse(call("GET", "/campaigns", nullptr, ""));
  EXPECT_EQ(r["error"]["code"], "Unauthorized");
  EXPECT_TRUE(r.contains("request_id"));
  EXPECT_TRUE(r.contains("timestamp"));
}

TEST_F(ApiTest, UploadValidationNamesTheLine) {
  auto r = call("POST", "/datasets", json(std::string("{\"item_id\":\"a\",\"media_ref\":\"m\",\"class_name\":\"Dog\"}\n{oops")));
  EXPECT_EQ(r.status, 400);
  auto e = parse(r)["error"];
  EXPECT_EQ(e["code"], "ValidationFailed");
  EXPECT_EQ(e["detail_code"], "MalformedRecord");
  EXPECT_EQ(e["subject"], "2");
}

TEST_F(ApiTest, CampaignErrorsMapToStatus) {
  EXPECT_EQ(call("POST", "/campaigns", {{"dataset_id", "ds-404"}}).status, 404);
  const auto id = ready_campaign(4, 1, 2);
  EXPECT_EQ(call("POST", "/campaigns/" + id + "/publish").status, 409);
  EXPECT_EQ(call("GET", "/campaigns/cmp-77").status, 404);
  auto up = parse(call("POST", "/datasets", json(serialize_manifest(testing::make_manifest(2)))));
  json bad = testing::make_config(0, 1);
  auto r = call("POST", "/campaigns", {{"dataset_id", up["payload"]["dataset_id"]}, {"config", bad}});
  EXPECT_EQ(r.status, 400);
  EXPECT_EQ(parse(r)["error"]["code"], "InvalidConfig");
}

TEST_F(ApiTest, ServedDocumentNeverCarriesGold) {
  ready_campaign(10, 2, 4);
  auto r = client("/serve", {{"user_id", "u1"}});
  ASSERT_EQ(r.status, 200);
  EXPECT_EQ(r.body.find("gold"), std::string::npos);
  auto doc = parse(r)["payload"];
  const std::set<std::string> allowed_top = {"no_tasks", "issued_at", "tasks", "batch_id", "campaign_id",
                                             "expires_at", "time_budget"};
  for (const auto& [k, v] : doc.items()) EXPECT_TRUE(allowed_top.count(k)) << k;
  const std::set<std::string> allowed_task = {"assignment_id", "item_id", "prompt", "options", "media_ref"};
  ASSERT_EQ(doc["tasks"].size(), 4u);
  for (const auto& t : doc["tasks"]) {
    for (const auto& [k, v] : t.items()) EXPECT_TRUE(allowed_task.count(k)) << k;
  }
}

TEST_F(ApiTest, SubmitAcksEachResponse) {
  const auto id = ready_campaign(6, 2, 3);
  auto doc = parse(client("/serve", {{"user_id", "u1"}}))["payload"];
  const auto batch = doc["batch_id"].get<std::string>();
  json responses = json::array();
  responses.push_back({{"assignment_id", doc["tasks"][0]["assignment_id"]}, {"choice", "Yes"}, {"elapsed", 2.5}});
  responses.push_back({{"assignment_id", doc["tasks"][1]["assignment_id"]}, {"choice", "Maybe"}, {"elapsed", 1.0}});
  responses.push_back({{"assignment_id", "a-999"}, {"choice", "No"}, {"elapsed", 1.0}});
  auto r = client("/responses", {{"batch_id", batch}, {"responses", responses}});
  ASSERT_EQ(r.status, 200) << r.body;
  auto acks = parse(r)["payload"]["acks"];
  EXPECT_EQ(acks[0]["status"], "accepted");
  EXPECT_EQ(acks[1]["status"], "InvalidResponse");
  EXPECT_EQ(acks[2]["status"], "UnknownAssignment");

  auto again = parse(client("/responses", {{"batch_id", batch}, {"responses", json::array({responses[0]})}}));
  EXPECT_EQ(again["payload"]["acks"][0]["status"], "AlreadyCompleted");
  EXPECT_EQ(client("/responses", {{"batch_id", "b-404"}, {"responses", json::array()}}).status, 404);
  EXPECT_EQ(client("/serve", json::object()).status, 400);

  auto prog = parse(call("GET", "/campaigns/" + id + "/progress"))["payload"];
  EXPECT_EQ(prog["responses_total"], 1);
  EXPECT_EQ(prog["items_total"], 6);
}

TEST_F(ApiTest, ExpiredReservationIsRejected) {
  ready_campaign(2, 1, 2);
  auto doc = parse(client("/serve", {{"user_id", "slow"}}))["payload"];
  clock_.advance(config_.reservation_ttl + 1);
  auto r = parse(client("/responses", {{"batch_id", doc["batch_id"]},
                                       {"responses", {{{"assignment_id", doc["tasks"][0]["assignment_id"]},
                                                       {"choice", "No"},
                                                       {"elapsed", 3}}}}}));
  EXPECT_EQ(r["payload"]["acks"][0]["status"], "ReservationExpired");
}

TEST_F(ApiTest, EndToEndExportAndReopen) {
  const auto id = ready_campaign(5, 2, 5);
  for (const char* user : {"a", "b"}) {
    auto doc = parse(client("/serve", {{"user_id", user}}))["payload"];
    json responses = json::array();
    for (const auto& t : doc["tasks"]) {
      responses.push_back({{"assignment_id", t["assignment_id"]}, {"choice", "Yes"}, {"elapsed", 1.2}});
    }
    client("/responses", {{"batch_id", doc["batch_id"]}, {"responses", responses}});
  }
  auto campaign = parse(call("GET", "/campaigns/" + id))["payload"];
  EXPECT_EQ(campaign["status"], "Complete");
  auto exp = call("GET", "/campaigns/" + id + "/export", nullptr, "practitioner-dev-token", {{"detail", "1"}});
  ASSERT_EQ(exp.status, 200);
  EXPECT_EQ(exp.content_type, "application/x-ndjson");
  int lines = 0;
  std::istringstream in(exp.body);
  for (std::string line; std::getline(in, line);) {
    auto rec = json::parse(line);
    EXPECT_EQ(rec["verdict"], "Yes");
    EXPECT_EQ(rec["responses"].size(), 2u);
    ++lines;
  }
  EXPECT_EQ(lines, 5);
  EXPECT_EQ(call("POST", "/campaigns/" + id + "/items/it-0/reopen", {{"extra", 1}}).status, 409);
  EXPECT_TRUE(parse(client("/serve", {{"user_id", "c"}}))["payload"]["no_tasks"].get<bool>());
}

TEST_F(ApiTest, UnpublishStopsServing) {
  const auto id = ready_campaign(3, 1, 1);
  EXPECT_EQ(call("POST", "/campaigns/" + id + "/unpublish").status, 200);
  EXPECT_TRUE(parse(client("/serve", {{"user_id", "u"}}))["payload"]["no_tasks"].get<bool>());
  EXPECT_EQ(parse(call("GET", "/campaigns"))["payload"].size(), 1u);
}

TEST_F(ApiTest, SweeperExpiresStaleReservations) {
  ready_campaign(2, 1, 2);
  auto doc = parse(client("/serve", {{"user_id", "u"}}))["payload"];
  platform_->start_sweeper(0.05);
  clock_.advance(config_.reservation_ttl + 5);
  const auto aid = doc["tasks"][0]["assignment_id"].get<std::string>();
  for (int i = 0; i < 100 && platform_->engine().assignment(aid)->state != AssignmentState::Expired; ++i) {
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
  platform_->stop_sweeper();
  EXPECT_EQ(platform_->engine().assignment(aid)->state, AssignmentState::Expired);
}

TEST(PlatformRecovery, RestartReplaysFileStore) {
  const auto dir = testing::scratch_dir("platform");
  ServiceConfig cfg;
  cfg.store_path = dir.string();
  cfg.compact_every = 7;
  ManualClock clock(100);
  json before;
  {
    Platform p(cfg, clock);
    auto ds = p.upload_dataset(serialize_manifest(testing::make_manifest(8)), "x");
    auto id = p.create_campaign(ds.dataset_id, testing::make_config(2, 3));
    p.publish(id);
    for (int u = 0; u < 5; ++u) {
      auto b = p.serve("u" + std::to_string(u));
      std::vector<Response> rs;
      for (const auto& t : b.tasks) rs.push_back({t.assignment_id, "No", 1.0, 0});
      p.submit(b.batch_id, rs);
    }
    before = p.engine().snapshot();
  }
  Platform again(cfg, clock);
  EXPECT_EQ(again.engine().snapshot(), before);
  EXPECT_TRUE(again.engine().audit().empty());
  std::filesystem::remove_all(dir);
}

TEST(ServiceConfigLoad, FileThenEnvironment) {
  const auto dir = testing::scratch_dir("cfg");
  const auto file = dir / "svc.json";
  std::ofstream(file) << R"({"listen":"0.0.0.0:9001","reservation_ttl":30,"alpha":0.01,"client_token":"c"})";
  std::map<std::string, std::string> env = {{"TASKAD_RESERVATION_TTL", "45"}, {"TASKAD_CLIENT_TOKEN", "env"}};
  auto getenv = [&](const char* k) -> const char* {
    auto it = env.find(k);
    return it == env.end() ? nullptr : it->second.c_str();
  };
  auto c = ServiceConfig::load(file.string(), getenv);
  EXPECT_EQ(c.host, "0.0.0.0");
  EXPECT_EQ(c.port, 9001);
  EXPECT_EQ(c.reservation_ttl, 45);
  EXPECT_EQ(c.alpha, 0.01);
  EXPECT_EQ(c.client_token, "env");
  env["TASKAD_ALPHA"] = "1.5";
  EXPECT_THROW(ServiceConfig::load(file.string(), getenv), Error);
  EXPECT_THROW(ServiceConfig::load((dir / "missing.json").string(), getenv), Error);
  std::filesystem::remove_all(dir);
}

TEST(HttpRoundTrip, ServeAndSubmitOverTheWire) {
  ServiceConfig cfg;
  SystemClock clock;
  Platform platform(cfg, clock);
  auto ds = platform.upload_dataset(serialize_manifest(testing::make_manifest(4)), "wire");
  platform.publish(platform.create_campaign(ds.dataset_id, testing::make_config(1, 4)));
  HttpServer server(platform);
  const int port = server.bind("127.0.0.1", 0);
  server.start();

  sdk::HttpTransport anon("127.0.0.1", port, "");
  EXPECT_EQ(anon.request("GET", "/health", "").status, 200);
  EXPECT_EQ(anon.request("POST", "/serve", R"({"user_id":"x"})").status, 401);

  sdk::HttpTransport transport("127.0.0.1", port, cfg.client_token);
  auto served = transport.request("POST", "/serve", R"({"user_id":"w"})");
  ASSERT_EQ(served.status, 200);
  auto doc = json::parse(served.body)["payload"];
  ASSERT_EQ(doc["tasks"].size(), 4u);
  json responses = json::array();
  for (const auto& t : doc["tasks"]) {
    responses.push_back({{"assignment_id", t["assignment_id"]}, {"choice", "Yes"}, {"elapsed", 0.7}});
  }
  auto sub = transport.request("POST", "/responses", json{{"batch_id", doc["batch_id"]}, {"responses", responses}}.dump());
  ASSERT_EQ(sub.status, 200);
  EXPECT_EQ(platform.engine().response_count(), 4u);
  server.stop();

  sdk::HttpTransport dead("127.0.0.1", port, cfg.client_token, 0.5);
  EXPECT_THROW(dead.request("GET", "/health", ""), sdk::TransportError);
}

}  // namespace
}  // namespace taskad::service
