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

#include <memory>
#include <string>
#include <thread>

#include "taskad/platform.hpp"

namespace httplib {
class Server;
}

namespace taskad::service {

/// Binds Platform::handle to HTTP. Every route of the JSON API is served
/// through the same dispatcher.
class HttpServer {
 public:
  explicit HttpServer(Platform& platform);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds to host:port; port 0 picks a free port. Returns the bound port.
  int bind(const std::string& host, int port);
  /// Serves on a background thread.
  void start();
  /// Serves on the calling thread until stop().
  void run();
  void stop();

 private:
  Platform& platform_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
};

}  // namespace taskad::service
