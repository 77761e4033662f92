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

#include <cstddef>
#include <filesystem>
#include <mutex>
#include <optional>
#include <vector>

#include <json.hpp>

namespace taskad::store {

using json = nlohmann::json;

struct Recovered {
  std::optional<json> snapshot;
  std::vector<json> events;  // in append order
  std::size_t torn_records = 0;
};

/// Append-only event log with snapshot compaction. `append` returns only once
/// the event would survive a process kill.
class EventStore {
 public:
  virtual ~EventStore() = default;
  virtual void append(const json& event) = 0;
  virtual Recovered load() = 0;
  /// Persists `snapshot` and drops every logged event it covers.
  virtual void compact(const json& snapshot) = 0;
  virtual std::size_t events_since_compaction() const = 0;
};

class MemoryStore final : public EventStore {
 public:
  void append(const json& event) override;
  Recovered load() override;
  void compact(const json& snapshot) override;
  std::size_t events_since_compaction() const override;

 private:
  mutable std::mutex mu_;
  std::optional<json> snapshot_;
  std::vector<json> events_;
};

/// Directory-backed store: `events.log` (one JSON event per line) and
/// `snapshot.json`. A partially written last line is treated as never
/// written and trimmed on load.
class FileStore final : public EventStore {
 public:
  explicit FileStore(std::filesystem::path dir, bool fsync_each_append = false);
  ~FileStore() override;
  FileStore(const FileStore&) = delete;
  FileStore& operator=(const FileStore&) = delete;

  void append(const json& event) override;
  Recovered load() override;
  void compact(const json& snapshot) override;
  std::size_t events_since_compaction() const override;

  const std::filesystem::path& dir() const { return dir_; }

 private:
  void open_log();
  void write_all(const std::string& bytes);

  std::filesystem::path dir_;
  bool fsync_;
  int fd_ = -1;
  std::size_t since_compaction_ = 0;
  mutable std::mutex mu_;
};

}  // namespace taskad::store
