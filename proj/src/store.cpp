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

#include "taskad/store.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>

#include "taskad/error.hpp"

namespace taskad::store {

namespace fs = std::filesystem;

void MemoryStore::append(const json& event) {
  std::lock_guard lock(mu_);
  events_.push_back(event);
}

Recovered MemoryStore::load() {
  std::lock_guard lock(mu_);
  return Recovered{snapshot_, events_, 0};
}

void MemoryStore::compact(const json& snapshot) {
  std::lock_guard lock(mu_);
  snapshot_ = snapshot;
  events_.clear();
}

std::size_t MemoryStore::events_since_compaction() const {
  std::lock_guard lock(mu_);
  return events_.size();
}

namespace {

[[noreturn]] void storage_failure(const std::string& what) {
  throw Error(ErrorCode::StorageFailure, what + ": " + std::strerror(errno));
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

FileStore::FileStore(fs::path dir, bool fsync_each_append)
    : dir_(std::move(dir)), fsync_(fsync_each_append) {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec) throw Error(ErrorCode::StorageFailure, "cannot create " + dir_.string() + ": " + ec.message());
}

FileStore::~FileStore() {
  if (fd_ >= 0) ::close(fd_);
}

void FileStore::open_log() {
  if (fd_ >= 0) return;
  fd_ = ::open((dir_ / "events.log").c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (fd_ < 0) storage_failure("open events.log");
}

void FileStore::write_all(const std::string& bytes) {
  const char* p = bytes.data();
  std::size_t left = bytes.size();
  while (left > 0) {
    ssize_t n = ::write(fd_, p, left);
    if (n < 0) {
      if (errno == EINTR) continue;
      storage_failure("write events.log");
    }
    p += n;
    left -= static_cast<std::size_t>(n);
  }
  if (fsync_ && ::fdatasync(fd_) != 0) storage_failure("fdatasync events.log");
}

void FileStore::append(const json& event) {
  std::lock_guard lock(mu_);
  open_log();
  write_all(event.dump() + "\n");
  ++since_compaction_;
}

Recovered FileStore::load() {
  std::lock_guard lock(mu_);
  Recovered out;
  const fs::path snap = dir_ / "snapshot.json";
  if (fs::exists(snap)) {
    json j = json::parse(read_file(snap), nullptr, false);
    if (j.is_discarded()) throw Error(ErrorCode::StorageFailure, "snapshot.json is corrupt");
    out.snapshot = std::move(j);
  }
  const fs::path log = dir_ / "events.log";
  if (!fs::exists(log)) return out;

  const std::string data = read_file(log);
  std::size_t pos = 0, valid_end = 0;
  while (pos < data.size()) {
    std::size_t nl = data.find('\n', pos);
    if (nl == std::string::npos) {
      ++out.torn_records;  // write interrupted before the newline
      break;
    }
    json ev = json::parse(std::string_view(data).substr(pos, nl - pos), nullptr, false);
    if (ev.is_discarded()) {
      if (data.find('\n', nl + 1) != std::string::npos) {
        throw Error(ErrorCode::StorageFailure, "corrupt record in events.log at byte " +
                                                   std::to_string(pos));
      }
      ++out.torn_records;
      break;
    }
    out.events.push_back(std::move(ev));
    pos = nl + 1;
    valid_end = pos;
  }
  if (valid_end < data.size()) {
    if (fd_ >= 0) {
      ::close(fd_);
      fd_ = -1;
    }
    fs::resize_file(log, valid_end);
  }
  since_compaction_ = out.events.size();
  return out;
}

void FileStore::compact(const json& snapshot) {
  std::lock_guard lock(mu_);
  const fs::path tmp = dir_ / "snapshot.json.tmp";
  {
    int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
    if (fd < 0) storage_failure("open snapshot.json.tmp");
    const std::string bytes = snapshot.dump();
    const char* p = bytes.data();
    std::size_t left = bytes.size();
    while (left > 0) {
      ssize_t n = ::write(fd, p, left);
      if (n < 0) {
        if (errno == EINTR) continue;
        ::close(fd);
        storage_failure("write snapshot");
      }
      p += n;
      left -= static_cast<std::size_t>(n);
    }
    ::fsync(fd);
    ::close(fd);
  }
  fs::rename(tmp, dir_ / "snapshot.json");
  // A crash between rename and truncate leaves covered events in the log;
  // replay skips them by version.
  open_log();
  if (::ftruncate(fd_, 0) != 0) storage_failure("truncate events.log");
  since_compaction_ = 0;
}

std::size_t FileStore::events_since_compaction() const {
  std::lock_guard lock(mu_);
  return since_compaction_;
}

}  // namespace taskad::store
