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

#include <algorithm>
#include <atomic>
#include <chrono>

namespace taskad {

/// UTC seconds since the Unix epoch, sub-second precision.
using Timestamp = double;

class Clock {
 public:
  virtual ~Clock() = default;
  virtual Timestamp now() const = 0;
};

class SystemClock final : public Clock {
 public:
  Timestamp now() const override {
    using namespace std::chrono;
    return duration<double>(system_clock::now().time_since_epoch()).count();
  }
};

/// Virtual clock for simulation and tests. Time only moves forward.
class ManualClock final : public Clock {
 public:
  explicit ManualClock(Timestamp start = 0.0) : now_(start) {}

  Timestamp now() const override { return now_.load(); }
  void advance(double seconds) { set(now_.load() + std::max(0.0, seconds)); }
  void set(Timestamp t) {
    Timestamp cur = now_.load();
    while (t > cur && !now_.compare_exchange_weak(cur, t)) {
    }
  }

 private:
  std::atomic<Timestamp> now_;
};

}  // namespace taskad
