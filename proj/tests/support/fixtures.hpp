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

#include <filesystem>
#include <random>
#include <string>

#include "taskad/model.hpp"

namespace taskad::testing {

/// n items cycling through a few classes; even items carry gold yes, odd gold no.
inline DatasetManifest make_manifest(int n, std::string name = "toy") {
  static const char* kClasses[] = {"Dog", "Boat", "Bird"};
  DatasetManifest m;
  m.name = std::move(name);
  for (int i = 0; i < n; ++i) {
    LabelItem item;
    item.item_id = "it-" + std::to_string(i);
    item.media_ref = "media/" + std::to_string(i) + ".jpg";
    item.class_name = kClasses[i % 3];
    item.gold = i % 2 == 0 ? Gold::Yes : Gold::No;
    m.items.push_back(std::move(item));
  }
  return m;
}

inline CampaignConfig make_config(int k, int batch) {
  CampaignConfig c;
  c.required_engagements = k;
  c.batch_size = batch;
  return c;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& tag) {
  static std::mt19937_64 rng(std::random_device{}());
  auto dir = std::filesystem::temp_directory_path() /
             ("taskad-" + tag + "-" + std::to_string(rng() % 1000000007));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace taskad::testing
