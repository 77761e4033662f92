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

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace taskad {

enum class ErrorCode {
  // manifest / domain
  DuplicateItemId,
  EmptyDataset,
  MalformedRecord,
  MissingPlaceholder,
  MultiplePlaceholders,
  IllegalTransition,
  InvalidConfig,
  // dissemination
  CampaignNotPublished,
  UnknownAssignment,
  AlreadyCompleted,
  ReservationExpired,
  QuotaFilled,
  InvalidResponse,
  UnknownBatch,
  UnknownItem,
  // consolidation
  TooManyResponses,
  EmptyInput,
  UnknownCampaign,
  UnknownDataset,
  // statistics
  EmptySample,
  InsufficientData,
  ZeroVariance,
  InsufficientGroups,
  // simulation
  InfeasibleCalibration,
  ConfigInvalid,
  ServiceUnreachable,
  // service
  ValidationFailed,
  StorageFailure,
  Unauthorized,
  Forbidden,
  NotFound,
  BadRequest,
};

std::string_view to_string(ErrorCode code);

/// The single exception type thrown across the library. `subject` names the
/// offending entity (an item id, a manifest line, an assignment id) when there
/// is one.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, std::string subject = {},
        std::optional<ErrorCode> cause = std::nullopt);

  ErrorCode code() const noexcept { return code_; }
  const std::string& subject() const noexcept { return subject_; }
  /// The wrapped domain error, for codes such as ValidationFailed.
  std::optional<ErrorCode> cause() const noexcept { return cause_; }

 private:
  ErrorCode code_;
  std::string subject_;
  std::optional<ErrorCode> cause_;
};

}  // namespace taskad
