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

#include "taskad/error.hpp"

namespace taskad {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DuplicateItemId: return "DuplicateItemId";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::MalformedRecord: return "MalformedRecord";
    case ErrorCode::MissingPlaceholder: return "MissingPlaceholder";
    case ErrorCode::MultiplePlaceholders: return "MultiplePlaceholders";
    case ErrorCode::IllegalTransition: return "IllegalTransition";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::CampaignNotPublished: return "CampaignNotPublished";
    case ErrorCode::UnknownAssignment: return "UnknownAssignment";
    case ErrorCode::AlreadyCompleted: return "AlreadyCompleted";
    case ErrorCode::ReservationExpired: return "ReservationExpired";
    case ErrorCode::QuotaFilled: return "QuotaFilled";
    case ErrorCode::InvalidResponse: return "InvalidResponse";
    case ErrorCode::UnknownBatch: return "UnknownBatch";
    case ErrorCode::UnknownItem: return "UnknownItem";
    case ErrorCode::TooManyResponses: return "TooManyResponses";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::UnknownCampaign: return "UnknownCampaign";
    case ErrorCode::UnknownDataset: return "UnknownDataset";
    case ErrorCode::EmptySample: return "EmptySample";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::ZeroVariance: return "ZeroVariance";
    case ErrorCode::InsufficientGroups: return "InsufficientGroups";
    case ErrorCode::InfeasibleCalibration: return "InfeasibleCalibration";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::ServiceUnreachable: return "ServiceUnreachable";
    case ErrorCode::ValidationFailed: return "ValidationFailed";
    case ErrorCode::StorageFailure: return "StorageFailure";
    case ErrorCode::Unauthorized: return "Unauthorized";
    case ErrorCode::Forbidden: return "Forbidden";
    case ErrorCode::NotFound: return "NotFound";
    case ErrorCode::BadRequest: return "BadRequest";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message, std::string subject,
             std::optional<ErrorCode> cause)
    : std::runtime_error(std::string(to_string(code)) + ": " + message),
      code_(code),
      subject_(std::move(subject)),
      cause_(cause) {}

}  // namespace taskad
