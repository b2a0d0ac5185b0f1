/*
 * Copyright 2026 The fairscarce Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "fairscarce/error.hpp"

namespace fairscarce {

const char* ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kOk: return "Ok";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kIo: return "Io";
    case ErrorCode::kEmptyFile: return "EmptyFile";
    case ErrorCode::kMissingColumn: return "MissingColumn";
    case ErrorCode::kMalformedRow: return "MalformedRow";
    case ErrorCode::kEmptyFit: return "EmptyFit";
    case ErrorCode::kUnknownCategory: return "UnknownCategory";
    case ErrorCode::kInsufficientRows: return "InsufficientRows";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kNonFiniteGradient: return "NonFiniteGradient";
    case ErrorCode::kDivergedTraining: return "DivergedTraining";
    case ErrorCode::kEmptyCalibration: return "EmptyCalibration";
    case ErrorCode::kDegenerateGroup: return "DegenerateGroup";
    case ErrorCode::kDegenerateCell: return "DegenerateCell";
    case ErrorCode::kNonFiniteCost: return "NonFiniteCost";
    case ErrorCode::kEmptySelection: return "EmptySelection";
    case ErrorCode::kConfig: return "Config";
    case ErrorCode::kFormat: return "Format";
    case ErrorCode::kInternal: return "Internal";
  }
  return "Unknown";
}

void Fail(ErrorCode code, const std::string& message) {
  throw Error(code, std::string(ErrorCodeName(code)) + ": " + message);
}

}  // namespace fairscarce
