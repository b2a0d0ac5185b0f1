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

#ifndef FAIRSCARCE_ERROR_HPP_
#define FAIRSCARCE_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace fairscarce {

// Numeric values are shared with the C API (fs_status in fairscarce.h).
enum class ErrorCode : int {
  kOk = 0,
  kInvalidArgument = 1,
  kIo = 2,
  kEmptyFile = 3,
  kMissingColumn = 4,
  kMalformedRow = 5,
  kEmptyFit = 6,
  kUnknownCategory = 7,
  kInsufficientRows = 8,
  kShapeMismatch = 9,
  kNonFiniteGradient = 10,
  kDivergedTraining = 11,
  kEmptyCalibration = 12,
  kDegenerateGroup = 13,
  kDegenerateCell = 14,
  kNonFiniteCost = 15,
  kEmptySelection = 16,
  kConfig = 17,
  kFormat = 18,
  kInternal = 99,
};

const char* ErrorCodeName(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void Fail(ErrorCode code, const std::string& message);

}  // namespace fairscarce

#endif  // FAIRSCARCE_ERROR_HPP_
