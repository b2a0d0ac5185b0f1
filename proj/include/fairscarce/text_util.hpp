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

// Small text helpers shared by the file formats.

#ifndef FAIRSCARCE_TEXT_UTIL_HPP_
#define FAIRSCARCE_TEXT_UTIL_HPP_

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace fairscarce {

std::string ReadTextFile(const std::string& path);
void WriteTextFile(const std::string& path, std::string_view contents);

std::string_view Trim(std::string_view s);
std::vector<std::string> SplitString(std::string_view s, char delim);

// Strict parse: the whole token must be consumed.
std::optional<double> ParseDouble(std::string_view token);
std::optional<long long> ParseInt(std::string_view token);

// Shortest form that round-trips through strtod exactly.
std::string FormatExact(double value);
// Fixed precision for report tables.
std::string FormatFixed(double value, int digits = 6);

// key = value lines, '#' comments. Later keys override earlier ones.
std::vector<std::pair<std::string, std::string>> ParseKeyValues(
    std::string_view text);

}  // namespace fairscarce

#endif  // FAIRSCARCE_TEXT_UTIL_HPP_
