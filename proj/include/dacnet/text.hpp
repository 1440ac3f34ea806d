// Copyright 2026 The DACNet Toolkit Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

// Small string helpers shared by the file-format readers.
namespace dacnet {

std::string_view trim(std::string_view s);
void strip_cr(std::string& line);
std::vector<std::string_view> split(std::string_view s, char sep);
// Comma-separated fields; double-quoted fields may contain commas and "".
std::vector<std::string> split_csv_line(std::string_view line);

// Shortest representation that parses back to the same double.
std::string format_double(double v);
std::optional<double> parse_double(std::string_view s);
std::optional<std::uint64_t> parse_uint64(std::string_view s);
std::optional<std::int64_t> parse_int64(std::string_view s);

// FNV-1a, 64-bit; used for fingerprints and config hashes.
std::uint64_t fnv1a64(std::string_view data);
std::string hex64(std::uint64_t v);

}  // namespace dacnet
