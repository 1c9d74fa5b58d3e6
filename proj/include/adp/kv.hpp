// Copyright 2026 The ADP Lab Authors.
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
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace adp::kv {

// One `key = value` line of a configuration-style text file.
struct Entry {
  std::string key;
  std::string value;
  std::size_t line = 0;
};

// Blank lines and `#` comments are skipped; duplicate keys are rejected.
std::vector<Entry> parse(std::istream& in);

std::string trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);

// Strict number parsing: the whole (trimmed) string must be consumed.
double to_double(std::string_view s, std::size_t line);
std::uint64_t to_u64(std::string_view s, std::size_t line);
bool to_bool(std::string_view s, std::size_t line);
std::vector<double> to_doubles(std::string_view s, std::size_t line);
std::vector<std::uint64_t> to_u64s(std::string_view s, std::size_t line);

}  // namespace adp::kv
