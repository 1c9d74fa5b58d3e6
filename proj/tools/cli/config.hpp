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
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

namespace adp::cli {

enum class ValueKind { kInt, kFloat, kBool, kString, kPath, kChoice, kIntList, kFloatList };

struct KeySpec {
  std::string key;
  ValueKind kind;
  std::string fallback;  // empty with required = true: must be supplied
  std::string choices;   // `|`-separated, for kChoice
  bool required = false;
};

// Every recognized configuration key.
const std::vector<KeySpec>& key_specs();

// Flat dotted-key configuration: file, then --set overrides, then ADP_SEED.
class ExperimentConfig {
 public:
  // Unknown keys and malformed values are rejected before anything runs.
  static ExperimentConfig load(const std::filesystem::path& path, const std::vector<std::string>& overrides,
                               const char* env_seed);

  std::uint64_t get_u64(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  const std::string& get_string(const std::string& key) const;
  std::vector<std::uint64_t> get_u64s(const std::string& key) const;
  std::vector<double> get_doubles(const std::string& key) const;

  void set(const std::string& key, const std::string& value, std::size_t line = 0);

  // Typed key/value object in key order.
  nlohmann::ordered_json to_json() const;
  // FNV-1a over the canonical `key=value` lines, excluding `out`.
  std::string hash() const;

  const std::filesystem::path& source() const noexcept { return source_; }

 private:
  std::filesystem::path source_;
  std::map<std::string, std::string> values_;
};

std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t h = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t v);
// Hash of a file's bytes; throws IoError naming the path when unreadable.
std::string file_hash(const std::filesystem::path& path);

}  // namespace adp::cli
