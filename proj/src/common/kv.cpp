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


#include "adp/kv.hpp"

#include <charconv>
#include <istream>
#include <set>

#include "adp/error.hpp"

namespace adp::kv {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? s.npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::vector<Entry> parse(std::istream& in) {
  std::vector<Entry> out;
  std::set<std::string> seen;
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    const std::string text = trim(raw);
    if (text.empty()) continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos) throw ParseError("expected 'key = value', got '" + text + "'", line);
    Entry e{trim(std::string_view(text).substr(0, eq)), trim(std::string_view(text).substr(eq + 1)), line};
    if (e.key.empty()) throw ParseError("empty key", line);
    if (!seen.insert(e.key).second) throw ParseError("duplicate key '" + e.key + "'", line);
    out.push_back(std::move(e));
  }
  return out;
}

double to_double(std::string_view s, std::size_t line) {
  const std::string t = trim(s);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size()) {
    throw ParseError("not a number: '" + t + "'", line);
  }
  return v;
}

std::uint64_t to_u64(std::string_view s, std::size_t line) {
  const std::string t = trim(s);
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size()) {
    throw ParseError("not a non-negative integer: '" + t + "'", line);
  }
  return v;
}

bool to_bool(std::string_view s, std::size_t line) {
  const std::string t = trim(s);
  if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
  if (t == "false" || t == "0" || t == "no" || t == "off") return false;
  throw ParseError("not a boolean: '" + t + "'", line);
}

std::vector<double> to_doubles(std::string_view s, std::size_t line) {
  std::vector<double> out;
  for (const auto& part : split(s, ',')) out.push_back(to_double(part, line));
  return out;
}

std::vector<std::uint64_t> to_u64s(std::string_view s, std::size_t line) {
  std::vector<std::uint64_t> out;
  for (const auto& part : split(s, ',')) out.push_back(to_u64(part, line));
  return out;
}

}  // namespace adp::kv
