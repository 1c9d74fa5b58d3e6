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


#include "adp/engine/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace adp::engine {

namespace {

constexpr std::array<char, 4> kMagic = {'A', 'D', 'P', '1'};
constexpr std::uint64_t kMaxRank = 16;
constexpr std::uint64_t kMaxName = 1 << 16;

void put_u64(std::ostream& out, std::uint64_t v) {
  std::array<char, 8> b;
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b.data(), 8);
}

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  std::uint64_t offset() const { return offset_; }

  bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }

  void bytes(char* dst, std::size_t n, const char* what) {
    in_.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) {
      throw FormatError(std::string("truncated checkpoint while reading ") + what,
                        offset_ + static_cast<std::uint64_t>(in_.gcount()));
    }
    offset_ += n;
  }

  std::uint64_t u64(const char* what) {
    std::array<unsigned char, 8> b;
    bytes(reinterpret_cast<char*>(b.data()), 8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
  }

 private:
  std::istream& in_;
  std::uint64_t offset_ = 0;
};

}  // namespace

void write_checkpoint(std::ostream& out, const NamedTensors& tensors) {
  out.write(kMagic.data(), kMagic.size());
  for (const auto& [name, t] : tensors) {
    put_u64(out, name.size());
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u64(out, t.rank());
    for (auto e : t.shape()) put_u64(out, e);
    for (double v : t.data()) put_u64(out, std::bit_cast<std::uint64_t>(v));
  }
}

NamedTensors read_checkpoint(std::istream& in) {
  Reader r(in);
  std::array<char, 4> magic;
  r.bytes(magic.data(), magic.size(), "magic");
  if (magic != kMagic) throw FormatError("bad checkpoint magic", 0);

  NamedTensors out;
  while (!r.at_end()) {
    const std::uint64_t start = r.offset();
    const std::uint64_t name_len = r.u64("name length");
    if (name_len == 0 || name_len > kMaxName) throw FormatError("invalid tensor name length", start);
    std::string name(name_len, '\0');
    r.bytes(name.data(), name_len, "name");
    const std::uint64_t rank_at = r.offset();
    const std::uint64_t rank = r.u64("rank");
    if (rank == 0 || rank > kMaxRank) throw FormatError("invalid rank for '" + name + "'", rank_at);
    Shape shape(rank);
    std::uint64_t count = 1;
    for (auto& e : shape) {
      const std::uint64_t at = r.offset();
      e = r.u64("extent");
      if (e == 0 || e > (std::uint64_t{1} << 40) / count) throw FormatError("invalid extent for '" + name + "'", at);
      count *= e;
    }
    std::vector<double> values(count);
    for (auto& v : values) v = std::bit_cast<double>(r.u64("values"));
    if (!out.emplace(name, Tensor(std::move(shape), std::move(values))).second) {
      throw FormatError("duplicate tensor '" + name + "'", start);
    }
  }
  return out;
}

void save_checkpoint(const std::filesystem::path& path, const NamedTensors& tensors) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open checkpoint for writing: " + path.string());
  write_checkpoint(out, tensors);
  out.flush();
  if (!out) throw IoError("failed writing checkpoint: " + path.string());
}

NamedTensors load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path.string());
  return read_checkpoint(in);
}

}  // namespace adp::engine
