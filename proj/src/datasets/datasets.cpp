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


#include "adp/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <limits>
#include <numbers>

#include "adp/error.hpp"
#include "adp/kv.hpp"

namespace adp::datasets {

void validate(const Dataset& data) {
  if (data.features.rank() != 2) throw ShapeError("dataset features must be (N, d)");
  if (data.labels.empty()) throw InvalidArgument("dataset is empty");
  if (data.features.dim(0) != data.labels.size()) throw ShapeError("dataset has mismatched feature and label counts");
  for (auto y : data.labels) {
    if (y >= data.num_classes) throw InvalidArgument("dataset label out of range");
  }
}

Dataset make_mixture(const MixtureSpec& spec) {
  if (spec.modes.empty()) throw InvalidArgument("mixture needs at least one mode");
  if (spec.samples_per_mode == 0) throw InvalidArgument("mixture needs samples_per_mode >= 1");
  const std::size_t d = spec.modes.front().center.size();
  std::size_t classes = spec.num_classes;
  std::size_t max_label = 0;
  for (const auto& mode : spec.modes) {
    if (mode.center.size() != d || d == 0) throw InvalidArgument("mixture modes disagree on dimensionality");
    if (!(mode.sigma > 0.0)) throw InvalidArgument("mixture sigma must be positive");
    max_label = std::max(max_label, mode.label);
  }
  if (classes == 0) classes = max_label + 1;
  if (max_label >= classes) throw InvalidArgument("mixture label outside {0..m-1}");

  Rng rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::size_t total = spec.modes.size() * spec.samples_per_mode;
  Dataset out{Tensor({total, d}), {}, classes};
  out.labels.reserve(total);
  std::size_t r = 0;
  for (const auto& mode : spec.modes) {
    for (std::size_t s = 0; s < spec.samples_per_mode; ++s, ++r) {
      for (std::size_t j = 0; j < d; ++j) out.features.at(r, j) = mode.center[j] + mode.sigma * normal(rng);
      out.labels.push_back(mode.label);
    }
  }
  return out;
}

MixtureSpec grid_mixture(std::size_t rows, std::size_t cols, double spacing, double sigma,
                         std::size_t samples_per_mode, std::uint64_t seed, std::vector<double> offset) {
  if (offset.size() != 2) throw InvalidArgument("grid offset must be 2-dimensional");
  MixtureSpec spec{{}, samples_per_mode, seed, rows * cols};
  const double r0 = (static_cast<double>(rows) - 1.0) / 2.0;
  const double c0 = (static_cast<double>(cols) - 1.0) / 2.0;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      spec.modes.push_back({{offset[0] + (static_cast<double>(c) - c0) * spacing,
                             offset[1] + (static_cast<double>(r) - r0) * spacing},
                            r * cols + c, sigma});
    }
  }
  return spec;
}

MixtureSpec ring_mixture(std::size_t k, double radius, double sigma, std::size_t samples_per_mode,
                         std::uint64_t seed, std::vector<double> offset) {
  if (offset.size() != 2) throw InvalidArgument("ring offset must be 2-dimensional");
  MixtureSpec spec{{}, samples_per_mode, seed, k};
  for (std::size_t j = 0; j < k; ++j) {
    const double a = 2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(k);
    spec.modes.push_back({{offset[0] + radius * std::cos(a), offset[1] + radius * std::sin(a)}, j, sigma});
  }
  return spec;
}

std::size_t nearest_mode_class(const MixtureSpec& spec, std::span<const double> x) {
  double best = std::numeric_limits<double>::infinity();
  std::size_t label = 0;
  for (const auto& mode : spec.modes) {
    if (mode.center.size() != x.size()) throw ShapeError("point dimensionality does not match the mixture");
    double d2 = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) d2 += (x[j] - mode.center[j]) * (x[j] - mode.center[j]);
    if (d2 < best) {
      best = d2;
      label = mode.label;
    }
  }
  return label;
}

labeling::ClassOracle mixture_oracle(const MixtureSpec& spec) {
  return [spec](labeling::FeatureVector x) { return nearest_mode_class(spec, x); };
}

labeling::ClassOracle class_mean_oracle(const Dataset& data) {
  validate(data);
  const std::size_t d = data.dim();
  MixtureSpec means{{}, 1, 0, data.num_classes};
  std::vector<std::vector<double>> sums(data.num_classes, std::vector<double>(d, 0.0));
  std::vector<std::size_t> counts(data.num_classes, 0);
  for (std::size_t r = 0; r < data.size(); ++r) {
    const auto row = data.features.row(r);
    for (std::size_t j = 0; j < d; ++j) sums[data.labels[r]][j] += row[j];
    ++counts[data.labels[r]];
  }
  for (std::size_t c = 0; c < data.num_classes; ++c) {
    if (counts[c] == 0) continue;
    for (double& v : sums[c]) v /= static_cast<double>(counts[c]);
    means.modes.push_back({sums[c], c, 1.0});
  }
  return mixture_oracle(means);
}

std::vector<std::vector<std::vector<double>>> calibration_sets(const Dataset& data, std::size_t per_class,
                                                               Rng& rng) {
  validate(data);
  std::vector<std::vector<std::size_t>> by_class(data.num_classes);
  for (std::size_t r = 0; r < data.size(); ++r) by_class[data.labels[r]].push_back(r);
  std::vector<std::vector<std::vector<double>>> out(data.num_classes);
  for (std::size_t c = 0; c < data.num_classes; ++c) {
    auto& idx = by_class[c];
    std::shuffle(idx.begin(), idx.end(), rng);
    if (idx.size() > per_class) idx.resize(per_class);
    for (auto r : idx) {
      const auto row = data.features.row(r);
      out[c].emplace_back(row.begin(), row.end());
    }
  }
  return out;
}

Batch sample_batch(const Dataset& data, std::size_t batch_size, Rng& rng) {
  const std::size_t d = data.dim();
  Batch b{Tensor({batch_size, d}), Tensor({batch_size, data.num_classes}, 0.0)};
  std::uniform_int_distribution<std::size_t> pick(0, data.size() - 1);
  for (std::size_t i = 0; i < batch_size; ++i) {
    const std::size_t r = pick(rng);
    std::copy_n(data.features.row(r).begin(), d, b.x.row(i).begin());
    b.y.at(i, data.labels[r]) = 1.0;
  }
  return b;
}

namespace {

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t offset, const char* what) {
  if (bytes.size() < offset + 4) {
    throw FormatError(std::string("truncated IDX header (") + what + ")", bytes.size());
  }
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>((v >> s) & 0xff));
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace

Dataset parse_idx(std::span<const std::uint8_t> images, std::span<const std::uint8_t> labels,
                  std::size_t num_classes) {
  if (read_be32(images, 0, "image magic") != kIdxImageMagic) throw FormatError("bad IDX image magic", 0);
  const std::uint32_t count = read_be32(images, 4, "image count");
  const std::uint32_t rows = read_be32(images, 8, "rows");
  const std::uint32_t cols = read_be32(images, 12, "cols");
  if (count == 0 || rows == 0 || cols == 0) throw FormatError("IDX image file declares an empty payload", 4);
  const std::size_t pixels = std::size_t{rows} * cols;
  const std::size_t expected = 16 + std::size_t{count} * pixels;
  if (images.size() < expected) throw FormatError("truncated IDX image payload", images.size());
  if (images.size() > expected) throw FormatError("trailing bytes after IDX image payload", expected);

  if (read_be32(labels, 0, "label magic") != kIdxLabelMagic) throw FormatError("bad IDX label magic", 0);
  const std::uint32_t label_count = read_be32(labels, 4, "label count");
  if (label_count != count) throw FormatError("IDX label count does not match image count", 4);
  if (labels.size() < 8 + std::size_t{count}) throw FormatError("truncated IDX label payload", labels.size());
  if (labels.size() > 8 + std::size_t{count}) throw FormatError("trailing bytes after IDX label payload", 8 + count);

  Dataset out{Tensor({count, pixels}), {}, num_classes, rows, cols};
  for (std::size_t i = 0; i < std::size_t{count} * pixels; ++i) out.features[i] = images[16 + i] / 255.0;
  out.labels.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t y = labels[8 + i];
    if (y >= num_classes) throw FormatError("IDX label out of range", 8 + i);
    out.labels.push_back(y);
  }
  return out;
}

Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
                 std::size_t num_classes) {
  const auto images = read_file(images_path);
  const auto labels = read_file(labels_path);
  return parse_idx(images, labels, num_classes);
}

std::vector<std::uint8_t> encode_idx_images(const Dataset& data) {
  validate(data);
  if (data.image_rows * data.image_cols != data.dim()) throw ShapeError("dataset has no image geometry");
  std::vector<std::uint8_t> out;
  out.reserve(16 + data.features.size());
  put_be32(out, kIdxImageMagic);
  put_be32(out, static_cast<std::uint32_t>(data.size()));
  put_be32(out, static_cast<std::uint32_t>(data.image_rows));
  put_be32(out, static_cast<std::uint32_t>(data.image_cols));
  for (double v : data.features.data()) {
    out.push_back(static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)));
  }
  return out;
}

std::vector<std::uint8_t> encode_idx_labels(const Dataset& data) {
  validate(data);
  std::vector<std::uint8_t> out;
  put_be32(out, kIdxLabelMagic);
  put_be32(out, static_cast<std::uint32_t>(data.size()));
  for (auto y : data.labels) out.push_back(static_cast<std::uint8_t>(y));
  return out;
}

void save_pairs(const std::filesystem::path& path, std::span<const LabeledPair> pairs, std::size_t dim,
                std::size_t num_classes) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (std::size_t j = 0; j < dim; ++j) out << (j ? "," : "") << "x_" << j;
  for (std::size_t k = 0; k < num_classes; ++k) out << (dim + k ? "," : "") << "y_" << k;
  out << '\n';
  char buf[32];
  for (const auto& p : pairs) {
    if (p.x.size() != dim || p.y.size() != num_classes) throw ShapeError("pair does not match the CSV layout");
    bool first = true;
    for (const auto* vec : {&p.x, &p.y}) {
      for (double v : *vec) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        out << (first ? "" : ",") << buf;
        first = false;
      }
    }
    out << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

std::vector<LabeledPair> load_pairs(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ParseError("missing pairs header", 1);
  std::size_t dim = 0, classes = 0;
  for (const auto& col : kv::split(line, ',')) {
    if (col.starts_with("x_") && classes == 0) {
      ++dim;
    } else if (col.starts_with("y_")) {
      ++classes;
    } else {
      throw ParseError("unexpected pairs column '" + col + "'", 1);
    }
  }
  std::vector<LabeledPair> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (kv::trim(line).empty()) continue;
    const auto cells = kv::split(line, ',');
    if (cells.size() != dim + classes) {
      throw ParseError("expected " + std::to_string(dim + classes) + " fields, got " + std::to_string(cells.size()),
                       lineno);
    }
    LabeledPair p;
    for (std::size_t j = 0; j < dim; ++j) p.x.push_back(kv::to_double(cells[j], lineno));
    for (std::size_t k = 0; k < classes; ++k) p.y.push_back(kv::to_double(cells[dim + k], lineno));
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace adp::datasets
