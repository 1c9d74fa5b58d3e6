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

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "adp/engine/tensor.hpp"
#include "adp/labeling.hpp"
#include "adp/random.hpp"

namespace adp::datasets {

// N labeled points in R^d.
struct Dataset {
  Tensor features;                  // (N, d)
  std::vector<std::size_t> labels;  // N class indices
  std::size_t num_classes = 0;
  std::size_t image_rows = 0;       // set for image data loaded from IDX
  std::size_t image_cols = 0;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t dim() const { return features.dim(1); }
};

// Throws unless features is (N, d) with N == labels.size() >= 1 and every
// label is below num_classes.
void validate(const Dataset& data);

struct MixtureMode {
  std::vector<double> center;
  std::size_t label = 0;
  double sigma = 1.0;
};

struct MixtureSpec {
  std::vector<MixtureMode> modes;
  std::size_t samples_per_mode = 0;
  std::uint64_t seed = 0;
  std::size_t num_classes = 0;  // 0: one more than the largest mode label
};

// Exactly samples_per_mode isotropic Gaussian draws per mode, mode by mode.
Dataset make_mixture(const MixtureSpec& spec);

// rows x cols grid of modes, spacing apart and centred on `offset`; mode k
// (row-major) carries class k.
MixtureSpec grid_mixture(std::size_t rows, std::size_t cols, double spacing, double sigma,
                         std::size_t samples_per_mode, std::uint64_t seed,
                         std::vector<double> offset = {0.0, 0.0});
// k modes evenly spaced on a circle; mode j carries class j.
MixtureSpec ring_mixture(std::size_t k, double radius, double sigma, std::size_t samples_per_mode,
                         std::uint64_t seed, std::vector<double> offset = {0.0, 0.0});

// Class of the nearest mode centre (lowest mode index on ties).
std::size_t nearest_mode_class(const MixtureSpec& spec, std::span<const double> x);
labeling::ClassOracle mixture_oracle(const MixtureSpec& spec);
// Class of the nearest per-class feature mean of `data`.
labeling::ClassOracle class_mean_oracle(const Dataset& data);

// Up to per_class random points of each class, for threshold calibration.
std::vector<std::vector<std::vector<double>>> calibration_sets(const Dataset& data, std::size_t per_class,
                                                               Rng& rng);

// Uniform-with-replacement minibatch.
struct Batch {
  Tensor x;  // (B, d)
  Tensor y;  // (B, m) one-hot
};
Batch sample_batch(const Dataset& data, std::size_t batch_size, Rng& rng);

// --- IDX (MNIST) files ---
// Images: u32 BE magic 0x00000803, count, rows, cols, then count*rows*cols
// bytes. Labels: u32 BE magic 0x00000801, count, then count bytes. Pixels are
// scaled to [0, 1] by 1/255.

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

Dataset parse_idx(std::span<const std::uint8_t> images, std::span<const std::uint8_t> labels,
                  std::size_t num_classes = 10);
Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
                 std::size_t num_classes = 10);

// Inverse of parse_idx for data whose pixels are multiples of 1/255.
std::vector<std::uint8_t> encode_idx_images(const Dataset& data);
std::vector<std::uint8_t> encode_idx_labels(const Dataset& data);

// --- generated pairs ---

struct LabeledPair {
  std::vector<double> x;
  std::vector<double> y;
};

// CSV with header x_0..x_{d-1},y_0..y_{m-1}; values printed round-trip exact.
void save_pairs(const std::filesystem::path& path, std::span<const LabeledPair> pairs, std::size_t dim,
                std::size_t num_classes);
std::vector<LabeledPair> load_pairs(const std::filesystem::path& path);

}  // namespace adp::datasets
