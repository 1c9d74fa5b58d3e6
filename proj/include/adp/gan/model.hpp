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
#include <string>
#include <vector>

#include "adp/engine/graph.hpp"

namespace adp::gan {

using engine::Graph;
using engine::NamedTensors;
using engine::NodeId;
using engine::ParameterSet;

// Layer widths. data_dims holds one entry per image head (two for
// dual-domain models).
struct ModelShape {
  std::vector<std::size_t> data_dims{2};
  std::size_t num_classes = 2;
  std::size_t num_lfs = 1;
  std::size_t latent_dim = 64;
  std::size_t common_width = 128;
  std::size_t common_layers = 3;
  std::size_t image_width = 128;
  std::size_t param_width = 128;
  std::size_t disc_width = 64;
  std::size_t dlfb_width = 64;

  std::size_t domains() const noexcept { return data_dims.size(); }
  void validate() const;
};

// Parameter blocks, keyed by the name prefix before the first '.':
//   g_common, g_image<h>, g_param, d<h>, d_lfb
enum class Block { kGCommon, kGImage, kGParameter, kDiscriminator, kDLfb };

Block block_of(const std::string& parameter_name);
bool is_generator(Block b);
// Domain index of a g_image<h> / d<h> parameter.
std::size_t domain_of(const std::string& parameter_name);

// Heads to build; skipped heads leave their node ids unset.
struct GeneratorParts {
  bool images = true;
  bool phi = true;
};

struct GeneratorNodes {
  std::vector<NodeId> images;  // (B, d_h) per domain; empty when skipped
  NodeId theta = 0;            // (B, n), softplus > 0
  NodeId phi = 0;              // (B, n, n), sigmoid in (0, 1)
  NodeId phi_flat = 0;         // (B, n*n)
};

struct DiscriminatorNodes {
  NodeId s_image = 0;  // (B, 1)
  NodeId s_label = 0;  // (B, 1)
};

// Generator G (G_common, G_image heads, G_parameter), joint discriminators
// D (one per domain: uncoupled image and label stems feeding a shared trunk
// with two sigmoid heads) and the dependency discriminator D_LFB.
class AdpModel {
 public:
  AdpModel(ModelShape shape, std::uint64_t seed);

  const ModelShape& shape() const noexcept { return shape_; }
  ParameterSet& params() noexcept { return params_; }
  const ParameterSet& params() const noexcept { return params_; }
  NamedTensors& buffers() noexcept { return buffers_; }
  const NamedTensors& buffers() const noexcept { return buffers_; }

  // Leaves the batch-norm running statistics untouched.
  GeneratorNodes build_generator(Graph& g, NodeId z, GeneratorParts parts = {}) const;
  // Same network; in training mode the running statistics are updated from
  // this batch.
  GeneratorNodes build_generator_tracking(Graph& g, NodeId z, GeneratorParts parts = {});
  DiscriminatorNodes build_discriminator(Graph& g, std::size_t domain, NodeId x, NodeId y) const;
  // phi_flat: (B, n*n) -> (B, 1)
  NodeId build_dlfb(Graph& g, NodeId phi_flat) const;

  // Parameters, buffers and shape, for checkpoints.
  NamedTensors export_tensors() const;
  static AdpModel from_tensors(const NamedTensors& tensors);

 private:
  GeneratorNodes generator_impl(Graph& g, NodeId z, NamedTensors* stats_sink, GeneratorParts parts) const;

  ModelShape shape_;
  ParameterSet params_;
  NamedTensors buffers_;
};

struct GeneratorOutput {
  std::vector<Tensor> images;  // (B, d_h)
  Tensor theta;                // (B, n)
  Tensor phi;                  // (B, n, n)
};

GeneratorOutput generator_forward(const AdpModel& model, const Tensor& z,
                                  engine::Mode mode = engine::Mode::kTraining);

struct DiscriminatorOutput {
  std::vector<double> s_image;
  std::vector<double> s_label;
};

DiscriminatorOutput discriminator_forward(const AdpModel& model, const Tensor& x, const Tensor& y,
                                          std::size_t domain = 0);

// Score of a single n x n matrix.
double dlfb_forward(const AdpModel& model, const Tensor& phi);

}  // namespace adp::gan
