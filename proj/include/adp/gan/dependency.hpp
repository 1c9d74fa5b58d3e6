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

#include "adp/engine/tensor.hpp"
#include "adp/gan/model.hpp"
#include "adp/lfb.hpp"

namespace adp::gan {

struct DependencyConfig {
  std::size_t steps = 500;
  std::size_t batch_size = 32;
  double learning_rate = 1e-4;
  double beta1 = 0.5;
  std::uint64_t seed = 0;
  // Widths of G_common, G_parameter and D_LFB. data_dims, num_classes and
  // num_lfs are taken from the label data.
  ModelShape shape;
};

// Adversarial dependency estimation from label matrices alone: G_common and
// G_parameter emit (Θ, Φ), D_LFB compares Φ with the Φ_real of a sampled
// batch of label matrices. Each step is one D_LFB update and one generator
// update. Returns the batch-mean Θ and Φ of a final latent batch together
// with Φ_real of the whole data set.
lfb::DependencyState estimate_dependencies(const Tensor& lambdas, const DependencyConfig& config);

}  // namespace adp::gan
