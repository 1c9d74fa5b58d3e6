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
#include <map>
#include <string>

#include "adp/engine/graph.hpp"

namespace adp::engine {

// Adaptive moment estimation. A "momentum factor" of 0.5 maps to beta1.
struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class Adam {
 public:
  explicit Adam(AdamConfig config = {});

  const AdamConfig& config() const noexcept { return config_; }
  void set_learning_rate(double lr) { config_.learning_rate = lr; }

  // Bias-corrected update of every parameter that has a gradient entry.
  // Gradients that are identically zero leave both the parameter and its
  // moments untouched. Throws before mutating anything if a gradient is
  // non-finite or mis-shaped.
  void step(ParameterSet& params, const Gradients& grads);

  std::uint64_t steps() const noexcept { return steps_; }

  // Moments and counters as named tensors under `prefix`, for checkpoints.
  void export_state(NamedTensors& out, const std::string& prefix) const;
  void import_state(const NamedTensors& in, const std::string& prefix);

 private:
  struct Slot {
    Tensor m;
    Tensor v;
    std::uint64_t t = 0;
  };

  AdamConfig config_;
  std::map<std::string, Slot> slots_;
  std::uint64_t steps_ = 0;
};

}  // namespace adp::engine
