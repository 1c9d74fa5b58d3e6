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

#include <string>

#include "adp/engine/graph.hpp"
#include "adp/random.hpp"

namespace adp::engine {

// Building blocks shared by every network. Parameters live in a
// ParameterSet under "<prefix>.<field>"; batch-norm running statistics live
// in a separate buffer set so optimizers never see them.

inline constexpr double kPReluInitialSlope = 0.25;
inline constexpr double kBatchNormMomentum = 0.1;

// W (in x out) drawn from N(0, 2 / (in + out)), b = 0.
void init_dense(ParameterSet& params, const std::string& prefix, std::size_t in, std::size_t out,
                Rng& rng);
void init_prelu(ParameterSet& params, const std::string& prefix, std::size_t features);
void init_batch_norm(ParameterSet& params, NamedTensors& buffers, const std::string& prefix,
                     std::size_t features);

NodeId dense(Graph& g, const ParameterSet& params, const std::string& prefix, NodeId x);
NodeId prelu(Graph& g, const ParameterSet& params, const std::string& prefix, NodeId x);

// In training mode with `buffers` non-null, the running statistics are
// updated from this batch before the node is recorded.
NodeId batch_norm(Graph& g, const ParameterSet& params, NamedTensors* buffers,
                  const NamedTensors& stats, const std::string& prefix, NodeId x);

}  // namespace adp::engine
