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


#include "adp/engine/layers.hpp"

#include <cmath>

namespace adp::engine {

void init_dense(ParameterSet& params, const std::string& prefix, std::size_t in, std::size_t out,
                Rng& rng) {
  std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / static_cast<double>(in + out)));
  Tensor w({in, out});
  for (double& v : w.data()) v = normal(rng);
  params[prefix + ".W"] = std::move(w);
  params[prefix + ".b"] = Tensor({out}, 0.0);
}

void init_prelu(ParameterSet& params, const std::string& prefix, std::size_t features) {
  params[prefix + ".slope"] = Tensor({features}, kPReluInitialSlope);
}

void init_batch_norm(ParameterSet& params, NamedTensors& buffers, const std::string& prefix,
                     std::size_t features) {
  params[prefix + ".gamma"] = Tensor({features}, 1.0);
  params[prefix + ".beta"] = Tensor({features}, 0.0);
  buffers[prefix + ".running_mean"] = Tensor({features}, 0.0);
  buffers[prefix + ".running_var"] = Tensor({features}, 1.0);
}

NodeId dense(Graph& g, const ParameterSet& params, const std::string& prefix, NodeId x) {
  return g.affine(x, g.parameter(prefix + ".W", params.at(prefix + ".W")),
                  g.parameter(prefix + ".b", params.at(prefix + ".b")));
}

NodeId prelu(Graph& g, const ParameterSet& params, const std::string& prefix, NodeId x) {
  return g.prelu(x, g.parameter(prefix + ".slope", params.at(prefix + ".slope")));
}

NodeId batch_norm(Graph& g, const ParameterSet& params, NamedTensors* buffers,
                  const NamedTensors& stats, const std::string& prefix, NodeId x) {
  const Tensor& mean = stats.at(prefix + ".running_mean");
  const Tensor& var = stats.at(prefix + ".running_var");
  const Tensor& xv = g.value(x);
  if (buffers && g.mode() == Mode::kTraining && xv.rank() == 2 && xv.dim(0) > 1 &&
      xv.dim(1) == mean.size()) {
    const std::size_t rows = xv.dim(0), f = xv.dim(1);
    Tensor& rm = buffers->at(prefix + ".running_mean");
    Tensor& rv = buffers->at(prefix + ".running_var");
    for (std::size_t c = 0; c < f; ++c) {
      double mu = 0.0;
      for (std::size_t r = 0; r < rows; ++r) mu += xv.at(r, c);
      mu /= static_cast<double>(rows);
      double var_unbiased = 0.0;
      for (std::size_t r = 0; r < rows; ++r) var_unbiased += (xv.at(r, c) - mu) * (xv.at(r, c) - mu);
      var_unbiased /= static_cast<double>(rows - 1);
      rm[c] = (1.0 - kBatchNormMomentum) * rm[c] + kBatchNormMomentum * mu;
      rv[c] = (1.0 - kBatchNormMomentum) * rv[c] + kBatchNormMomentum * var_unbiased;
    }
  }
  // Running statistics enter as constants; inference mode reads them.
  return g.batch_norm(x, g.parameter(prefix + ".gamma", params.at(prefix + ".gamma")),
                      g.parameter(prefix + ".beta", params.at(prefix + ".beta")), g.constant(mean),
                      g.constant(var));
}

}  // namespace adp::engine
