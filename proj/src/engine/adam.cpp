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


#include "adp/engine/adam.hpp"

#include <cmath>

namespace adp::engine {

Adam::Adam(AdamConfig config) : config_(config) {
  if (!(config_.beta1 > 0.0 && config_.beta1 < 1.0) || !(config_.beta2 > 0.0 && config_.beta2 < 1.0)) {
    throw InvalidArgument("Adam decay factors must lie in (0, 1)");
  }
  if (!(config_.learning_rate > 0.0) || !(config_.epsilon > 0.0)) {
    throw InvalidArgument("Adam learning rate and epsilon must be positive");
  }
}

void Adam::step(ParameterSet& params, const Gradients& grads) {
  for (const auto& [name, g] : grads) {
    auto it = params.find(name);
    if (it == params.end()) throw InvalidArgument("Adam: gradient for unknown parameter '" + name + "'");
    if (it->second.shape() != g.shape()) {
      throw ShapeError("Adam: gradient shape " + shape_str(g.shape()) + " does not match parameter '" +
                       name + "' " + shape_str(it->second.shape()));
    }
    if (!g.all_finite()) throw NumericError("Adam: non-finite gradient for '" + name + "'");
  }

  const auto& c = config_;
  for (const auto& [name, g] : grads) {
    if (g.all_zero()) continue;
    Tensor& p = params.at(name);
    Slot& slot = slots_[name];
    if (slot.t == 0) {
      slot.m = Tensor(p.shape(), 0.0);
      slot.v = Tensor(p.shape(), 0.0);
    }
    ++slot.t;
    const double t = static_cast<double>(slot.t);
    const double bc1 = 1.0 - std::pow(c.beta1, t);
    const double bc2 = 1.0 - std::pow(c.beta2, t);
    double* pp = p.data().data();
    double* mm = slot.m.data().data();
    double* vv = slot.v.data().data();
    const double* gg = g.data().data();
    for (std::size_t i = 0, size = p.size(); i < size; ++i) {
      mm[i] = c.beta1 * mm[i] + (1.0 - c.beta1) * gg[i];
      vv[i] = c.beta2 * vv[i] + (1.0 - c.beta2) * gg[i] * gg[i];
      pp[i] -= c.learning_rate * (mm[i] / bc1) / (std::sqrt(vv[i] / bc2) + c.epsilon);
    }
  }
  ++steps_;
}

void Adam::export_state(NamedTensors& out, const std::string& prefix) const {
  out[prefix + "#steps"] = Tensor::scalar(static_cast<double>(steps_));
  for (const auto& [name, slot] : slots_) {
    out[prefix + "#m:" + name] = slot.m;
    out[prefix + "#v:" + name] = slot.v;
    out[prefix + "#t:" + name] = Tensor::scalar(static_cast<double>(slot.t));
  }
}

void Adam::import_state(const NamedTensors& in, const std::string& prefix) {
  slots_.clear();
  steps_ = 0;
  if (auto it = in.find(prefix + "#steps"); it != in.end()) {
    steps_ = static_cast<std::uint64_t>(it->second[0]);
  }
  const std::string mkey = prefix + "#m:";
  for (auto it = in.lower_bound(mkey); it != in.end() && it->first.starts_with(mkey); ++it) {
    const std::string name = it->first.substr(mkey.size());
    Slot slot;
    slot.m = it->second;
    slot.v = in.at(prefix + "#v:" + name);
    slot.t = static_cast<std::uint64_t>(in.at(prefix + "#t:" + name)[0]);
    slots_[name] = std::move(slot);
  }
}

}  // namespace adp::engine
