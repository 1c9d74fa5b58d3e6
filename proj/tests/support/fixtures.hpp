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

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "adp/engine/graph.hpp"
#include "adp/engine/tensor.hpp"
#include "adp/labeling.hpp"
#include "adp/random.hpp"

namespace adp::testing {

inline Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = u(rng);
  return t;
}

// Rows are random points on the simplex.
inline Tensor random_lambda(std::size_t n, std::size_t m, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Tensor t({n, m});
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < m; ++k) s += (t.at(i, k) = u(rng));
    for (std::size_t k = 0; k < m; ++k) t.at(i, k) /= s;
  }
  return t;
}

// Independent straight-line rendering of the agreement procedure.
inline Tensor reference_phi_real(const std::vector<Tensor>& lambdas) {
  const std::size_t n = lambdas.front().dim(0);
  std::vector<std::vector<double>> phi(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) phi[i][i] = 1.0;
  for (const auto& l : lambdas) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        if (labeling::argmax(l.row(i)) == labeling::argmax(l.row(j))) phi[i][j] += 1.0;
      }
    }
  }
  for (auto& row : phi) {
    double s = 0.0;
    for (double v : row) s += v;
    for (double& v : row) v /= s;
  }
  Tensor out({n, n});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) out.at(i, j) = phi[i][j] + phi[j][i] - (i == j ? phi[i][i] : 0.0);
  }
  return out;
}

// Smallest |input| over every rectifier in the graph.
inline double kink_margin(const engine::Graph& g) {
  double margin = std::numeric_limits<double>::infinity();
  for (engine::NodeId id = 0; id < g.size(); ++id) {
    if (g.op(id) != engine::Op::kPRelu) continue;
    for (double v : g.value(g.inputs_of(id)[0]).data()) margin = std::min(margin, std::abs(v));
  }
  return margin;
}

inline bool all_zero_or_absent(const engine::Gradients& grads, const std::string& prefix) {
  for (const auto& [name, g] : grads) {
    if (name.starts_with(prefix) && !g.all_zero()) return false;
  }
  return true;
}

// Largest entry-wise difference, with a missing gradient read as zeros.
inline double gradient_gap(const engine::Gradients& a, const engine::Gradients& b) {
  double gap = 0.0;
  auto compare = [&gap](const engine::Gradients& x, const engine::Gradients& y) {
    for (const auto& [name, t] : x) {
      const auto it = y.find(name);
      for (std::size_t i = 0; i < t.size(); ++i) {
        gap = std::max(gap, std::abs(t[i] - (it == y.end() ? 0.0 : it->second[i])));
      }
    }
  };
  compare(a, b);
  compare(b, a);
  return gap;
}

}  // namespace adp::testing
