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


#include "adp/gan/dependency.hpp"

#include <algorithm>
#include <random>

#include "adp/engine/adam.hpp"
#include "adp/error.hpp"
#include "adp/random.hpp"

namespace adp::gan {

namespace {

Tensor batch_mean(const Tensor& t) {
  const std::size_t rows = t.dim(0), cols = t.size() / rows;
  Tensor out({cols}, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out[c] += t[r * cols + c];
  }
  for (double& v : out.data()) v /= static_cast<double>(rows);
  return out;
}

}  // namespace

lfb::DependencyState estimate_dependencies(const Tensor& lambdas, const DependencyConfig& config) {
  if (lambdas.rank() != 3 || lambdas.dim(0) == 0) {
    throw ShapeError("dependency estimation expects (N, n, m) label matrices, got " + shape_str(lambdas.shape()));
  }
  if (config.batch_size < 2) throw InvalidArgument("batch size must be at least 2");
  const std::size_t count = lambdas.dim(0), n = lambdas.dim(1), m = lambdas.dim(2);
  ModelShape shape = config.shape;
  shape.data_dims = {1};
  shape.num_classes = m;
  shape.num_lfs = n;
  AdpModel model(shape, derive_seed(config.seed, 0xfeed));
  engine::Adam opt_g({config.learning_rate, config.beta1});
  engine::Adam opt_lfb({config.learning_rate, config.beta1});
  const std::size_t B = config.batch_size;
  const std::size_t block = n * m;
  Rng rng(derive_seed(config.seed, 1));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick(0, count - 1);
  auto latent = [&] {
    Tensor z({B, shape.latent_dim});
    for (double& v : z.data()) v = normal(rng);
    return z;
  };
  const auto keep = [](const engine::Gradients& grads, bool generator) {
    engine::Gradients out;
    for (const auto& [name, g] : grads) {
      if (is_generator(block_of(name)) == generator && (generator || block_of(name) == Block::kDLfb)) {
        out.emplace(name, g);
      }
    }
    return out;
  };

  Tensor batch({B, n, m});
  for (std::size_t step = 0; step < config.steps; ++step) {
    for (std::size_t b = 0; b < B; ++b) {
      const std::size_t p = pick(rng);
      std::copy_n(lambdas.data().begin() + p * block, block, batch.data().begin() + b * block);
    }
    // D_LFB update
    Tensor theta, phi_flat;
    {
      Graph g;
      const auto gen = model.build_generator_tracking(g, g.input("z", latent()), {.images = false});
      theta = batch_mean(g.value(gen.theta));
      phi_flat = g.value(gen.phi_flat);
    }
    const Tensor phi_real = lfb::compute_phi_real(theta.data(), batch).reshaped({1, n * n});
    {
      Graph g;
      const NodeId s_real = model.build_dlfb(g, g.input("phi_real", phi_real));
      const NodeId s_fake = model.build_dlfb(g, g.constant(phi_flat));
      const NodeId loss = g.add(g.bce(s_real, g.constant(Tensor({1, 1}, 1.0))),
                                g.bce(s_fake, g.constant(Tensor({B, 1}, 0.0))));
      opt_lfb.step(model.params(), keep(g.backward(loss), false));
    }
    // generator update on log(1 - D_LFB(Φ))
    {
      Graph g;
      const auto gen = model.build_generator(g, g.input("z", latent()), {.images = false});
      const NodeId s_fake = model.build_dlfb(g, gen.phi_flat);
      const NodeId loss = g.scale(g.bce(s_fake, g.constant(Tensor({B, 1}, 0.0))), -1.0);
      opt_g.step(model.params(), keep(g.backward(loss), true));
    }
  }

  lfb::DependencyState out;
  const auto last = generator_forward(model, latent(), engine::Mode::kInference);
  const Tensor theta = batch_mean(last.theta);
  out.theta.assign(theta.data().begin(), theta.data().end());
  out.phi = batch_mean(last.phi).reshaped({n, n});
  out.phi_real = lfb::compute_phi_real(out.theta, lambdas);
  return out;
}

}  // namespace adp::gan
