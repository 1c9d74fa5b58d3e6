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


#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <random>

#include "../support/fixtures.hpp"
#include "../support/grad_check.hpp"
#include "adp/engine/checkpoint.hpp"
#include "adp/gan/trainer.hpp"
#include "adp/random.hpp"

using namespace adp;
using namespace adp::gan;
using testing::all_zero_or_absent;
using testing::gradient_gap;
using testing::kink_margin;
using testing::random_tensor;

namespace {

ModelShape small_shape(std::size_t d = 2, std::size_t n = 5, std::size_t m = 2) {
  ModelShape s;
  s.data_dims = {d};
  s.num_classes = m;
  s.num_lfs = n;
  s.latent_dim = 8;
  s.common_width = 16;
  s.image_width = 16;
  s.param_width = 16;
  s.disc_width = 16;
  s.dlfb_width = 16;
  return s;
}

void zero_parameters(AdpModel& model) {
  for (auto& [name, t] : model.params()) t.fill(0.0);
}

struct Fixture {
  datasets::MixtureSpec spec = datasets::grid_mixture(1, 2, 4.0, 0.3, 64, 3);
  datasets::Dataset data = datasets::make_mixture(spec);
  labeling::LfEnsemble ensemble =
      labeling::make_synthetic_ensemble({.accuracies = {0.9, 0.8, 0.7}, .groups = {{0, 1}, {2}}, .seed = 4}, 2, 3,
                                        datasets::mixture_oracle(spec), 2);

  TrainingConfig config(std::size_t iterations = 3) const {
    TrainingConfig c;
    c.batch_size = 8;
    c.iterations = iterations;
    c.seed = 77;
    return c;
  }
};

}  // namespace

TEST_CASE("zero-weight generator emits ln 2 and 0.5") {
  AdpModel model(small_shape(2, 5), 1);
  zero_parameters(model);
  Rng rng(2);
  const auto out = generator_forward(model, random_tensor({4, 8}, rng));
  REQUIRE(out.images.size() == 1);
  CHECK(out.images[0].shape() == Shape{4, 2});
  CHECK(out.theta.shape() == Shape{4, 5});
  CHECK(out.phi.shape() == Shape{4, 5, 5});
  for (double v : out.theta.data()) CHECK(v == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  for (double v : out.phi.data()) CHECK(v == 0.5);
}

TEST_CASE("generator is deterministic and keeps head ranges") {
  AdpModel a(small_shape(), 9), b(small_shape(), 9);
  Rng rng(4);
  const auto z = random_tensor({6, 8}, rng, -3.0, 3.0);
  const auto x = generator_forward(a, z), y = generator_forward(b, z);
  CHECK(x.images[0] == y.images[0]);
  CHECK(x.theta == y.theta);
  CHECK(x.phi == y.phi);
  for (double v : x.theta.data()) CHECK(v > 0.0);
  for (double v : x.phi.data()) CHECK((v > 0.0 && v < 1.0));
}

TEST_CASE("discriminator scores") {
  AdpModel model(small_shape(2, 3, 3), 5);
  Rng rng(6);
  const auto x = random_tensor({5, 2}, rng, -4.0, 4.0);
  auto y = random_tensor({5, 3}, rng, 0.0, 1.0);
  const auto s = discriminator_forward(model, x, y);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK((s.s_image[i] > 0.0 && s.s_image[i] < 1.0));
    CHECK((s.s_label[i] > 0.0 && s.s_label[i] < 1.0));
  }
  for (double& v : y.data()) v = 1.0 - v;
  const auto t = discriminator_forward(model, x, y);
  bool changed = false;
  for (std::size_t i = 0; i < 5; ++i) changed |= t.s_label[i] != s.s_label[i];
  CHECK(changed);

  zero_parameters(model);
  const auto z = discriminator_forward(model, x, y);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(z.s_image[i] == 0.5);
    CHECK(z.s_label[i] == 0.5);
  }
  CHECK_THROWS_AS(discriminator_forward(model, random_tensor({5, 3}, rng), y), ShapeError);
}

TEST_CASE("dependency discriminator scores") {
  AdpModel model(small_shape(2, 4), 8), twin(small_shape(2, 4), 8);
  Rng rng(10);
  for (int t = 0; t < 100; ++t) {
    const auto phi = random_tensor({4, 4}, rng, 0.0, 1.0);
    const double s = dlfb_forward(model, phi);
    CHECK((s > 0.0 && s < 1.0));
    CHECK(s == dlfb_forward(twin, phi));
  }
  CHECK_THROWS_AS(dlfb_forward(model, Tensor({3, 3}, 0.5)), ShapeError);
  zero_parameters(model);
  CHECK(dlfb_forward(model, Tensor({4, 4}, 0.3)) == 0.5);
}

TEST_CASE("full networks pass a finite-difference gradient check") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    CAPTURE(seed);
    AdpModel model(small_shape(2, 3, 2), seed);
    Rng rng(derive_seed(seed, 1));
    Tensor z, x, y, wi, wt, wp, phi;
    auto loss = [&](engine::Graph& g) {
      const auto gen = model.build_generator(g, g.input("z", z));
      NodeId l = g.mean(g.mul(gen.images[0], g.constant(wi)));
      l = g.add(l, g.mean(g.mul(gen.theta, g.constant(wt))));
      l = g.add(l, g.mean(g.mul(gen.phi_flat, g.constant(wp))));
      const auto d = model.build_discriminator(g, 0, g.input("x", x), g.input("y", y));
      l = g.add(l, g.bce(d.s_image, g.constant(Tensor({4, 1}, 1.0))));
      l = g.add(l, g.bce(d.s_label, g.constant(Tensor({4, 1}, 0.0))));
      l = g.add(l, g.bce(model.build_dlfb(g, g.input("phi", phi)), g.constant(Tensor({3, 1}, 1.0))));
      return l;
    };
    // Central differences are only valid away from the rectifier kinks.
    for (int attempt = 0;; ++attempt) {
      REQUIRE(attempt < 100);
      z = random_tensor({4, 8}, rng, -2.0, 2.0);
      x = random_tensor({4, 2}, rng, -2.0, 2.0);
      y = random_tensor({4, 2}, rng, 0.0, 1.0);
      wi = random_tensor({4, 2}, rng);
      wt = random_tensor({4, 3}, rng);
      wp = random_tensor({4, 9}, rng);
      phi = random_tensor({3, 9}, rng, 0.0, 1.0);
      engine::Graph probe;
      loss(probe);
      if (kink_margin(probe) > 1e-3) break;
    }
    const auto r = testing::grad_check(model.params(), loss);
    CHECK(r.checked > 1000);
    CHECK_MESSAGE(r.failures == 0, r.worst_name, " ", r.worst_relative);
  }
}

TEST_CASE("model tensors round trip through a checkpoint") {
  AdpModel model(small_shape(3, 4, 3), 12);
  const auto copy = AdpModel::from_tensors(engine::read_checkpoint([&] {
    static std::stringstream ss;
    engine::write_checkpoint(ss, model.export_tensors());
    return std::ref(ss);
  }()));
  CHECK(copy.params() == model.params());
  CHECK(copy.buffers() == model.buffers());
  CHECK(copy.shape().data_dims == model.shape().data_dims);
  CHECK(copy.shape().num_lfs == 4);
}

TEST_CASE("one step updates both players with k discriminator updates per generator update") {
  Fixture f;
  auto c = f.config();
  c.d_steps = 2;
  AdpModel model(small_shape(2, 3, 2), 1);
  const auto before = model.params();
  Trainer trainer(model, c, {{&f.data, &f.ensemble}});
  const auto row = trainer.step();
  CHECK(row.iter == 0);
  bool d_changed = false, g_changed = false, lfb_changed = false;
  for (const auto& [name, t] : model.params()) {
    if (t == before.at(name)) continue;
    const Block b = block_of(name);
    d_changed |= b == Block::kDiscriminator;
    lfb_changed |= b == Block::kDLfb;
    g_changed |= is_generator(b);
  }
  CHECK(d_changed);
  CHECK(lfb_changed);
  CHECK(g_changed);
  CHECK(std::abs(row.loss_d_image - 2.0 * std::log(2.0)) < 0.3);
  CHECK(std::abs(row.loss_d_label - 2.0 * std::log(2.0)) < 0.3);
  CHECK(std::abs(row.loss_dlfb - 2.0 * std::log(2.0)) < 0.3);
  for (int i = 0; i < 4; ++i) {
    const auto r = trainer.step();
    CHECK(std::isfinite(r.loss_d_image + r.loss_d_label + r.loss_dlfb + r.loss_g_d + r.loss_g_dlfb));
  }
  CHECK(trainer.generator_updates() == 5);
  CHECK(trainer.discriminator_updates() == 10);
  for (std::size_t k : {1, 3}) {
    c.d_steps = k;
    AdpModel m(small_shape(2, 3, 2), 1);
    Trainer t(m, c, {{&f.data, &f.ensemble}});
    for (int i = 0; i < 3; ++i) t.step();
    CHECK(t.discriminator_updates() == k * t.generator_updates());
  }
}

TEST_CASE("labels and the reference matrix carry no generator gradient") {
  Fixture f;
  for (auto loss : {GeneratorLoss::kSaturating, GeneratorLoss::kNonSaturating}) {
    for (auto agg : {Aggregation::kTheta, Aggregation::kThetaPhi}) {
      auto c = f.config();
      c.generator_loss = loss;
      c.aggregation = agg;
      AdpModel model(small_shape(2, 3, 2), 3);
      Trainer trainer(model, c, {{&f.data, &f.ensemble}});
      trainer.step();
      Rng rng(5);
      const auto z = random_tensor({8, 8}, rng, -2.0, 2.0);
      const auto real = std::vector{datasets::sample_batch(f.data, 8, rng)};

      const auto a = trainer.dlfb_objective(z, LabelPath::kConstant);
      const auto b = trainer.dlfb_objective(z, LabelPath::kDetached);
      const auto zeroed = trainer.dlfb_objective(z, LabelPath::kConstant, Tensor({1, 9}, 0.0));
      CHECK(gradient_gap(a.gradients, b.gradients) == 0.0);
      CHECK(gradient_gap(a.gradients, zeroed.gradients) == 0.0);
      CHECK_FALSE(all_zero_or_absent(a.gradients, "g_param"));
      CHECK(all_zero_or_absent(a.gradients, "g_image"));

      const auto p = trainer.d_objective(z, real, LabelPath::kConstant);
      const auto q = trainer.d_objective(z, real, LabelPath::kDetached);
      CHECK(p.value == q.value);
      CHECK(gradient_gap(p.gradients, q.gradients) == 0.0);
      CHECK_FALSE(all_zero_or_absent(p.gradients, "g_image0"));
      CHECK_FALSE(all_zero_or_absent(p.gradients, "g_param.theta"));
      CHECK(all_zero_or_absent(p.gradients, "g_param.phi") == (agg == Aggregation::kTheta));
      CHECK(all_zero_or_absent(p.gradients, "d"));
    }
  }
}

TEST_CASE("loss log has one row per iteration and resume reproduces later rows") {
  Fixture f;
  const auto dir = std::filesystem::temp_directory_path() / "adp_test_resume";
  std::filesystem::remove_all(dir);
  auto c = f.config(4);
  c.checkpoint_every = 2;
  c.checkpoint_dir = dir;
  std::vector<LossRow> rows;
  const auto model = train(c, f.data, f.ensemble, small_shape(), &rows);
  REQUIRE(rows.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) CHECK(rows[i].iter == i);
  REQUIRE(std::filesystem::exists(dir / "ckpt_2.adp"));
  REQUIRE(std::filesystem::exists(dir / "ckpt_4.adp"));

  const auto state = engine::load_checkpoint(dir / "ckpt_2.adp");
  auto resumed_model = AdpModel::from_tensors(state);
  auto rc = c;
  rc.checkpoint_every = 0;
  Trainer resumed(resumed_model, rc, {{&f.data, &f.ensemble}});
  resumed.import_state(state);
  CHECK(resumed.iteration() == 2);
  for (std::size_t i = 2; i < 4; ++i) {
    const auto r = resumed.step();
    CHECK(r.iter == rows[i].iter);
    CHECK(r.loss_d_image == rows[i].loss_d_image);
    CHECK(r.loss_d_label == rows[i].loss_d_label);
    CHECK(r.loss_dlfb == rows[i].loss_dlfb);
    CHECK(r.loss_g_d == rows[i].loss_g_d);
    CHECK(r.loss_g_dlfb == rows[i].loss_g_dlfb);
  }
  CHECK(resumed_model.params() == model.params());
  CHECK(resumed_model.buffers() == model.buffers());

  write_loss_csv(dir / "loss.csv", rows);
  std::ifstream in(dir / "loss.csv");
  std::string line;
  std::size_t lines = 0;
  while (std::getline(in, line)) ++lines;
  CHECK(lines == 5);
  std::filesystem::remove_all(dir);
}

namespace {
datasets::Dataset three_dim() {
  return datasets::make_mixture({.modes = {{.center = {0, 0, 0}, .label = 0}, {.center = {1, 1, 1}, .label = 1}},
                                 .samples_per_mode = 4});
}
}  // namespace

TEST_CASE("transfer fine-tuning leaves shared blocks bit-identical") {
  Fixture f;
  auto model = train(f.config(2), f.data, f.ensemble, small_shape());
  const auto before = model.params();
  const auto buffers = model.buffers();
  auto target_spec = datasets::grid_mixture(1, 2, 4.0, 0.3, 64, 5, {5.0, 5.0});
  const auto target = datasets::make_mixture(target_spec);
  finetune_transfer(model, target, f.ensemble, f.config(3));
  bool image_changed = false, d_changed = false;
  for (const auto& [name, t] : model.params()) {
    const Block b = block_of(name);
    if (b == Block::kGCommon || b == Block::kGParameter || b == Block::kDLfb) {
      CHECK_MESSAGE(t == before.at(name), name);
    }
    image_changed |= b == Block::kGImage && t != before.at(name);
    d_changed |= b == Block::kDiscriminator && t != before.at(name);
  }
  CHECK(image_changed);
  CHECK(d_changed);
  CHECK(model.buffers() == buffers);
  CHECK_THROWS_AS(finetune_transfer(model, three_dim(),
                                    f.ensemble, f.config(1)),
                  ShapeError);
}

TEST_CASE("multitask model with a zero domain weight leaves head b untouched") {
  Fixture f;
  auto spec_b = datasets::grid_mixture(1, 2, 4.0, 0.3, 64, 8);
  for (auto& mode : spec_b.modes) mode.center.push_back(1.0);
  const auto data_b = datasets::make_mixture(spec_b);
  const auto ens_b = labeling::make_synthetic_ensemble({.accuracies = {0.9, 0.8, 0.7}, .seed = 6}, 2, 3,
                                                       datasets::mixture_oracle(spec_b), 3);
  auto shape = small_shape();
  shape.data_dims = {2, 3};
  shape.num_lfs = 3;
  AdpModel model(shape, 2);
  auto c = f.config();
  c.domain_weights = {1.0, 0.0};
  Trainer trainer(model, c, {{&f.data, &f.ensemble}, {&data_b, &ens_b}});
  const auto head_b = [&] {
    engine::NamedTensors out;
    for (const auto& [name, t] : model.params()) {
      if (name.starts_with("g_image1")) out.emplace(name, t);
    }
    return out;
  };
  const auto before = head_b();
  Rng rng(3);
  const auto z = random_tensor({8, 8}, rng);
  const std::vector real{datasets::sample_batch(f.data, 8, rng), datasets::sample_batch(data_b, 8, rng)};
  const auto obj = trainer.d_objective(z, real, LabelPath::kConstant);
  CHECK(all_zero_or_absent(obj.gradients, "g_image1"));
  CHECK_FALSE(all_zero_or_absent(obj.gradients, "g_image0"));
  trainer.step();
  CHECK(head_b() == before);

  const auto out = generator_forward(model, z);
  REQUIRE(out.images.size() == 2);
  CHECK(out.images[0].shape() == Shape{8, 2});
  CHECK(out.images[1].shape() == Shape{8, 3});

  const auto mismatched = datasets::make_mixture(datasets::grid_mixture(1, 3, 4.0, 0.3, 8, 1));
  CHECK_THROWS_AS(train_multitask(c, f.data, mismatched, f.ensemble, f.ensemble, shape), InvalidArgument);
}

TEST_CASE("generation") {
  Fixture f;
  auto model = train(f.config(2), f.data, f.ensemble, small_shape());
  CHECK(generate(model, f.ensemble, 0, Aggregation::kThetaPhi, 1).empty());
  const auto a = generate(model, f.ensemble, 300, Aggregation::kThetaPhi, 11);
  const auto b = generate(model, f.ensemble, 300, Aggregation::kThetaPhi, 11);
  REQUIRE(a.size() == 300);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].x == b[i].x);
    CHECK(a[i].y == b[i].y);
    CHECK(labeling::on_simplex(a[i].y));
  }

  const std::size_t n = 3;
  auto& w = model.params().at("g_param.phi.W");
  auto& bias = model.params().at("g_param.phi.b");
  w.fill(0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) bias[i * n + j] = i == j ? 40.0 : -40.0;
  }
  const auto by_theta = generate(model, f.ensemble, 200, Aggregation::kTheta, 21);
  const auto by_theta_phi = generate(model, f.ensemble, 200, Aggregation::kThetaPhi, 21);
  for (std::size_t i = 0; i < by_theta.size(); ++i) {
    CHECK(by_theta[i].x == by_theta_phi[i].x);
    for (std::size_t k = 0; k < 2; ++k) CHECK(std::abs(by_theta[i].y[k] - by_theta_phi[i].y[k]) <= 1e-6);
  }
}
