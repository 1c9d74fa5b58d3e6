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
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "adp/datasets.hpp"
#include "adp/engine/adam.hpp"
#include "adp/gan/model.hpp"
#include "adp/labeling.hpp"

namespace adp::gan {

// Label aggregation used for ỹ: Θ̃·Λ or Θ̃·Φᵀ·Λ.
enum class Aggregation { kTheta, kThetaPhi };

// kSaturating descends on log(1 - D(fake)); kNonSaturating descends on
// -log D(fake).
enum class GeneratorLoss { kSaturating, kNonSaturating };

struct TrainingConfig {
  std::size_t batch_size = 128;
  std::size_t d_steps = 2;
  std::size_t iterations = 20000;
  double learning_rate = 1e-4;
  double beta1 = 0.5;
  std::uint64_t seed = 0;
  Aggregation aggregation = Aggregation::kTheta;
  GeneratorLoss generator_loss = GeneratorLoss::kSaturating;
  bool use_dlfb = true;
  // Per-domain weight of the D term in the generator objective.
  std::vector<double> domain_weights;
  std::size_t checkpoint_every = 0;
  std::filesystem::path checkpoint_dir;

  void validate() const;
};

// One row of the loss log. Discriminator losses are averaged over the k
// inner steps; generator losses are the objectives G descended on.
struct LossRow {
  std::size_t iter = 0;
  double loss_d_image = 0.0;
  double loss_d_label = 0.0;
  double loss_dlfb = 0.0;
  double loss_g_d = 0.0;
  double loss_g_dlfb = 0.0;
};

void write_loss_csv(const std::filesystem::path& path, const std::vector<LossRow>& rows);

// Real data and labeling functions of one image domain.
struct Domain {
  const datasets::Dataset* data = nullptr;
  const labeling::LfEnsemble* ensemble = nullptr;
};

// How Λ and Φ_real enter the generator objective. Both variants must give
// the same generator gradients: neither quantity is differentiable in G.
enum class LabelPath { kConstant, kDetached };

struct GeneratorObjective {
  double value = 0.0;
  engine::Gradients gradients;  // generator parameters only
};

// Runs the alternating updates: k discriminator updates (D per domain and
// D_LFB) per generator update, the generator descending first on the D_LFB
// term and then on the D term.
class Trainer {
 public:
  Trainer(AdpModel& model, TrainingConfig config, std::vector<Domain> domains);

  // Parameters for which this returns false are never updated.
  void set_trainable(std::function<bool(const std::string&)> predicate);

  LossRow step();

  std::size_t iteration() const noexcept { return iteration_; }
  std::uint64_t discriminator_updates() const noexcept { return d_updates_; }
  std::uint64_t generator_updates() const noexcept { return g_updates_; }
  const TrainingConfig& config() const noexcept { return config_; }
  AdpModel& model() noexcept { return model_; }

  // Model, optimizer moments and counters.
  NamedTensors export_state() const;
  void import_state(const NamedTensors& state);

  // Generator objectives on a fixed latent batch, without touching any
  // state. `phi_real` overrides the reference matrix fed to D_LFB.
  GeneratorObjective dlfb_objective(const Tensor& z, LabelPath path,
                                    const std::optional<Tensor>& phi_real = std::nullopt) const;
  GeneratorObjective d_objective(const Tensor& z, const std::vector<datasets::Batch>& real, LabelPath path) const;

 private:
  struct Fake {
    std::vector<Tensor> images;   // (B, d_h)
    std::vector<Tensor> lambdas;  // (B, n, m)
    std::vector<Tensor> labels;   // (B, m)
    Tensor theta;                 // (B, n)
    Tensor phi_flat;              // (B, n*n)
  };

  GeneratorObjective dlfb_objective_impl(const Tensor& z, LabelPath path, const std::optional<Tensor>& phi_real,
                                         bool track_stats) const;
  GeneratorObjective d_objective_impl(const Tensor& z, const std::vector<datasets::Batch>& real, LabelPath path,
                                      bool track_stats) const;
  GeneratorNodes generator(Graph& g, const Tensor& z, GeneratorParts parts, bool track_stats) const;

  Tensor sample_latent(Rng& rng) const;
  Fake sample_fake(const Tensor& z, bool update_stats);
  Tensor phi_real_of(const Fake& fake) const;
  NodeId aggregate(Graph& g, const GeneratorNodes& gen, NodeId lambda) const;
  NodeId generator_term(Graph& g, NodeId score) const;
  bool stats_trainable() const;

  // Keeps gradients of trainable parameters in the given blocks.
  engine::Gradients select(engine::Gradients grads, const std::function<bool(Block)>& keep) const;

  AdpModel& model_;
  TrainingConfig config_;
  std::vector<Domain> domains_;
  std::function<bool(const std::string&)> trainable_;
  engine::Adam opt_g_;
  engine::Adam opt_d_;
  engine::Adam opt_lfb_;
  std::size_t iteration_ = 0;
  std::uint64_t d_updates_ = 0;
  std::uint64_t g_updates_ = 0;
};

struct TrainResult {
  std::vector<LossRow> losses;
};

// Runs config.iterations steps on a fresh or resumed trainer. With a
// checkpoint interval, writes ckpt_<iter>.adp into config.checkpoint_dir.
TrainResult train(Trainer& trainer);

// Builds a single-domain model sized for the data and ensemble and trains it.
AdpModel train(const TrainingConfig& config, const datasets::Dataset& data, const labeling::LfEnsemble& ensemble,
               ModelShape shape, std::vector<LossRow>* losses = nullptr);

// Dual-domain model: one G_common/G_parameter/D_LFB, two image heads and two
// discriminators. Both datasets must share the label space.
AdpModel train_multitask(const TrainingConfig& config, const datasets::Dataset& data_a,
                         const datasets::Dataset& data_b, const labeling::LfEnsemble& ensemble_a,
                         const labeling::LfEnsemble& ensemble_b, ModelShape shape,
                         std::vector<LossRow>* losses = nullptr);

// Fine-tunes G_image and D on a target domain; G_common, G_parameter and
// D_LFB stay bit-identical.
void finetune_transfer(AdpModel& model, const datasets::Dataset& target, const labeling::LfEnsemble& ensemble,
                       const TrainingConfig& config, std::vector<LossRow>* losses = nullptr);

// `count` generated (x̃, ỹ) pairs from domain `domain`, with batch
// normalization in inference mode. The latent stream is seeded by `seed`.
std::vector<datasets::LabeledPair> generate(const AdpModel& model, const labeling::LfEnsemble& ensemble,
                                            std::size_t count, Aggregation mode, std::uint64_t seed,
                                            std::size_t domain = 0);

}  // namespace adp::gan
