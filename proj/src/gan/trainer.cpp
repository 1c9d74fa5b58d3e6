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


#include "adp/gan/trainer.hpp"

#include <cstdio>
#include <fstream>

#include "adp/engine/checkpoint.hpp"
#include "adp/error.hpp"
#include "adp/lfb.hpp"

namespace adp::gan {

void TrainingConfig::validate() const {
  if (batch_size < 2) throw InvalidArgument("batch size must be at least 2");
  if (d_steps < 1) throw InvalidArgument("d_steps must be at least 1");
  if (!(learning_rate > 0.0)) throw InvalidArgument("learning rate must be positive");
}

void write_loss_csv(const std::filesystem::path& path, const std::vector<LossRow>& rows) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write loss log " + path.string());
  out << "iter,loss_d_image,loss_d_label,loss_dlfb,loss_g_d,loss_g_dlfb\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.iter, r.loss_d_image, r.loss_d_label,
                  r.loss_dlfb, r.loss_g_d, r.loss_g_dlfb);
    out << buf;
  }
  if (!out) throw IoError("failed writing loss log " + path.string());
}

namespace {

Tensor row_means(const Tensor& t) {
  const std::size_t rows = t.dim(0), cols = t.dim(1);
  Tensor out({cols}, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out[c] += t.at(r, c);
  }
  for (double& v : out.data()) v /= static_cast<double>(rows);
  return out;
}

std::vector<Tensor> split_batch(const Tensor& lambdas) {
  const std::size_t batch = lambdas.dim(0), n = lambdas.dim(1), m = lambdas.dim(2);
  std::vector<Tensor> out;
  out.reserve(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    out.emplace_back(Shape{n, m}, std::vector<double>(lambdas.data().begin() + b * n * m,
                                                      lambdas.data().begin() + (b + 1) * n * m));
  }
  return out;
}

// Λ or Φ_real as they enter a generator objective: a constant leaf, or a
// tracked input routed through detach().
NodeId label_leaf(Graph& g, const std::string& name, const Tensor& value, LabelPath path) {
  if (path == LabelPath::kConstant) return g.constant(value);
  return g.detach(g.input(name, value, /*requires_grad=*/true));
}

}  // namespace

Trainer::Trainer(AdpModel& model, TrainingConfig config, std::vector<Domain> domains)
    : model_(model),
      config_(std::move(config)),
      domains_(std::move(domains)),
      trainable_([](const std::string&) { return true; }),
      opt_g_({config_.learning_rate, config_.beta1}),
      opt_d_({config_.learning_rate, config_.beta1}),
      opt_lfb_({config_.learning_rate, config_.beta1}) {
  config_.validate();
  const auto& s = model_.shape();
  if (domains_.size() != s.domains()) throw InvalidArgument("trainer needs one domain per image head");
  for (std::size_t h = 0; h < domains_.size(); ++h) {
    const auto& dom = domains_[h];
    if (!dom.data || !dom.ensemble) throw InvalidArgument("domain " + std::to_string(h) + " lacks data or ensemble");
    datasets::validate(*dom.data);
    if (dom.data->dim() != s.data_dims[h]) throw ShapeError("domain " + std::to_string(h) + " data dimensionality mismatch");
    if (dom.data->num_classes != s.num_classes || dom.ensemble->num_classes() != s.num_classes) {
      throw InvalidArgument("domain " + std::to_string(h) + " class count does not match the model");
    }
    if (dom.ensemble->size() != s.num_lfs) throw InvalidArgument("ensemble size does not match the model");
  }
  if (config_.domain_weights.empty()) config_.domain_weights.assign(s.domains(), 1.0);
  if (config_.domain_weights.size() != s.domains()) throw InvalidArgument("need one domain weight per domain");
}

void Trainer::set_trainable(std::function<bool(const std::string&)> predicate) {
  trainable_ = predicate ? std::move(predicate) : [](const std::string&) { return true; };
}

bool Trainer::stats_trainable() const { return trainable_("g_common.bn0.gamma"); }

Tensor Trainer::sample_latent(Rng& rng) const {
  std::normal_distribution<double> normal(0.0, 1.0);
  Tensor z({config_.batch_size, model_.shape().latent_dim});
  for (double& v : z.data()) v = normal(rng);
  return z;
}

NodeId Trainer::aggregate(Graph& g, const GeneratorNodes& gen, NodeId lambda) const {
  const std::size_t batch = g.value(gen.theta).dim(0);
  const std::size_t n = model_.shape().num_lfs, m = model_.shape().num_classes;
  const NodeId weights = g.reshape(g.normalize_rows(gen.theta), {batch, 1, n});
  if (config_.aggregation == Aggregation::kTheta) {
    return g.reshape(g.batch_matmul(weights, lambda), {batch, m});
  }
  const NodeId w = g.batch_matmul(weights, gen.phi, /*transpose_b=*/true);
  return g.reshape(g.normalize_rows(g.batch_matmul(w, lambda)), {batch, m});
}

NodeId Trainer::generator_term(Graph& g, NodeId score) const {
  const Shape shape = g.value(score).shape();
  if (config_.generator_loss == GeneratorLoss::kSaturating) {
    return g.scale(g.bce(score, g.constant(Tensor(shape, 0.0))), -1.0);
  }
  return g.bce(score, g.constant(Tensor(shape, 1.0)));
}

GeneratorNodes Trainer::generator(Graph& g, const Tensor& z, GeneratorParts parts, bool track_stats) const {
  const NodeId zi = g.input("z", z);
  if (track_stats && stats_trainable()) return model_.build_generator_tracking(g, zi, parts);
  return model_.build_generator(g, zi, parts);
}

Trainer::Fake Trainer::sample_fake(const Tensor& z, bool update_stats) {
  Graph g;
  const auto gen = generator(g, z, {}, update_stats);
  Fake fake;
  fake.theta = g.value(gen.theta);
  fake.phi_flat = g.value(gen.phi_flat);
  for (std::size_t h = 0; h < domains_.size(); ++h) {
    fake.images.push_back(g.value(gen.images[h]));
    fake.lambdas.push_back(labeling::eval_ensemble_batch(*domains_[h].ensemble, fake.images.back()));
    fake.labels.push_back(g.value(aggregate(g, gen, g.constant(fake.lambdas.back()))));
  }
  return fake;
}

Tensor Trainer::phi_real_of(const Fake& fake) const {
  const Tensor theta = row_means(fake.theta);
  std::vector<Tensor> pooled;
  for (const auto& lam : fake.lambdas) {
    auto part = split_batch(lam);
    pooled.insert(pooled.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
  }
  const std::size_t n = model_.shape().num_lfs;
  return lfb::compute_phi_real(theta.data(), pooled).reshaped({1, n * n});
}

engine::Gradients Trainer::select(engine::Gradients grads, const std::function<bool(Block)>& keep) const {
  std::erase_if(grads, [&](const auto& kv) { return !keep(block_of(kv.first)) || !trainable_(kv.first); });
  return grads;
}

GeneratorObjective Trainer::dlfb_objective(const Tensor& z, LabelPath path,
                                          const std::optional<Tensor>& phi_real) const {
  return dlfb_objective_impl(z, path, phi_real, false);
}

GeneratorObjective Trainer::d_objective(const Tensor& z, const std::vector<datasets::Batch>& real,
                                        LabelPath path) const {
  return d_objective_impl(z, real, path, false);
}

GeneratorObjective Trainer::dlfb_objective_impl(const Tensor& z, LabelPath path, const std::optional<Tensor>& phi_real,
                                               bool track_stats) const {
  Graph g;
  const bool saturating = config_.generator_loss == GeneratorLoss::kSaturating;
  const auto gen = generator(g, z, {.images = saturating && !phi_real}, track_stats);
  NodeId loss;
  const NodeId s_fake = model_.build_dlfb(g, gen.phi_flat);
  if (config_.generator_loss == GeneratorLoss::kSaturating) {
    Tensor reference;
    if (phi_real) {
      reference = phi_real->reshaped({1, phi_real->size()});
    } else {
      Fake fake;
      fake.theta = g.value(gen.theta);
      for (std::size_t h = 0; h < domains_.size(); ++h) {
        fake.lambdas.push_back(labeling::eval_ensemble_batch(*domains_[h].ensemble, g.value(gen.images[h])));
      }
      reference = phi_real_of(fake);
    }
    const NodeId s_real = model_.build_dlfb(g, label_leaf(g, "phi_real", reference, path));
    const NodeId real_term = g.bce(s_real, g.constant(Tensor(g.value(s_real).shape(), 1.0)));
    loss = g.add(generator_term(g, s_fake), g.scale(real_term, -1.0));
  } else {
    loss = generator_term(g, s_fake);
  }
  GeneratorObjective out{g.scalar(loss), {}};
  out.gradients = select(g.backward(loss), is_generator);
  return out;
}

GeneratorObjective Trainer::d_objective_impl(const Tensor& z, const std::vector<datasets::Batch>& real,
                                             LabelPath path, bool track_stats) const {
  if (real.size() != domains_.size()) throw InvalidArgument("need one real batch per domain");
  Graph g;
  const auto gen = generator(g, z, {.phi = config_.aggregation == Aggregation::kThetaPhi}, track_stats);
  const bool saturating = config_.generator_loss == GeneratorLoss::kSaturating;
  NodeId loss = g.constant(Tensor::scalar(0.0));
  for (std::size_t h = 0; h < domains_.size(); ++h) {
    if (config_.domain_weights[h] == 0.0) continue;
    const Tensor lambdas = labeling::eval_ensemble_batch(*domains_[h].ensemble, g.value(gen.images[h]));
    const NodeId y = aggregate(g, gen, label_leaf(g, "lambda" + std::to_string(h), lambdas, path));
    const auto fake = model_.build_discriminator(g, h, gen.images[h], y);
    NodeId term = g.add(generator_term(g, fake.s_image), generator_term(g, fake.s_label));
    if (saturating) {
      const auto r = model_.build_discriminator(g, h, g.input("x" + std::to_string(h), real[h].x),
                                                g.input("y" + std::to_string(h), real[h].y));
      const Tensor ones(g.value(r.s_image).shape(), 1.0);
      const NodeId real_terms = g.add(g.bce(r.s_image, g.constant(ones)), g.bce(r.s_label, g.constant(ones)));
      term = g.add(term, g.scale(real_terms, -1.0));
    }
    loss = g.add(loss, g.scale(term, config_.domain_weights[h]));
  }
  GeneratorObjective out{g.scalar(loss), {}};
  out.gradients = select(g.backward(loss), is_generator);
  return out;
}

LossRow Trainer::step() {
  Rng rng(derive_seed(config_.seed, iteration_));
  LossRow row;
  row.iter = iteration_;

  const bool update_dlfb = config_.use_dlfb && trainable_("d_lfb.out.W");
  const bool generator_dlfb = config_.use_dlfb && (trainable_("g_param.phi.W") || trainable_("g_common.fc0.W"));
  auto keep_d = [](Block b) { return b == Block::kDiscriminator; };
  auto keep_lfb = [](Block b) { return b == Block::kDLfb; };

  try {
    for (std::size_t s = 0; s < config_.d_steps; ++s) {
      const Fake fake = sample_fake(sample_latent(rng), true);
      for (std::size_t h = 0; h < domains_.size(); ++h) {
        const auto real = datasets::sample_batch(*domains_[h].data, config_.batch_size, rng);
        Graph g;
        const auto r = model_.build_discriminator(g, h, g.input("x", real.x), g.input("y", real.y));
        const auto f = model_.build_discriminator(g, h, g.constant(fake.images[h]), g.constant(fake.labels[h]));
        const NodeId ones = g.constant(Tensor({config_.batch_size, 1}, 1.0));
        const NodeId zeros = g.constant(Tensor({config_.batch_size, 1}, 0.0));
        const NodeId li = g.add(g.bce(r.s_image, ones), g.bce(f.s_image, zeros));
        const NodeId ll = g.add(g.bce(r.s_label, ones), g.bce(f.s_label, zeros));
        const NodeId loss = g.add(li, ll);
        row.loss_d_image += g.scalar(li) / static_cast<double>(config_.d_steps * domains_.size());
        row.loss_d_label += g.scalar(ll) / static_cast<double>(config_.d_steps * domains_.size());
        opt_d_.step(model_.params(), select(g.backward(loss), keep_d));
      }
      if (update_dlfb) {
        Graph g;
        const NodeId s_real = model_.build_dlfb(g, g.input("phi_real", phi_real_of(fake)));
        const NodeId s_fake = model_.build_dlfb(g, g.constant(fake.phi_flat));
        const NodeId loss = g.add(g.bce(s_real, g.constant(Tensor({1, 1}, 1.0))),
                                  g.bce(s_fake, g.constant(Tensor({config_.batch_size, 1}, 0.0))));
        row.loss_dlfb += g.scalar(loss) / static_cast<double>(config_.d_steps);
        opt_lfb_.step(model_.params(), select(g.backward(loss), keep_lfb));
      }
      ++d_updates_;
    }

    // Generator: D_LFB term first, then the D term, on the same latent batch.
    const Tensor z = sample_latent(rng);
    std::vector<datasets::Batch> real;
    for (const auto& dom : domains_) real.push_back(datasets::sample_batch(*dom.data, config_.batch_size, rng));
    // Running statistics see this batch once, in the first pass.
    if (generator_dlfb) {
      auto obj = dlfb_objective_impl(z, LabelPath::kConstant, std::nullopt, true);
      row.loss_g_dlfb = obj.value;
      opt_g_.step(model_.params(), obj.gradients);
    }
    auto obj = d_objective_impl(z, real, LabelPath::kConstant, !generator_dlfb);
    row.loss_g_d = obj.value;
    opt_g_.step(model_.params(), obj.gradients);
    ++g_updates_;
  } catch (const NumericError& e) {
    throw NumericError("iteration " + std::to_string(iteration_) + ": " + e.what() + " (losses so far: d_image=" +
                       std::to_string(row.loss_d_image) + " d_label=" + std::to_string(row.loss_d_label) +
                       " dlfb=" + std::to_string(row.loss_dlfb) + ")");
  }
  ++iteration_;
  return row;
}

NamedTensors Trainer::export_state() const {
  NamedTensors out = model_.export_tensors();
  opt_g_.export_state(out, "opt_g");
  opt_d_.export_state(out, "opt_d");
  opt_lfb_.export_state(out, "opt_lfb");
  out["trainer#iteration"] = Tensor::scalar(static_cast<double>(iteration_));
  out["trainer#d_updates"] = Tensor::scalar(static_cast<double>(d_updates_));
  out["trainer#g_updates"] = Tensor::scalar(static_cast<double>(g_updates_));
  return out;
}

void Trainer::import_state(const NamedTensors& state) {
  AdpModel loaded = AdpModel::from_tensors(state);
  const auto& a = loaded.shape();
  const auto& b = model_.shape();
  if (a.data_dims != b.data_dims || a.num_classes != b.num_classes || a.num_lfs != b.num_lfs ||
      a.latent_dim != b.latent_dim || a.common_width != b.common_width || a.common_layers != b.common_layers ||
      a.image_width != b.image_width || a.param_width != b.param_width || a.disc_width != b.disc_width ||
      a.dlfb_width != b.dlfb_width) {
    throw ShapeError("checkpoint model shape does not match the trainer's model");
  }
  model_.params() = loaded.params();
  model_.buffers() = loaded.buffers();
  opt_g_.import_state(state, "opt_g");
  opt_d_.import_state(state, "opt_d");
  opt_lfb_.import_state(state, "opt_lfb");
  iteration_ = static_cast<std::size_t>(state.at("trainer#iteration")[0]);
  d_updates_ = static_cast<std::uint64_t>(state.at("trainer#d_updates")[0]);
  g_updates_ = static_cast<std::uint64_t>(state.at("trainer#g_updates")[0]);
}

TrainResult train(Trainer& trainer) {
  TrainResult result;
  const auto& config = trainer.config();
  if (config.checkpoint_every > 0) {
    std::error_code ec;
    std::filesystem::create_directories(config.checkpoint_dir, ec);
    if (ec) throw IoError("cannot create checkpoint directory " + config.checkpoint_dir.string() + ": " + ec.message());
  }
  while (trainer.iteration() < config.iterations) {
    result.losses.push_back(trainer.step());
    if (config.checkpoint_every > 0 && trainer.iteration() % config.checkpoint_every == 0) {
      const auto path = config.checkpoint_dir / ("ckpt_" + std::to_string(trainer.iteration()) + ".adp");
      engine::save_checkpoint(path, trainer.export_state());
    }
  }
  return result;
}

AdpModel train(const TrainingConfig& config, const datasets::Dataset& data, const labeling::LfEnsemble& ensemble,
               ModelShape shape, std::vector<LossRow>* losses) {
  datasets::validate(data);
  if (ensemble.num_classes() != data.num_classes) throw InvalidArgument("ensemble class count does not match the dataset");
  shape.data_dims = {data.dim()};
  shape.num_classes = data.num_classes;
  shape.num_lfs = ensemble.size();
  AdpModel model(shape, derive_seed(config.seed, 0xfeed));
  Trainer trainer(model, config, {{&data, &ensemble}});
  auto result = train(trainer);
  if (losses) *losses = std::move(result.losses);
  return model;
}

AdpModel train_multitask(const TrainingConfig& config, const datasets::Dataset& data_a,
                         const datasets::Dataset& data_b, const labeling::LfEnsemble& ensemble_a,
                         const labeling::LfEnsemble& ensemble_b, ModelShape shape, std::vector<LossRow>* losses) {
  datasets::validate(data_a);
  datasets::validate(data_b);
  if (data_a.num_classes != data_b.num_classes || ensemble_a.num_classes() != data_a.num_classes ||
      ensemble_b.num_classes() != data_a.num_classes) {
    throw InvalidArgument("multitask domains must share the label space");
  }
  if (ensemble_a.size() != ensemble_b.size()) throw InvalidArgument("multitask ensembles must have the same size");
  shape.data_dims = {data_a.dim(), data_b.dim()};
  shape.num_classes = data_a.num_classes;
  shape.num_lfs = ensemble_a.size();
  AdpModel model(shape, derive_seed(config.seed, 0xfeed));
  Trainer trainer(model, config, {{&data_a, &ensemble_a}, {&data_b, &ensemble_b}});
  auto result = train(trainer);
  if (losses) *losses = std::move(result.losses);
  return model;
}

void finetune_transfer(AdpModel& model, const datasets::Dataset& target, const labeling::LfEnsemble& ensemble,
                       const TrainingConfig& config, std::vector<LossRow>* losses) {
  datasets::validate(target);
  if (model.shape().domains() != 1 || target.dim() != model.shape().data_dims[0]) {
    throw ShapeError("transfer target dimensionality does not match the source model");
  }
  Trainer trainer(model, config, {{&target, &ensemble}});
  trainer.set_trainable([](const std::string& name) {
    const Block b = block_of(name);
    return b == Block::kGImage || b == Block::kDiscriminator;
  });
  auto result = train(trainer);
  if (losses) *losses = std::move(result.losses);
}

std::vector<datasets::LabeledPair> generate(const AdpModel& model, const labeling::LfEnsemble& ensemble,
                                            std::size_t count, Aggregation mode, std::uint64_t seed,
                                            std::size_t domain) {
  const auto& s = model.shape();
  if (domain >= s.domains()) throw InvalidArgument("model has no domain " + std::to_string(domain));
  if (ensemble.size() != s.num_lfs || ensemble.num_classes() != s.num_classes) {
    throw InvalidArgument("ensemble does not match the model");
  }
  std::vector<datasets::LabeledPair> out;
  out.reserve(count);
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  constexpr std::size_t kChunk = 256;
  const std::size_t n = s.num_lfs;
  while (out.size() < count) {
    const std::size_t batch = std::min(kChunk, count - out.size());
    Tensor z({batch, s.latent_dim});
    for (double& v : z.data()) v = normal(rng);
    const auto g = generator_forward(model, z, engine::Mode::kInference);
    const Tensor& x = g.images[domain];
    for (std::size_t b = 0; b < batch; ++b) {
      const auto xb = x.row(b);
      const Tensor lambda = labeling::eval_ensemble(ensemble, xb);
      const auto theta = g.theta.row(b);
      labeling::LabelDistribution y = [&] {
        if (mode == Aggregation::kTheta) return lfb::aggregate_theta(theta, lambda);
        Tensor phi({n, n}, std::vector<double>(g.phi.data().begin() + b * n * n, g.phi.data().begin() + (b + 1) * n * n));
        return lfb::aggregate_theta_phi(theta, phi, lambda);
      }();
      out.push_back({std::vector<double>(xb.begin(), xb.end()), y.probs()});
    }
  }
  return out;
}

}  // namespace adp::gan
