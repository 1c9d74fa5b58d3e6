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


#include "commands.hpp"

#include <algorithm>
#include <fstream>
#include <optional>

#include <json.hpp>

#include "adp/baselines.hpp"
#include "adp/datasets.hpp"
#include "adp/engine/checkpoint.hpp"
#include "adp/error.hpp"
#include "adp/eval.hpp"
#include "adp/gan/trainer.hpp"
#include "adp/labeling.hpp"
#include "adp/lfb.hpp"
#include "adp/random.hpp"

namespace adp::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

enum Stream : std::uint64_t { kTrainData = 1, kTestData, kEnsemble, kCalibration, kModel, kTrain, kGenerate, kBaseline };

class Run {
 public:
  Run(std::string subcommand, const ExperimentConfig& config)
      : subcommand_(std::move(subcommand)), config_(config), seed_(config.get_u64("seed")),
        out_(config.get_string("out")) {}

  const ExperimentConfig& config() const { return config_; }
  std::uint64_t seed(Stream s) const { return derive_seed(seed_, s); }
  fs::path out(const std::string& name) const { return out_ / name; }

  // Hashes the file and records it as an input of this run.
  fs::path input(const std::string& key) {
    const std::string& value = config_.get_string(key);
    if (value.empty()) throw InvalidArgument("'" + key + "' is required for " + subcommand_);
    const fs::path path = resolve(value);
    inputs_[key] = {{"path", path.string()}, {"hash", file_hash(path)}};
    return path;
  }

  std::optional<fs::path> optional_input(const std::string& key) {
    if (config_.get_string(key).empty()) return std::nullopt;
    return input(key);
  }

  void begin() {
    std::error_code ec;
    fs::create_directories(out_, ec);
    if (ec || !fs::is_directory(out_)) throw IoError("cannot create output directory: " + out_.string());
  }

  void finish(const json& metrics) {
    json resolved;
    resolved["subcommand"] = subcommand_;
    resolved["config_file"] = {{"path", config_.source().string()}, {"hash", file_hash(config_.source())}};
    resolved["config_hash"] = config_.hash();
    resolved["inputs"] = inputs_;
    resolved["config"] = config_.to_json();
    write_json(out("resolved_config.json"), resolved);
    json m;
    m["subcommand"] = subcommand_;
    m["config_hash"] = config_.hash();
    m["metrics"] = metrics;
    write_json(out("metrics.json"), m);
    echo_ = resolved.dump();
  }

  const std::string& echo() const noexcept { return echo_; }

 private:
  fs::path resolve(const std::string& value) const {
    fs::path path(value);
    if (path.is_relative() && !fs::exists(path)) path = config_.source().parent_path() / path;
    if (!fs::exists(path)) throw IoError("input file not found: " + value);
    return path;
  }

  static void write_json(const fs::path& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << j.dump(2) << "\n";
    if (!out) throw IoError("write failed: " + path.string());
  }

  std::string subcommand_;
  const ExperimentConfig& config_;
  std::uint64_t seed_;
  fs::path out_;
  json inputs_ = json::object();
  std::string echo_;
};

datasets::MixtureSpec mixture_spec(const ExperimentConfig& c, std::uint64_t seed) {
  const auto offset = c.get_doubles("data.offset");
  if (c.get_string("data.layout") == "ring") {
    return datasets::ring_mixture(c.get_u64("data.modes"), c.get_double("data.radius"), c.get_double("data.sigma"),
                                  c.get_u64("data.samples_per_mode"), seed, offset);
  }
  return datasets::grid_mixture(c.get_u64("data.rows"), c.get_u64("data.cols"), c.get_double("data.spacing"),
                                c.get_double("data.sigma"), c.get_u64("data.samples_per_mode"), seed, offset);
}

datasets::Dataset head(datasets::Dataset data, std::size_t limit) {
  if (limit == 0 || limit >= data.size()) return data;
  const std::size_t d = data.dim();
  Tensor features({limit, d});
  std::copy_n(data.features.data().begin(), limit * d, features.data().begin());
  data.features = std::move(features);
  data.labels.resize(limit);
  return data;
}

struct Setup {
  std::optional<datasets::MixtureSpec> mixture;
  datasets::Dataset train;
  labeling::ClassOracle oracle;
};

Setup load_data(Run& run) {
  const auto& c = run.config();
  Setup s;
  if (c.get_string("data.kind") == "mixture") {
    s.mixture = mixture_spec(c, run.seed(kTrainData));
    s.train = datasets::make_mixture(*s.mixture);
    s.oracle = datasets::mixture_oracle(*s.mixture);
  } else {
    const auto images = run.input("data.images");
    const auto labels = run.input("data.labels");
    s.train = head(datasets::load_idx(images, labels, c.get_u64("data.num_classes")), c.get_u64("data.limit"));
    s.oracle = datasets::class_mean_oracle(s.train);
  }
  return s;
}

datasets::Dataset load_test(Run& run, const Setup& s) {
  const auto& c = run.config();
  datasets::Dataset test;
  if (s.mixture) {
    auto spec = *s.mixture;
    spec.seed = run.seed(kTestData);
    test = datasets::make_mixture(spec);
  } else {
    test = datasets::load_idx(run.input("data.test_images"), run.input("data.test_labels"),
                              c.get_u64("data.num_classes"));
  }
  Rng rng(run.seed(kTestData));
  std::vector<std::size_t> order(test.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t keep = std::min<std::size_t>(order.size(), c.get_u64("eval.max_test"));
  datasets::Dataset out;
  out.num_classes = test.num_classes;
  out.features = Tensor({keep, test.dim()});
  for (std::size_t k = 0; k < keep; ++k) {
    std::ranges::copy(test.features.row(order[k]), out.features.row(k).begin());
    out.labels.push_back(test.labels[order[k]]);
  }
  return out;
}

labeling::LfEnsemble load_ensemble(Run& run, const Setup& s) {
  auto spec = labeling::load_ensemble_spec(run.input("ensemble.spec"));
  if (spec.num_classes != s.train.num_classes) {
    throw InvalidArgument("ensemble has m = " + std::to_string(spec.num_classes) + " but the data has " +
                          std::to_string(s.train.num_classes) + " classes");
  }
  spec.seed = derive_seed(run.seed(kEnsemble), spec.seed);
  Rng rng(run.seed(kCalibration));
  const auto calibration =
      datasets::calibration_sets(s.train, run.config().get_u64("ensemble.calibration_per_class"), rng);
  return labeling::build_ensemble(spec, s.oracle, calibration, s.train.dim());
}

gan::Aggregation aggregation(const std::string& name) {
  return name == "theta_phi" ? gan::Aggregation::kThetaPhi : gan::Aggregation::kTheta;
}

json mode_metrics(const eval::ModeReport& report) {
  return {{"coverage", report.coverage}, {"fidelity", report.fidelity}, {"hits", report.hits}};
}

void cmd_train(Run& run) {
  const auto& c = run.config();
  const Setup s = load_data(run);
  const auto ensemble = load_ensemble(run, s);
  run.begin();

  gan::ModelShape shape;
  shape.data_dims = {s.train.dim()};
  shape.num_classes = s.train.num_classes;
  shape.num_lfs = ensemble.size();
  shape.latent_dim = c.get_u64("model.latent_dim");
  shape.common_width = c.get_u64("model.common_width");
  shape.common_layers = c.get_u64("model.common_layers");
  shape.image_width = c.get_u64("model.image_width");
  shape.param_width = c.get_u64("model.param_width");
  shape.disc_width = c.get_u64("model.disc_width");
  shape.dlfb_width = c.get_u64("model.dlfb_width");

  gan::TrainingConfig t;
  t.batch_size = c.get_u64("train.batch_size");
  t.d_steps = c.get_u64("train.d_steps");
  t.iterations = c.get_u64("train.iterations");
  t.learning_rate = c.get_double("train.learning_rate");
  t.beta1 = c.get_double("train.beta1");
  t.seed = run.seed(kTrain);
  t.aggregation = aggregation(c.get_string("train.aggregation"));
  t.generator_loss = c.get_string("train.generator_loss") == "saturating" ? gan::GeneratorLoss::kSaturating
                                                                           : gan::GeneratorLoss::kNonSaturating;
  t.use_dlfb = c.get_bool("train.use_dlfb");
  t.checkpoint_every = c.get_u64("train.checkpoint_every");
  t.checkpoint_dir = run.out("checkpoints");

  std::vector<gan::LossRow> losses;
  gan::AdpModel model = [&] {
    gan::AdpModel m(shape, run.seed(kModel));
    gan::Trainer trainer(m, t, {gan::Domain{&s.train, &ensemble}});
    losses = gan::train(trainer).losses;
    return m;
  }();
  engine::save_checkpoint(run.out("model.adp"), model.export_tensors());
  gan::write_loss_csv(run.out("loss.csv"), losses);

  json metrics;
  metrics["iterations"] = losses.size();
  if (!losses.empty()) {
    const auto& last = losses.back();
    metrics["final"] = {{"loss_d_image", last.loss_d_image}, {"loss_d_label", last.loss_d_label},
                        {"loss_dlfb", last.loss_dlfb},       {"loss_g_d", last.loss_g_d},
                        {"loss_g_dlfb", last.loss_g_dlfb}};
  }
  if (s.mixture) {
    const auto pairs = gan::generate(model, ensemble, c.get_u64("generate.count"),
                                     aggregation(c.get_string("generate.aggregation")), run.seed(kGenerate));
    metrics["modes"] = mode_metrics(eval::mode_coverage(pairs, s.mixture->modes, c.get_double("eval.radius")));
  }
  run.finish(metrics);
}

void cmd_generate(Run& run) {
  const auto& c = run.config();
  const Setup s = load_data(run);
  const auto ensemble = load_ensemble(run, s);
  const auto model = gan::AdpModel::from_tensors(engine::load_checkpoint(run.input("generate.checkpoint")));
  run.begin();
  const auto pairs = gan::generate(model, ensemble, c.get_u64("generate.count"),
                                   aggregation(c.get_string("generate.aggregation")), run.seed(kGenerate));
  datasets::save_pairs(run.out("pairs.csv"), pairs, s.train.dim(), s.train.num_classes);
  json metrics;
  metrics["count"] = pairs.size();
  if (s.mixture) {
    metrics["modes"] = mode_metrics(eval::mode_coverage(pairs, s.mixture->modes, c.get_double("eval.radius")));
  }
  run.finish(metrics);
}

bool vote_tie(const Tensor& lambda) {
  const std::size_t n = lambda.dim(0);
  const std::size_t m = lambda.dim(1);
  std::vector<std::size_t> counts(m, 0);
  for (std::size_t i = 0; i < n; ++i) ++counts[labeling::argmax(lambda.row(i))];
  const std::size_t top = *std::ranges::max_element(counts);
  return std::ranges::count(counts, top) > 1;
}

void cmd_aggregate(Run& run) {
  const auto& c = run.config();
  const Setup s = load_data(run);
  const auto ensemble = load_ensemble(run, s);
  const std::string method = c.get_string("aggregate.method");
  const std::size_t n = ensemble.size();
  const std::size_t m = ensemble.num_classes();

  std::vector<double> theta(n, 1.0);
  if (auto path = run.optional_input("aggregate.theta")) theta = lfb::read_vector_csv(*path);
  if (theta.size() != n) {
    throw ShapeError("theta has " + std::to_string(theta.size()) + " entries for " + std::to_string(n) +
                     " labeling functions");
  }
  std::optional<Tensor> phi;
  if (method == "theta_phi") phi = lfb::read_matrix_csv(run.input("aggregate.phi"));
  run.begin();

  const fs::path path = run.out("aggregated.csv");
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "point,true_label,majority,vote_tie,argmax";
  for (std::size_t k = 0; k < m; ++k) out << ",y_" << k;
  out << "\n";
  out.precision(17);

  std::size_t correct = 0, majority_correct = 0, ties = 0, agree = 0;
  for (std::size_t p = 0; p < s.train.size(); ++p) {
    const Tensor lambda = labeling::eval_ensemble(ensemble, s.train.features.row(p));
    const auto majority = baselines::majority_vote(lambda);
    const auto label = method == "majority" ? majority
                       : phi               ? lfb::aggregate_theta_phi(theta, *phi, lambda)
                                           : lfb::aggregate_theta(theta, lambda);
    const bool tie = vote_tie(lambda);
    const std::size_t pick = label.argmax();
    correct += pick == s.train.labels[p];
    majority_correct += majority.argmax() == s.train.labels[p];
    ties += tie;
    agree += !tie && pick == majority.argmax();
    out << p << "," << s.train.labels[p] << "," << majority.argmax() << "," << (tie ? 1 : 0) << "," << pick;
    for (double v : label.probs()) out << "," << v;
    out << "\n";
  }
  if (!out) throw IoError("write failed: " + path.string());

  const double total = static_cast<double>(s.train.size());
  json metrics;
  metrics["points"] = s.train.size();
  metrics["accuracy"] = correct / total;
  metrics["majority_accuracy"] = majority_correct / total;
  metrics["ties"] = ties;
  metrics["tie_free_agreement_with_majority"] = ties == s.train.size() ? 0.0 : agree / (total - ties);
  run.finish(metrics);
}

void cmd_baseline(Run& run) {
  const auto& c = run.config();
  const Setup s = load_data(run);
  const auto ensemble = load_ensemble(run, s);
  run.begin();
  const auto votes = baselines::votes_from_batch(labeling::eval_ensemble_batch(ensemble, s.train.features));

  baselines::DpConfig d;
  d.learning_rate = c.get_double("baseline.learning_rate");
  d.steps = c.get_u64("baseline.steps");
  d.sweeps = c.get_u64("baseline.sweeps");
  d.burn_in = c.get_u64("baseline.burn_in");
  d.theta_init = c.get_double("baseline.theta_init");
  d.batch_size = c.get_u64("baseline.batch_size");
  d.learn_phi = c.get_bool("baseline.learn_phi");
  d.seed = run.seed(kBaseline);
  const auto model = c.get_string("baseline.method") == "mle" ? baselines::fit_dp_mle(votes, d)
                                                              : baselines::fit_dp_pseudolikelihood(votes, d);
  baselines::write_factor_model_csv(run.out("factor_model.csv"), model);

  std::size_t correct = 0;
  for (std::size_t p = 0; p < votes.points; ++p) {
    correct += labeling::argmax(baselines::posterior_y(model, votes.row(p))) == s.train.labels[p];
  }
  json metrics;
  metrics["points"] = votes.points;
  metrics["posterior_accuracy"] = static_cast<double>(correct) / votes.points;
  metrics["theta"] = model.theta;
  metrics["parameter_norm"] = model.norm();
  run.finish(metrics);
}

void cmd_bench_timing(Run& run) {
  const auto& c = run.config();
  run.begin();
  eval::TimingConfig t;
  t.n_list.clear();
  for (auto n : c.get_u64s("timing.n_list")) t.n_list.push_back(n);
  t.dataset_size = c.get_u64("timing.dataset_size");
  t.trials = c.get_u64("timing.trials");
  t.num_classes = c.get_u64("timing.num_classes");
  t.steps = c.get_u64("timing.steps");
  t.seed = c.get_u64("seed");
  t.mle.sweeps = c.get_u64("timing.mle_sweeps");
  t.mle.burn_in = c.get_u64("timing.mle_burn_in");
  t.adversarial.batch_size = c.get_u64("timing.adv_batch_size");
  t.adversarial.shape.common_width = c.get_u64("timing.adv_width");
  t.adversarial.shape.param_width = c.get_u64("timing.adv_width");
  t.adversarial.shape.dlfb_width = c.get_u64("timing.adv_width");
  const auto rows = eval::time_dependency_estimation(t);
  eval::write_timing_csv(run.out("timing.csv"), rows);
  json metrics = json::array();
  for (const auto& r : rows) metrics.push_back({{"n", r.n}, {"method", r.method}, {"median_seconds", r.median_seconds}});
  run.finish({{"timing", metrics}});
}

Tensor pair_features(const std::vector<datasets::LabeledPair>& pairs, std::size_t dim) {
  Tensor x({pairs.size(), dim});
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    if (pairs[k].x.size() != dim) throw ShapeError("generated pair dimension does not match the data");
    std::ranges::copy(pairs[k].x, x.row(k).begin());
  }
  return x;
}

void cmd_eval_parzen(Run& run) {
  const auto& c = run.config();
  const auto pairs = datasets::load_pairs(run.input("eval.pairs"));
  const Setup s = load_data(run);
  const auto test = load_test(run, s);
  if (test.size() < 2) throw InvalidArgument("eval-parzen needs at least 2 test points");
  run.begin();
  const Tensor generated = pair_features(pairs, s.train.dim());
  const std::size_t half = test.size() / 2;
  const std::size_t d = test.dim();
  Tensor validation({half, d});
  Tensor scored({test.size() - half, d});
  std::copy_n(test.features.data().begin(), half * d, validation.data().begin());
  std::copy(test.features.data().begin() + half * d, test.features.data().end(), scored.data().begin());

  const auto grid = c.get_doubles("eval.sigma_grid");
  const auto choice = eval::select_bandwidth(generated, validation, grid);
  const double loglik = eval::parzen_loglik(generated, scored, choice.sigma);

  const fs::path path = run.out("parzen.csv");
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out.precision(17);
  out << "sigma,validation_loglik\n";
  for (std::size_t k = 0; k < grid.size(); ++k) out << grid[k] << "," << choice.scores[k] << "\n";
  if (!out) throw IoError("write failed: " + path.string());
  run.finish({{"sigma", choice.sigma}, {"test_loglik", loglik}, {"test_points", scored.dim(0)}});
}

void cmd_eval_modes(Run& run) {
  const auto& c = run.config();
  const auto pairs = datasets::load_pairs(run.input("eval.pairs"));
  const Setup s = load_data(run);
  if (!s.mixture) throw InvalidArgument("eval-modes needs data.kind = mixture");
  run.begin();
  const auto report = eval::mode_coverage(pairs, s.mixture->modes, c.get_double("eval.radius"));
  const fs::path path = run.out("modes.csv");
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out.precision(17);
  out << "mode,label";
  for (std::size_t k = 0; k < s.mixture->modes.front().center.size(); ++k) out << ",center_" << k;
  out << ",hits\n";
  for (std::size_t k = 0; k < report.hits.size(); ++k) {
    const auto& mode = s.mixture->modes[k];
    out << k << "," << mode.label;
    for (double v : mode.center) out << "," << v;
    out << "," << report.hits[k] << "\n";
  }
  if (!out) throw IoError("write failed: " + path.string());
  run.finish(mode_metrics(report));
}

}  // namespace

std::string run(const std::string& subcommand, const ExperimentConfig& config) {
  Run r(subcommand, config);
  if (subcommand == "train") cmd_train(r);
  else if (subcommand == "generate") cmd_generate(r);
  else if (subcommand == "aggregate") cmd_aggregate(r);
  else if (subcommand == "baseline") cmd_baseline(r);
  else if (subcommand == "bench-timing") cmd_bench_timing(r);
  else if (subcommand == "eval-parzen") cmd_eval_parzen(r);
  else if (subcommand == "eval-modes") cmd_eval_modes(r);
  else throw InvalidArgument("unknown subcommand '" + subcommand + "'");
  return r.echo();
}

}  // namespace adp::cli
