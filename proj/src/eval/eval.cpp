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


#include "adp/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>

#include <json.hpp>

#include "adp/engine/adam.hpp"
#include "adp/engine/layers.hpp"
#include "adp/error.hpp"
#include "adp/random.hpp"

namespace adp::eval {

double parzen_loglik(const Tensor& generated, const Tensor& test, double sigma) {
  if (generated.rank() != 2 || test.rank() != 2 || generated.dim(0) == 0 || test.dim(0) == 0) {
    throw InvalidArgument("parzen estimate needs non-empty (G, d) and (T, d) sample sets");
  }
  if (generated.dim(1) != test.dim(1)) throw ShapeError("generated and test samples differ in dimensionality");
  if (!(sigma > 0.0)) throw InvalidArgument("parzen bandwidth must be positive");
  const std::size_t G = generated.dim(0), T = test.dim(0), d = test.dim(1);
  const double log_norm = -0.5 * static_cast<double>(d) * std::log(2.0 * std::numbers::pi * sigma * sigma) -
                          std::log(static_cast<double>(G));
  const double inv = 1.0 / (2.0 * sigma * sigma);
  std::vector<double> e(G);
  double total = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    const auto x = test.row(t);
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t g = 0; g < G; ++g) {
      const auto c = generated.row(g);
      double s = 0.0;
      for (std::size_t k = 0; k < d; ++k) s += (x[k] - c[k]) * (x[k] - c[k]);
      e[g] = -s * inv;
      mx = std::max(mx, e[g]);
    }
    double acc = 0.0;
    for (double v : e) acc += std::exp(v - mx);
    total += mx + std::log(acc) + log_norm;
  }
  return total / static_cast<double>(T);
}

BandwidthChoice select_bandwidth(const Tensor& generated, const Tensor& validation, std::span<const double> grid) {
  if (grid.empty()) throw InvalidArgument("bandwidth grid is empty");
  BandwidthChoice out;
  std::vector<double> sorted(grid.begin(), grid.end());
  std::sort(sorted.begin(), sorted.end());
  out.scores.reserve(grid.size());
  for (double s : grid) out.scores.push_back(parzen_loglik(generated, validation, s));
  double best = -std::numeric_limits<double>::infinity();
  for (double s : sorted) {
    const auto pos = static_cast<std::size_t>(std::find(grid.begin(), grid.end(), s) - grid.begin());
    if (out.scores[pos] > best) {
      best = out.scores[pos];
      out.sigma = s;
    }
  }
  if (!std::isfinite(best)) out.sigma = sorted.front();
  return out;
}

ModeReport mode_coverage(std::span<const datasets::LabeledPair> pairs, std::span<const datasets::MixtureMode> modes,
                         double radius) {
  if (!(radius > 0.0)) throw InvalidArgument("coverage radius must be positive");
  if (modes.empty()) throw InvalidArgument("mode list is empty");
  ModeReport report;
  report.hits.assign(modes.size(), 0);
  if (pairs.empty()) return report;
  std::size_t faithful = 0;
  for (const auto& p : pairs) {
    std::size_t nearest = 0;
    double nearest_d2 = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < modes.size(); ++k) {
      const auto& c = modes[k].center;
      if (c.size() != p.x.size()) throw ShapeError("sample and mode centre differ in dimensionality");
      double d2 = 0.0;
      for (std::size_t j = 0; j < c.size(); ++j) d2 += (p.x[j] - c[j]) * (p.x[j] - c[j]);
      if (d2 <= radius * radius) ++report.hits[k];
      if (d2 < nearest_d2) {
        nearest_d2 = d2;
        nearest = k;
      }
    }
    if (labeling::argmax(p.y) == modes[nearest].label) ++faithful;
  }
  const double need = kCoverageFraction * static_cast<double>(pairs.size());
  std::size_t covered = 0;
  for (auto h : report.hits) covered += static_cast<double>(h) >= need ? 1 : 0;
  report.coverage = static_cast<double>(covered) / static_cast<double>(modes.size());
  report.fidelity = static_cast<double>(faithful) / static_cast<double>(pairs.size());
  return report;
}

Classifier::Classifier(std::size_t input_dim, std::size_t num_classes, const ClassifierConfig& config)
    : input_dim_(input_dim), num_classes_(num_classes) {
  if (input_dim == 0 || num_classes < 2 || config.hidden == 0) throw InvalidArgument("invalid classifier shape");
  Rng rng(derive_seed(config.seed, 0xc1a5));
  engine::init_dense(params_, "clf.fc0", input_dim, config.hidden, rng);
  engine::init_prelu(params_, "clf.act0", config.hidden);
  engine::init_dense(params_, "clf.fc1", config.hidden, config.hidden, rng);
  engine::init_prelu(params_, "clf.act1", config.hidden);
  engine::init_dense(params_, "clf.out", config.hidden, num_classes, rng);
}

engine::NodeId Classifier::build(engine::Graph& g, engine::NodeId x) const {
  auto h = engine::prelu(g, params_, "clf.act0", engine::dense(g, params_, "clf.fc0", x));
  h = engine::prelu(g, params_, "clf.act1", engine::dense(g, params_, "clf.fc1", h));
  return g.softmax(engine::dense(g, params_, "clf.out", h));
}

Tensor Classifier::predict(const Tensor& x) const {
  if (x.rank() != 2 || x.dim(1) != input_dim_) {
    throw ShapeError("classifier expects (B, " + std::to_string(input_dim_) + "), got " + shape_str(x.shape()));
  }
  engine::Graph g(engine::Mode::kInference);
  return g.value(build(g, g.input("x", x)));
}

Classifier train_reference_classifier(const datasets::Dataset& data, const ClassifierConfig& config) {
  datasets::validate(data);
  Classifier clf(data.dim(), data.num_classes, config);
  engine::Adam opt({config.learning_rate, 0.9});
  Rng rng(derive_seed(config.seed, 1));
  for (std::size_t step = 0; step < config.steps; ++step) {
    const auto batch = datasets::sample_batch(data, config.batch_size, rng);
    engine::Graph g;
    const auto p = clf.build(g, g.input("x", batch.x));
    const auto loss = g.bce(p, g.constant(batch.y));
    opt.step(clf.params(), g.backward(loss));
  }
  return clf;
}

double downstream_xent(std::span<const datasets::LabeledPair> pairs, const Classifier& classifier) {
  if (pairs.empty()) throw InvalidArgument("no pairs to score");
  const std::size_t d = classifier.input_dim(), m = classifier.num_classes();
  Tensor x({pairs.size(), d});
  for (std::size_t r = 0; r < pairs.size(); ++r) {
    if (pairs[r].x.size() != d || pairs[r].y.size() != m) {
      throw ShapeError("pair " + std::to_string(r) + " does not match the classifier's dimensions");
    }
    std::copy(pairs[r].x.begin(), pairs[r].x.end(), x.data().begin() + r * d);
  }
  const Tensor p = classifier.predict(x);
  double total = 0.0;
  for (std::size_t r = 0; r < pairs.size(); ++r) {
    for (std::size_t k = 0; k < m; ++k) {
      total -= pairs[r].y[k] * std::log(std::clamp(p.at(r, k), engine::kProbEpsilon, 1.0));
    }
  }
  return total / static_cast<double>(pairs.size());
}

double median(std::vector<double> values) {
  if (values.empty()) throw InvalidArgument("median of an empty list");
  std::sort(values.begin(), values.end());
  const std::size_t h = values.size() / 2;
  return values.size() % 2 ? values[h] : 0.5 * (values[h - 1] + values[h]);
}

namespace {

// Label matrices of `count` points from independent synthetic functions
// with accuracies spread over [0.6, 0.9].
Tensor synthetic_lambdas(std::size_t n, std::size_t m, std::size_t count, std::uint64_t seed) {
  labeling::SyntheticLfSpec spec;
  spec.seed = seed;
  for (std::size_t i = 0; i < n; ++i) spec.accuracies.push_back(0.6 + 0.3 * static_cast<double>(i) / std::max<std::size_t>(n - 1, 1));
  auto oracle = [m](labeling::FeatureVector x) {
    return std::min(static_cast<std::size_t>(x[0]), m - 1);
  };
  const auto ensemble = labeling::make_synthetic_ensemble(spec, m, n, oracle, 1);
  Rng rng(derive_seed(seed, 7));
  std::uniform_real_distribution<double> u(0.0, static_cast<double>(m));
  Tensor xs({count, 1});
  for (double& v : xs.data()) v = u(rng);
  return labeling::eval_ensemble_batch(ensemble, xs);
}

template <class F>
double seconds_of(F&& f) {
  const auto t0 = std::chrono::steady_clock::now();
  f();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

std::vector<TimingRow> time_dependency_estimation(const TimingConfig& config) {
  if (config.n_list.empty() || config.trials == 0 || config.dataset_size == 0) {
    throw InvalidArgument("timing needs n values, trials and data points");
  }
  std::vector<TimingRow> rows;
  for (std::size_t n : config.n_list) {
    const Tensor lambdas = synthetic_lambdas(n, config.num_classes, config.dataset_size, derive_seed(config.seed, n));
    const auto votes = baselines::votes_from_batch(lambdas);
    TimingRow adv{n, "adversarial", 0.0, {}};
    TimingRow mle{n, "gibbs-mle", 0.0, {}};
    for (std::size_t t = 0; t < config.trials; ++t) {
      gan::DependencyConfig a = config.adversarial;
      a.steps = config.steps;
      a.seed = derive_seed(config.seed, 100 + t);
      adv.seconds.push_back(seconds_of([&] { (void)gan::estimate_dependencies(lambdas, a); }));
      baselines::DpConfig b = config.mle;
      b.steps = config.steps;
      b.seed = derive_seed(config.seed, 200 + t);
      mle.seconds.push_back(seconds_of([&] { (void)baselines::fit_dp_mle(votes, b); }));
    }
    adv.median_seconds = median(adv.seconds);
    mle.median_seconds = median(mle.seconds);
    rows.push_back(std::move(adv));
    rows.push_back(std::move(mle));
  }
  return rows;
}

void write_timing_csv(const std::filesystem::path& path, std::span<const TimingRow> rows) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "n,method,median_seconds,trials\n";
  char buf[128];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%zu,%s,%.9g,%zu\n", r.n, r.method.c_str(), r.median_seconds, r.seconds.size());
    out << buf;
  }
  if (!out) throw IoError("failed writing " + path.string());
}

std::string summary_json(const std::string& metric, double value, const std::string& config_hash) {
  nlohmann::ordered_json j;
  j["metric"] = metric;
  j["value"] = value;
  j["config_hash"] = config_hash;
  return j.dump();
}

}  // namespace adp::eval
