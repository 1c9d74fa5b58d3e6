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
#include <span>
#include <string>
#include <vector>

#include "adp/baselines.hpp"
#include "adp/datasets.hpp"
#include "adp/engine/graph.hpp"
#include "adp/engine/tensor.hpp"
#include "adp/gan/dependency.hpp"

namespace adp::eval {

// Mean over test rows of log[(1/G) Σ_g N(x; x_g, σ²I)], via log-sum-exp.
double parzen_loglik(const Tensor& generated, const Tensor& test, double sigma);

struct BandwidthChoice {
  double sigma = 0.0;
  std::vector<double> scores;  // one per grid entry
};

// σ from `grid` maximizing parzen_loglik on the validation rows; ties go to
// the smallest σ.
BandwidthChoice select_bandwidth(const Tensor& generated, const Tensor& validation, std::span<const double> grid);

struct ModeReport {
  std::vector<std::size_t> hits;  // generated samples within radius, per mode
  double coverage = 0.0;
  double fidelity = 0.0;
};

// A mode counts as covered when at least 1% of the samples lie within
// `radius` of its centre. Fidelity is the fraction of pairs whose argmax ỹ
// equals the class of the nearest centre.
ModeReport mode_coverage(std::span<const datasets::LabeledPair> pairs, std::span<const datasets::MixtureMode> modes,
                         double radius);

inline constexpr double kCoverageFraction = 0.01;

struct ClassifierConfig {
  std::size_t hidden = 64;
  std::size_t steps = 2000;
  std::size_t batch_size = 64;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
};

// Two hidden layers with PReLU and a softmax output.
class Classifier {
 public:
  Classifier(std::size_t input_dim, std::size_t num_classes, const ClassifierConfig& config);

  std::size_t input_dim() const noexcept { return input_dim_; }
  std::size_t num_classes() const noexcept { return num_classes_; }
  // (B, d) -> (B, m) class probabilities.
  Tensor predict(const Tensor& x) const;

  engine::ParameterSet& params() noexcept { return params_; }
  engine::NodeId build(engine::Graph& g, engine::NodeId x) const;

 private:
  std::size_t input_dim_;
  std::size_t num_classes_;
  engine::ParameterSet params_;
};

Classifier train_reference_classifier(const datasets::Dataset& data, const ClassifierConfig& config = {});

// Mean soft-label cross-entropy -Σ_k ỹ_k log p_k(x̃), with p clamped to
// [1e-7, 1].
double downstream_xent(std::span<const datasets::LabeledPair> pairs, const Classifier& classifier);

struct TimingConfig {
  std::vector<std::size_t> n_list{35, 45, 55};
  std::size_t dataset_size = 2000;
  std::size_t trials = 5;
  std::size_t num_classes = 2;
  // Gradient steps for both methods.
  std::size_t steps = 20;
  std::uint64_t seed = 0;
  baselines::DpConfig mle;
  gan::DependencyConfig adversarial;
};

struct TimingRow {
  std::size_t n = 0;
  std::string method;  // "adversarial" or "gibbs-mle"
  double median_seconds = 0.0;
  std::vector<double> seconds;
};

// Synthetic label data per n; each trial times both estimators at the same
// gradient-step budget.
std::vector<TimingRow> time_dependency_estimation(const TimingConfig& config);

void write_timing_csv(const std::filesystem::path& path, std::span<const TimingRow> rows);

// {"metric": ..., "value": ..., "config_hash": ...}
std::string summary_json(const std::string& metric, double value, const std::string& config_hash);

double median(std::vector<double> values);

}  // namespace adp::eval
