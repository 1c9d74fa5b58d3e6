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
#include <vector>

#include "adp/engine/tensor.hpp"
#include "adp/labeling.hpp"

namespace adp::baselines {

// One-hot of the most-voted class, each function voting for the argmax of
// its row. Ties go to the lowest class index.
labeling::LabelDistribution majority_vote(const Tensor& lambda);

// Argmax votes of a dataset: N points by n functions.
struct VoteMatrix {
  std::size_t points = 0;
  std::size_t functions = 0;
  std::size_t num_classes = 0;
  std::vector<std::uint32_t> votes;  // row-major (points, functions)

  std::span<const std::uint32_t> row(std::size_t p) const {
    return {votes.data() + p * functions, functions};
  }
};

VoteMatrix votes_from_lambdas(std::span<const Tensor> lambdas);
// From a (N, n, m) batch of label matrices.
VoteMatrix votes_from_batch(const Tensor& lambdas);

// Accuracy factors θ_i·s_i(y) and pairwise agreement factors φ_ij·a_ij with
// ±1 indicators.
struct FactorModel {
  std::size_t num_classes = 0;
  std::vector<double> theta;  // n
  std::vector<double> phi;    // n*n, only entries with i < j are used

  FactorModel() = default;
  FactorModel(std::size_t n, std::size_t num_classes, double theta0 = 0.0, double phi0 = 0.0);

  std::size_t size() const noexcept { return theta.size(); }
  double& phi_at(std::size_t i, std::size_t j) { return phi[i * size() + j]; }
  double phi_at(std::size_t i, std::size_t j) const { return phi[i * size() + j]; }
  double norm() const;
};

double model_logpot(const FactorModel& model, std::size_t y, std::span<const std::uint32_t> votes);

// P(y | votes), exact over the m classes.
std::vector<double> posterior_y(const FactorModel& model, std::span<const std::uint32_t> votes);

// Post-burn-in draws of y for each point: (points, sweeps - burn_in).
struct GibbsSamples {
  std::size_t points = 0;
  std::size_t per_point = 0;
  std::vector<std::uint32_t> y;

  std::span<const std::uint32_t> of(std::size_t p) const { return {y.data() + p * per_point, per_point}; }
};

GibbsSamples gibbs_sample_y(const FactorModel& model, const VoteMatrix& data, std::size_t sweeps,
                            std::size_t burn_in, std::uint64_t seed);

struct DpConfig {
  double learning_rate = 0.01;
  std::size_t steps = 500;
  std::size_t sweeps = 1100;
  std::size_t burn_in = 100;
  double theta_init = 0.5;
  // Points per gradient step; 0 uses the whole dataset.
  std::size_t batch_size = 0;
  std::uint64_t seed = 0;
  bool learn_phi = true;
};

// Stochastic gradient ascent on the marginal likelihood of the observed
// votes. The positive phase samples y given each point's votes; the
// negative phase runs a joint (y, votes) chain. Throws NumericError when
// the weight norm exceeds 1e3.
FactorModel fit_dp_mle(const VoteMatrix& data, const DpConfig& config);

// Gradient ascent on the sum of log P(vote_i | other votes), each term
// computed exactly by enumerating y and vote_i.
FactorModel fit_dp_pseudolikelihood(const VoteMatrix& data, const DpConfig& config);

// CSV with header kind,i,j,value; theta rows leave j empty.
void write_factor_model_csv(const std::filesystem::path& path, const FactorModel& model);

}  // namespace adp::baselines
