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

#include <filesystem>
#include <span>
#include <vector>

#include "adp/engine/tensor.hpp"
#include "adp/labeling.hpp"

namespace adp::lfb {

// Θ (relative accuracies, length n), generated Φ and the reference Φ_real
// (both n x n).
struct DependencyState {
  std::vector<double> theta;
  Tensor phi;
  Tensor phi_real;
};

// θ_i / Σ θ_k. Rejects negative entries and an all-zero vector.
std::vector<double> normalize_theta(std::span<const double> theta);

// ỹ = Σ θ̃_i Λ_i for Λ of shape (n, m).
labeling::LabelDistribution aggregate_theta(std::span<const double> theta, const Tensor& lambda);

// ỹ = θ̃ Φᵀ Λ, renormalized to the simplex (uniform if no entry is positive).
labeling::LabelDistribution aggregate_theta_phi(std::span<const double> theta, const Tensor& phi,
                                                const Tensor& lambda);

// Pairwise argmax agreement counts over a batch of Λ matrices, (n, n),
// starting from the identity: entry (i, j), i < j, gains one for every
// sample on which one_hot(θ_i Λ_i) and one_hot(θ_j Λ_j) coincide.
Tensor phi_agreement_counts(std::span<const double> theta, std::span<const Tensor> lambdas);

// Φ_real: agreement counts, row-normalized, then completed by symmetry as
// Φ + Φᵀ - diag(Φ).
Tensor compute_phi_real(std::span<const double> theta, std::span<const Tensor> lambdas);

// Same, for a (B, n, m) batch tensor.
Tensor compute_phi_real(std::span<const double> theta, const Tensor& lambda_batch);

// CSV dumps: `i,j,value` for matrices, `i,value` for vectors.
void write_matrix_csv(const std::filesystem::path& path, const Tensor& matrix);
void write_vector_csv(const std::filesystem::path& path, std::span<const double> values);
Tensor read_matrix_csv(const std::filesystem::path& path);
std::vector<double> read_vector_csv(const std::filesystem::path& path);

}  // namespace adp::lfb
