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
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "adp/engine/tensor.hpp"

namespace adp::labeling {

using FeatureVector = std::span<const double>;

// A point on the probability simplex over m classes.
class LabelDistribution {
 public:
  // Throws InvalidArgument unless every entry is in [0, 1] and the entries
  // sum to 1 within 1e-9.
  explicit LabelDistribution(std::vector<double> probs);

  static LabelDistribution uniform(std::size_t num_classes);
  static LabelDistribution one_hot(std::size_t num_classes, std::size_t k);

  const std::vector<double>& probs() const noexcept { return probs_; }
  std::size_t num_classes() const noexcept { return probs_.size(); }
  double operator[](std::size_t k) const { return probs_[k]; }
  std::size_t argmax() const;

 private:
  std::vector<double> probs_;
};

inline constexpr double kSimplexTolerance = 1e-9;

bool on_simplex(std::span<const double> probs, double tol = kSimplexTolerance);

// Index of the largest entry; ties go to the lowest index.
std::size_t argmax(std::span<const double> v);
// Unit basis vector at argmax(v).
std::vector<double> one_hot(std::span<const double> v);

enum class LfKind { kHeuristic, kFeatureThreshold, kSynthetic };

const char* kind_name(LfKind kind);

using Rule = std::function<LabelDistribution(FeatureVector)>;

// Immutable mapping from a feature vector to a label distribution.
class LabelingFunction {
 public:
  // input_dim == 0 accepts any dimensionality.
  LabelingFunction(std::string id, LfKind kind, std::size_t num_classes, std::size_t input_dim,
                   Rule rule);

  const std::string& id() const noexcept { return id_; }
  LfKind kind() const noexcept { return kind_; }
  std::size_t num_classes() const noexcept { return num_classes_; }
  std::size_t input_dim() const noexcept { return input_dim_; }

  LabelDistribution operator()(FeatureVector x) const;

 private:
  std::string id_;
  LfKind kind_;
  std::size_t num_classes_;
  std::size_t input_dim_;
  Rule rule_;
};

LabelDistribution eval_lf(const LabelingFunction& lf, FeatureVector x);

class LfEnsemble {
 public:
  explicit LfEnsemble(std::vector<LabelingFunction> functions);

  std::size_t size() const noexcept { return functions_.size(); }
  std::size_t num_classes() const noexcept { return num_classes_; }
  const LabelingFunction& operator[](std::size_t i) const { return functions_.at(i); }
  const std::vector<LabelingFunction>& functions() const noexcept { return functions_; }

  // Ensemble whose i-th function is this ensemble's order[i]-th.
  LfEnsemble permuted(std::span<const std::size_t> order) const;

 private:
  std::vector<LabelingFunction> functions_;
  std::size_t num_classes_;
};

// Λ for one point: (n, m), row i = λ_i(x).
Tensor eval_ensemble(const LfEnsemble& ensemble, FeatureVector x);
// Λ for every row of a (B, d) tensor: (B, n, m).
Tensor eval_ensemble_batch(const LfEnsemble& ensemble, const Tensor& xs);

// --- feature-threshold functions ---

using FeatureMap = std::function<std::vector<double>(FeatureVector)>;

// Mean after dropping floor(alpha * N) smallest and largest values.
double trimmed_mean(std::vector<double> values, double alpha);

struct ThresholdRule {
  std::vector<double> reference;  // per-class trimmed mean of feature norms
  double temperature = 0.0;       // mean gap between sorted references

  // Softmax of negative |reference_c - norm| / temperature; uniform when
  // all references coincide.
  LabelDistribution apply(double norm) const;
};

// calibration[c] holds the calibration points of class c.
ThresholdRule fit_threshold_rule(const FeatureMap& feature,
                                 const std::vector<std::vector<std::vector<double>>>& calibration,
                                 double alpha);

LabelingFunction make_threshold_lf(std::string id, FeatureMap feature,
                                   const std::vector<std::vector<std::vector<double>>>& calibration,
                                   double alpha, std::size_t input_dim = 0);

// --- synthetic functions with known accuracy and correlation ---

// Ground-truth class of a feature vector, used by synthetic functions.
using ClassOracle = std::function<std::size_t(FeatureVector)>;

struct SyntheticLfSpec {
  std::vector<double> accuracies;               // one per function, in (1/m, 1]
  std::vector<std::vector<std::size_t>> groups;  // partition of {0..n-1}; empty = singletons
  std::uint64_t seed = 0;
};

// Function i returns one-hot(true class) when a per-(group, point) uniform
// draw falls below a_i, and otherwise one-hot of a wrong class drawn
// uniformly per (group, point). Draws are hashed from the exact feature
// bits, so each function is deterministic.
LfEnsemble make_synthetic_ensemble(const SyntheticLfSpec& spec, std::size_t num_classes,
                                   std::size_t n, ClassOracle oracle, std::size_t input_dim = 0);

// --- ensemble specification files ---

// Line-oriented `key = value` text with `#` comments:
//   n = 4
//   m = 3
//   seed = 11
//   kind = synthetic                  (one value for all, or n comma-separated)
//   accuracy = 0.9, 0.8, 0.7, 0.6     (one value for all, or n values)
//   groups = 0,1; 2; 3                (optional, default singletons)
//   alpha = 0.1                       (threshold kind only)
struct EnsembleSpec {
  std::size_t n = 0;
  std::size_t num_classes = 0;
  std::uint64_t seed = 0;
  std::vector<LfKind> kinds;
  std::vector<double> accuracies;
  std::vector<std::vector<std::size_t>> groups;
  double alpha = 0.0;
};

EnsembleSpec parse_ensemble_spec(std::istream& in);
EnsembleSpec load_ensemble_spec(const std::filesystem::path& path);

// Builds the functions an ensemble spec describes. Synthetic functions use
// `oracle`; threshold functions calibrate on `calibration` with the identity
// feature map.
LfEnsemble build_ensemble(const EnsembleSpec& spec, const ClassOracle& oracle,
                          const std::vector<std::vector<std::vector<double>>>& calibration,
                          std::size_t input_dim);

}  // namespace adp::labeling
