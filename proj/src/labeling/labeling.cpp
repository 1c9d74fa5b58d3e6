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


#include "adp/labeling.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "adp/error.hpp"
#include "adp/kv.hpp"
#include "adp/random.hpp"

namespace adp::labeling {

bool on_simplex(std::span<const double> probs, double tol) {
  if (probs.empty()) return false;
  double s = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0 && p <= 1.0)) return false;
    s += p;
  }
  return std::abs(s - 1.0) <= tol;
}

LabelDistribution::LabelDistribution(std::vector<double> probs) : probs_(std::move(probs)) {
  if (!on_simplex(probs_)) throw InvalidArgument("label distribution is not on the probability simplex");
}

LabelDistribution LabelDistribution::uniform(std::size_t num_classes) {
  if (num_classes == 0) throw InvalidArgument("label distribution needs at least one class");
  return LabelDistribution(std::vector<double>(num_classes, 1.0 / static_cast<double>(num_classes)));
}

LabelDistribution LabelDistribution::one_hot(std::size_t num_classes, std::size_t k) {
  if (k >= num_classes) throw InvalidArgument("one-hot index out of range");
  std::vector<double> p(num_classes, 0.0);
  p[k] = 1.0;
  return LabelDistribution(std::move(p));
}

std::size_t LabelDistribution::argmax() const { return labeling::argmax(probs_); }

std::size_t argmax(std::span<const double> v) {
  if (v.empty()) throw InvalidArgument("argmax of an empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

std::vector<double> one_hot(std::span<const double> v) {
  std::vector<double> out(v.size(), 0.0);
  out[argmax(v)] = 1.0;
  return out;
}

const char* kind_name(LfKind kind) {
  switch (kind) {
    case LfKind::kHeuristic: return "heuristic";
    case LfKind::kFeatureThreshold: return "threshold";
    case LfKind::kSynthetic: return "synthetic";
  }
  return "unknown";
}

LabelingFunction::LabelingFunction(std::string id, LfKind kind, std::size_t num_classes,
                                   std::size_t input_dim, Rule rule)
    : id_(std::move(id)), kind_(kind), num_classes_(num_classes), input_dim_(input_dim), rule_(std::move(rule)) {
  if (num_classes_ == 0) throw InvalidArgument("labeling function '" + id_ + "' needs m >= 1");
  if (!rule_) throw InvalidArgument("labeling function '" + id_ + "' has no rule");
}

LabelDistribution LabelingFunction::operator()(FeatureVector x) const {
  if (input_dim_ != 0 && x.size() != input_dim_) {
    throw ShapeError("labeling function '" + id_ + "' expects " + std::to_string(input_dim_) +
                     " features, got " + std::to_string(x.size()));
  }
  LabelDistribution out = rule_(x);
  if (out.num_classes() != num_classes_) {
    throw InvalidArgument("labeling function '" + id_ + "' returned the wrong number of classes");
  }
  return out;
}

LabelDistribution eval_lf(const LabelingFunction& lf, FeatureVector x) { return lf(x); }

LfEnsemble::LfEnsemble(std::vector<LabelingFunction> functions) : functions_(std::move(functions)) {
  if (functions_.empty()) throw InvalidArgument("an ensemble needs at least one labeling function");
  num_classes_ = functions_.front().num_classes();
  for (const auto& f : functions_) {
    if (f.num_classes() != num_classes_) {
      throw InvalidArgument("labeling function '" + f.id() + "' disagrees on the number of classes");
    }
  }
}

LfEnsemble LfEnsemble::permuted(std::span<const std::size_t> order) const {
  if (order.size() != size()) throw InvalidArgument("permutation size mismatch");
  std::vector<LabelingFunction> out;
  out.reserve(size());
  for (auto i : order) out.push_back(functions_.at(i));
  return LfEnsemble(std::move(out));
}

Tensor eval_ensemble(const LfEnsemble& ensemble, FeatureVector x) {
  const std::size_t n = ensemble.size(), m = ensemble.num_classes();
  Tensor out({n, m});
  for (std::size_t i = 0; i < n; ++i) {
    const auto p = ensemble[i](x);
    std::copy(p.probs().begin(), p.probs().end(), out.row(i).begin());
  }
  return out;
}

Tensor eval_ensemble_batch(const LfEnsemble& ensemble, const Tensor& xs) {
  if (xs.rank() != 2) throw ShapeError("eval_ensemble_batch expects a (B, d) tensor");
  const std::size_t batch = xs.dim(0), n = ensemble.size(), m = ensemble.num_classes();
  Tensor out({batch, n, m});
  for (std::size_t b = 0; b < batch; ++b) {
    const Tensor lam = eval_ensemble(ensemble, xs.row(b));
    std::copy(lam.data().begin(), lam.data().end(), out.data().begin() + b * n * m);
  }
  return out;
}

double trimmed_mean(std::vector<double> values, double alpha) {
  if (values.empty()) throw InvalidArgument("trimmed mean of an empty set");
  if (!(alpha >= 0.0 && alpha < 0.5)) throw InvalidArgument("trim fraction must lie in [0, 0.5)");
  std::sort(values.begin(), values.end());
  const auto drop = static_cast<std::size_t>(std::floor(alpha * static_cast<double>(values.size())));
  const auto first = values.begin() + static_cast<std::ptrdiff_t>(drop);
  const auto last = values.end() - static_cast<std::ptrdiff_t>(drop);
  return std::accumulate(first, last, 0.0) / static_cast<double>(last - first);
}

LabelDistribution ThresholdRule::apply(double norm) const {
  const std::size_t m = reference.size();
  if (!(temperature > 0.0)) return LabelDistribution::uniform(m);
  std::vector<double> logits(m);
  for (std::size_t c = 0; c < m; ++c) logits[c] = -std::abs(reference[c] - norm) / temperature;
  const double mx = *std::max_element(logits.begin(), logits.end());
  double s = 0.0;
  for (double& v : logits) s += (v = std::exp(v - mx));
  for (double& v : logits) v /= s;
  return LabelDistribution(std::move(logits));
}

namespace {
double l2_norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}
}  // namespace

ThresholdRule fit_threshold_rule(const FeatureMap& feature,
                                 const std::vector<std::vector<std::vector<double>>>& calibration,
                                 double alpha) {
  if (calibration.empty()) throw InvalidArgument("threshold rule needs at least one class");
  if (!(alpha >= 0.0 && alpha <= 0.4)) throw InvalidArgument("trim fraction alpha must lie in [0, 0.4]");
  ThresholdRule rule;
  for (std::size_t c = 0; c < calibration.size(); ++c) {
    if (calibration[c].empty()) throw InvalidArgument("class " + std::to_string(c) + " has no calibration samples");
    if (calibration[c].size() < 3) {
      throw InvalidArgument("class " + std::to_string(c) + " needs at least 3 calibration samples");
    }
    std::vector<double> norms;
    norms.reserve(calibration[c].size());
    for (const auto& x : calibration[c]) norms.push_back(l2_norm(feature(x)));
    rule.reference.push_back(trimmed_mean(std::move(norms), alpha));
  }
  std::vector<double> sorted = rule.reference;
  std::sort(sorted.begin(), sorted.end());
  if (sorted.size() > 1) {
    rule.temperature = (sorted.back() - sorted.front()) / static_cast<double>(sorted.size() - 1);
  }
  return rule;
}

LabelingFunction make_threshold_lf(std::string id, FeatureMap feature,
                                   const std::vector<std::vector<std::vector<double>>>& calibration,
                                   double alpha, std::size_t input_dim) {
  ThresholdRule rule = fit_threshold_rule(feature, calibration, alpha);
  const std::size_t m = rule.reference.size();
  return LabelingFunction(std::move(id), LfKind::kFeatureThreshold, m, input_dim,
                          [rule = std::move(rule), feature = std::move(feature)](FeatureVector x) {
                            const auto f = feature(x);
                            return rule.apply(l2_norm(f));
                          });
}

LfEnsemble make_synthetic_ensemble(const SyntheticLfSpec& spec, std::size_t num_classes, std::size_t n,
                                   ClassOracle oracle, std::size_t input_dim) {
  if (n == 0) throw InvalidArgument("synthetic ensemble needs n >= 1");
  if (num_classes < 2) throw InvalidArgument("synthetic ensemble needs m >= 2");
  if (spec.accuracies.size() != n) throw InvalidArgument("synthetic ensemble needs one accuracy per function");
  if (!oracle) throw InvalidArgument("synthetic ensemble needs a class oracle");
  const double chance = 1.0 / static_cast<double>(num_classes);
  for (double a : spec.accuracies) {
    if (!(a > chance && a <= 1.0)) throw InvalidArgument("synthetic accuracies must lie in (1/m, 1]");
  }

  std::vector<std::size_t> group_of(n, n);
  if (spec.groups.empty()) {
    std::iota(group_of.begin(), group_of.end(), 0);
  } else {
    for (std::size_t g = 0; g < spec.groups.size(); ++g) {
      for (auto i : spec.groups[g]) {
        if (i >= n || group_of[i] != n) throw InvalidArgument("correlation groups must partition {0..n-1}");
        group_of[i] = g;
      }
    }
    if (std::count(group_of.begin(), group_of.end(), n) != 0) {
      throw InvalidArgument("correlation groups must partition {0..n-1}");
    }
  }

  auto shared_oracle = std::make_shared<const ClassOracle>(std::move(oracle));
  std::vector<LabelingFunction> fns;
  fns.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double accuracy = spec.accuracies[i];
    const std::uint64_t group_seed = derive_seed(spec.seed, group_of[i]);
    fns.emplace_back("synthetic_" + std::to_string(i), LfKind::kSynthetic, num_classes, input_dim,
                     [=](FeatureVector x) {
                       const std::size_t truth = (*shared_oracle)(x);
                       if (truth >= num_classes) throw InvalidArgument("class oracle returned an invalid class");
                       const std::uint64_t h = hash_values(x, group_seed);
                       if (unit_interval(h) < accuracy) return LabelDistribution::one_hot(num_classes, truth);
                       auto wrong = static_cast<std::size_t>(unit_interval(splitmix64(h)) *
                                                             static_cast<double>(num_classes - 1));
                       wrong = std::min(wrong, num_classes - 2);
                       if (wrong >= truth) ++wrong;
                       return LabelDistribution::one_hot(num_classes, wrong);
                     });
  }
  return LfEnsemble(std::move(fns));
}

EnsembleSpec parse_ensemble_spec(std::istream& in) {
  EnsembleSpec spec;
  std::string kinds_text = "synthetic", accuracy_text, groups_text;
  std::size_t kinds_line = 0, accuracy_line = 0, groups_line = 0, n_line = 0;
  bool have_n = false, have_m = false;
  for (const auto& e : kv::parse(in)) {
    if (e.key == "n") {
      spec.n = kv::to_u64(e.value, e.line);
      have_n = true;
      n_line = e.line;
    } else if (e.key == "m") {
      spec.num_classes = kv::to_u64(e.value, e.line);
      have_m = true;
    } else if (e.key == "seed") {
      spec.seed = kv::to_u64(e.value, e.line);
    } else if (e.key == "kind") {
      kinds_text = e.value;
      kinds_line = e.line;
    } else if (e.key == "accuracy") {
      accuracy_text = e.value;
      accuracy_line = e.line;
    } else if (e.key == "groups") {
      groups_text = e.value;
      groups_line = e.line;
    } else if (e.key == "alpha") {
      spec.alpha = kv::to_double(e.value, e.line);
    } else {
      throw ParseError("unknown ensemble key '" + e.key + "'", e.line);
    }
  }
  if (!have_n || spec.n == 0) throw ParseError("ensemble spec needs n >= 1", n_line);
  if (!have_m || spec.num_classes < 2) throw ParseError("ensemble spec needs m >= 2", 0);

  for (const auto& k : kv::split(kinds_text, ',')) {
    if (k == "synthetic") spec.kinds.push_back(LfKind::kSynthetic);
    else if (k == "threshold") spec.kinds.push_back(LfKind::kFeatureThreshold);
    else throw ParseError("unsupported labeling function kind '" + k + "'", kinds_line);
  }
  if (spec.kinds.size() == 1) spec.kinds.assign(spec.n, spec.kinds.front());
  if (spec.kinds.size() != spec.n) throw ParseError("kind needs 1 or n entries", kinds_line);

  if (!accuracy_text.empty()) spec.accuracies = kv::to_doubles(accuracy_text, accuracy_line);
  if (spec.accuracies.size() == 1) spec.accuracies.assign(spec.n, spec.accuracies.front());
  const bool any_synthetic = std::count(spec.kinds.begin(), spec.kinds.end(), LfKind::kSynthetic) > 0;
  if (any_synthetic && spec.accuracies.size() != spec.n) {
    throw ParseError("accuracy needs 1 or n entries", accuracy_line);
  }

  if (!groups_text.empty()) {
    for (const auto& g : kv::split(groups_text, ';')) {
      std::vector<std::size_t> members;
      for (auto v : kv::to_u64s(g, groups_line)) members.push_back(v);
      spec.groups.push_back(std::move(members));
    }
  }
  return spec;
}

EnsembleSpec load_ensemble_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open ensemble spec: " + path.string());
  return parse_ensemble_spec(in);
}

LfEnsemble build_ensemble(const EnsembleSpec& spec, const ClassOracle& oracle,
                          const std::vector<std::vector<std::vector<double>>>& calibration,
                          std::size_t input_dim) {
  std::vector<double> accuracies = spec.accuracies;
  if (accuracies.empty()) accuracies.assign(spec.n, 1.0);
  SyntheticLfSpec synth{accuracies, spec.groups, spec.seed};
  LfEnsemble synthetic = make_synthetic_ensemble(synth, spec.num_classes, spec.n, oracle, input_dim);

  std::vector<LabelingFunction> fns;
  for (std::size_t i = 0; i < spec.n; ++i) {
    if (spec.kinds[i] == LfKind::kSynthetic) {
      fns.push_back(synthetic[i]);
    } else {
      if (calibration.size() != spec.num_classes) {
        throw InvalidArgument("threshold labeling functions need calibration data for every class");
      }
      fns.push_back(make_threshold_lf(
          "threshold_" + std::to_string(i),
          [](FeatureVector x) { return std::vector<double>(x.begin(), x.end()); }, calibration, spec.alpha,
          input_dim));
    }
  }
  return LfEnsemble(std::move(fns));
}

}  // namespace adp::labeling
