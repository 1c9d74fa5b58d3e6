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


#include "adp/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "adp/error.hpp"
#include "adp/random.hpp"

namespace adp::baselines {

labeling::LabelDistribution majority_vote(const Tensor& lambda) {
  if (lambda.rank() != 2) throw ShapeError("majority vote expects an (n, m) label matrix, got " + shape_str(lambda.shape()));
  const std::size_t n = lambda.dim(0), m = lambda.dim(1);
  std::vector<double> counts(m, 0.0);
  for (std::size_t i = 0; i < n; ++i) counts[labeling::argmax(lambda.row(i))] += 1.0;
  return labeling::LabelDistribution::one_hot(m, labeling::argmax(counts));
}

VoteMatrix votes_from_lambdas(std::span<const Tensor> lambdas) {
  if (lambdas.empty()) throw InvalidArgument("vote matrix needs at least one point");
  VoteMatrix out;
  out.points = lambdas.size();
  out.functions = lambdas[0].dim(0);
  out.num_classes = lambdas[0].dim(1);
  out.votes.reserve(out.points * out.functions);
  for (const auto& lam : lambdas) {
    if (lam.shape() != lambdas[0].shape()) throw ShapeError("label matrices differ in shape");
    for (std::size_t i = 0; i < out.functions; ++i) {
      out.votes.push_back(static_cast<std::uint32_t>(labeling::argmax(lam.row(i))));
    }
  }
  return out;
}

VoteMatrix votes_from_batch(const Tensor& lambdas) {
  if (lambdas.rank() != 3) throw ShapeError("expected (N, n, m) label matrices, got " + shape_str(lambdas.shape()));
  VoteMatrix out;
  out.points = lambdas.dim(0);
  out.functions = lambdas.dim(1);
  out.num_classes = lambdas.dim(2);
  const std::size_t m = out.num_classes;
  const auto data = lambdas.data();
  out.votes.reserve(out.points * out.functions);
  for (std::size_t r = 0; r < out.points * out.functions; ++r) {
    out.votes.push_back(static_cast<std::uint32_t>(labeling::argmax(data.subspan(r * m, m))));
  }
  return out;
}

FactorModel::FactorModel(std::size_t n, std::size_t m, double theta0, double phi0)
    : num_classes(m), theta(n, theta0), phi(n * n, 0.0) {
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) phi_at(i, j) = phi0;
  }
}

double FactorModel::norm() const {
  double s = 0.0;
  for (double t : theta) s += t * t;
  const std::size_t n = size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) s += phi_at(i, j) * phi_at(i, j);
  }
  return std::sqrt(s);
}

namespace {

void check_votes(const FactorModel& model, std::span<const std::uint32_t> votes) {
  if (votes.size() != model.size()) throw ShapeError("expected " + std::to_string(model.size()) + " votes");
  for (auto v : votes) {
    if (v >= model.num_classes) throw InvalidArgument("vote " + std::to_string(v) + " is not a valid class");
  }
}

void check_data(const VoteMatrix& data) {
  if (data.points == 0 || data.functions == 0 || data.num_classes < 2) {
    throw InvalidArgument("vote matrix needs points, functions and at least two classes");
  }
  if (data.votes.size() != data.points * data.functions) throw ShapeError("vote matrix size mismatch");
  for (auto v : data.votes) {
    if (v >= data.num_classes) throw InvalidArgument("vote " + std::to_string(v) + " is not a valid class");
  }
}

void check_config(const DpConfig& c) {
  if (!(c.learning_rate > 0.0)) throw InvalidArgument("learning rate must be positive");
  if (c.sweeps <= c.burn_in) throw InvalidArgument("sweeps must exceed burn_in");
}

// In-place softmax; returns nothing, probs sum to 1.
void softmax_inplace(std::vector<double>& v) {
  const double mx = *std::max_element(v.begin(), v.end());
  double s = 0.0;
  for (double& x : v) s += (x = std::exp(x - mx));
  for (double& x : v) x /= s;
}

std::size_t draw(const std::vector<double>& probs, Rng& rng) {
  double u = unit_interval(rng());
  for (std::size_t k = 0; k + 1 < probs.size(); ++k) {
    if (u < probs[k]) return k;
    u -= probs[k];
  }
  return probs.size() - 1;
}

// Unnormalized log P(y | votes) up to the vote-only terms.
void accuracy_logits(const FactorModel& model, std::span<const std::uint32_t> votes, std::vector<double>& out) {
  const std::size_t m = model.num_classes;
  out.assign(m, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < votes.size(); ++i) {
    out[votes[i]] += 2.0 * model.theta[i];
    total += model.theta[i];
  }
  for (double& x : out) x -= total;
}

std::vector<double> symmetric_phi(const FactorModel& model) {
  const std::size_t n = model.size();
  std::vector<double> s(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) s[i * n + j] = s[j * n + i] = model.phi_at(i, j);
  }
  return s;
}

void check_divergence(const FactorModel& model, std::size_t step, const char* method) {
  const double norm = model.norm();
  if (!std::isfinite(norm) || norm > 1e3) {
    const double tmax = *std::max_element(model.theta.begin(), model.theta.end(),
                                          [](double a, double b) { return std::abs(a) < std::abs(b); });
    char buf[256];
    std::snprintf(buf, sizeof buf, "%s diverged at step %zu: weight norm %.6g, largest |theta| %.6g", method, step,
                  norm, std::abs(tmax));
    throw NumericError(buf);
  }
}

std::vector<std::size_t> pick_batch(const VoteMatrix& data, std::size_t batch_size, Rng& rng) {
  std::vector<std::size_t> idx;
  if (batch_size == 0 || batch_size >= data.points) {
    idx.resize(data.points);
    for (std::size_t p = 0; p < data.points; ++p) idx[p] = p;
    return idx;
  }
  std::uniform_int_distribution<std::size_t> pick(0, data.points - 1);
  idx.resize(batch_size);
  for (auto& p : idx) p = pick(rng);
  return idx;
}

}  // namespace

double model_logpot(const FactorModel& model, std::size_t y, std::span<const std::uint32_t> votes) {
  check_votes(model, votes);
  if (y >= model.num_classes) throw InvalidArgument("class " + std::to_string(y) + " out of range");
  const std::size_t n = model.size();
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += model.theta[i] * (votes[i] == y ? 1.0 : -1.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) s += model.phi_at(i, j) * (votes[i] == votes[j] ? 1.0 : -1.0);
  }
  return s;
}

std::vector<double> posterior_y(const FactorModel& model, std::span<const std::uint32_t> votes) {
  check_votes(model, votes);
  std::vector<double> p;
  accuracy_logits(model, votes, p);
  softmax_inplace(p);
  return p;
}

GibbsSamples gibbs_sample_y(const FactorModel& model, const VoteMatrix& data, std::size_t sweeps,
                            std::size_t burn_in, std::uint64_t seed) {
  if (sweeps <= burn_in) throw InvalidArgument("sweeps must exceed burn_in");
  check_data(data);
  if (data.functions != model.size() || data.num_classes != model.num_classes) {
    throw ShapeError("vote matrix does not match the factor model");
  }
  GibbsSamples out;
  out.points = data.points;
  out.per_point = sweeps - burn_in;
  out.y.resize(out.points * out.per_point);
  std::vector<double> probs;
  for (std::size_t p = 0; p < data.points; ++p) {
    accuracy_logits(model, data.row(p), probs);
    softmax_inplace(probs);
    Rng rng(derive_seed(seed, p));
    for (std::size_t s = 0; s < sweeps; ++s) {
      const auto y = static_cast<std::uint32_t>(draw(probs, rng));
      if (s >= burn_in) out.y[p * out.per_point + (s - burn_in)] = y;
    }
  }
  return out;
}

FactorModel fit_dp_mle(const VoteMatrix& data, const DpConfig& config) {
  check_data(data);
  check_config(config);
  const std::size_t n = data.functions, m = data.num_classes;
  FactorModel model(n, m, config.theta_init);

  // The agreement term of the data does not involve y.
  std::vector<double> agree_data(n * n, 0.0);
  if (config.learn_phi) {
    for (std::size_t p = 0; p < data.points; ++p) {
      const auto v = data.row(p);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) agree_data[i * n + j] += v[i] == v[j] ? 1.0 : -1.0;
      }
    }
    for (double& a : agree_data) a /= static_cast<double>(data.points);
  }

  Rng rng(derive_seed(config.seed, 0));
  Rng chain_rng(derive_seed(config.seed, 1));
  std::uint32_t chain_y = 0;
  std::vector<std::uint32_t> chain_v(n);
  {
    std::uniform_int_distribution<std::uint32_t> cls(0, static_cast<std::uint32_t>(m - 1));
    chain_y = cls(chain_rng);
    for (auto& v : chain_v) v = cls(chain_rng);
  }

  const std::size_t kept = config.sweeps - config.burn_in;
  std::vector<double> probs, scores(m), w(m);
  std::vector<double> pos_theta(n), neg_theta(n), neg_agree(n * n);
  std::vector<std::size_t> hits(m);
  for (std::size_t step = 0; step < config.steps; ++step) {
    const auto batch = pick_batch(data, config.batch_size, rng);
    const auto phi = symmetric_phi(model);

    // Positive phase: y drawn from P(y | votes) for every point in the batch.
    std::fill(pos_theta.begin(), pos_theta.end(), 0.0);
    for (std::size_t p : batch) {
      const auto v = data.row(p);
      accuracy_logits(model, v, probs);
      softmax_inplace(probs);
      Rng point_rng(derive_seed(derive_seed(config.seed, step + 2), p));
      std::fill(hits.begin(), hits.end(), 0);
      for (std::size_t s = 0; s < config.sweeps; ++s) {
        const std::size_t y = draw(probs, point_rng);
        if (s >= config.burn_in) ++hits[y];
      }
      for (std::size_t i = 0; i < n; ++i) pos_theta[i] += 2.0 * static_cast<double>(hits[v[i]]) / kept - 1.0;
    }
    for (double& g : pos_theta) g /= static_cast<double>(batch.size());

    // Negative phase: joint chain over (y, votes).
    std::fill(neg_theta.begin(), neg_theta.end(), 0.0);
    std::fill(neg_agree.begin(), neg_agree.end(), 0.0);
    for (std::size_t s = 0; s < config.sweeps; ++s) {
      accuracy_logits(model, chain_v, probs);
      softmax_inplace(probs);
      chain_y = static_cast<std::uint32_t>(draw(probs, chain_rng));
      for (std::size_t i = 0; i < n; ++i) {
        std::fill(w.begin(), w.end(), 0.0);
        double row_total = 0.0;
        const double* phi_i = phi.data() + i * n;
        for (std::size_t j = 0; j < n; ++j) {
          if (j == i) continue;
          w[chain_v[j]] += phi_i[j];
          row_total += phi_i[j];
        }
        for (std::size_t c = 0; c < m; ++c) {
          scores[c] = model.theta[i] * (c == chain_y ? 1.0 : -1.0) + 2.0 * w[c] - row_total;
        }
        softmax_inplace(scores);
        chain_v[i] = static_cast<std::uint32_t>(draw(scores, chain_rng));
      }
      if (s < config.burn_in) continue;
      for (std::size_t i = 0; i < n; ++i) neg_theta[i] += chain_v[i] == chain_y ? 1.0 : -1.0;
      if (config.learn_phi) {
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = i + 1; j < n; ++j) neg_agree[i * n + j] += chain_v[i] == chain_v[j] ? 1.0 : -1.0;
        }
      }
    }

    for (std::size_t i = 0; i < n; ++i) {
      model.theta[i] += config.learning_rate * (pos_theta[i] - neg_theta[i] / kept);
    }
    if (config.learn_phi) {
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
          model.phi_at(i, j) += config.learning_rate * (agree_data[i * n + j] - neg_agree[i * n + j] / kept);
        }
      }
    }
    check_divergence(model, step, "fit_dp_mle");
  }
  return model;
}

FactorModel fit_dp_pseudolikelihood(const VoteMatrix& data, const DpConfig& config) {
  check_data(data);
  check_config(config);
  const std::size_t n = data.functions, m = data.num_classes;
  FactorModel model(n, m, config.theta_init);
  Rng rng(derive_seed(config.seed, 0));

  std::vector<double> p1, total(m), joint(m * m), py(m), pc(m), w(m);
  std::vector<double> g_theta(n), g_phi(n * n);
  for (std::size_t step = 0; step < config.steps; ++step) {
    const auto batch = pick_batch(data, config.batch_size, rng);
    const auto phi = symmetric_phi(model);
    std::fill(g_theta.begin(), g_theta.end(), 0.0);
    std::fill(g_phi.begin(), g_phi.end(), 0.0);
    for (std::size_t p : batch) {
      const auto v = data.row(p);
      accuracy_logits(model, v, total);
      p1 = total;
      softmax_inplace(p1);
      for (std::size_t i = 0; i < n; ++i) {
        // log-potential over (y, c = vote_i), other votes fixed
        std::fill(w.begin(), w.end(), 0.0);
        double row_total = 0.0;
        const double* phi_i = phi.data() + i * n;
        for (std::size_t j = 0; j < n; ++j) {
          if (j == i) continue;
          w[v[j]] += phi_i[j];
          row_total += phi_i[j];
        }
        double mx = -INFINITY;
        for (std::size_t y = 0; y < m; ++y) {
          const double rest = total[y] - model.theta[i] * (v[i] == y ? 1.0 : -1.0);
          for (std::size_t c = 0; c < m; ++c) {
            const double lp = rest + model.theta[i] * (c == y ? 1.0 : -1.0) + 2.0 * w[c] - row_total;
            joint[y * m + c] = lp;
            mx = std::max(mx, lp);
          }
        }
        double z = 0.0;
        for (double& x : joint) z += (x = std::exp(x - mx));
        std::fill(py.begin(), py.end(), 0.0);
        std::fill(pc.begin(), pc.end(), 0.0);
        double pdiag = 0.0;
        for (std::size_t y = 0; y < m; ++y) {
          for (std::size_t c = 0; c < m; ++c) {
            const double q = joint[y * m + c] / z;
            py[y] += q;
            pc[c] += q;
            if (c == y) pdiag += q;
          }
        }
        for (std::size_t j = 0; j < n; ++j) {
          if (j == i) {
            g_theta[i] += 2.0 * (p1[v[i]] - pdiag);
            continue;
          }
          g_theta[j] += 2.0 * (p1[v[j]] - py[v[j]]);
          if (config.learn_phi) {
            const double a = v[i] == v[j] ? 1.0 : -1.0;
            g_phi[std::min(i, j) * n + std::max(i, j)] += a - (2.0 * pc[v[j]] - 1.0);
          }
        }
      }
    }
    const double scale = config.learning_rate / static_cast<double>(batch.size());
    for (std::size_t i = 0; i < n; ++i) model.theta[i] += scale * g_theta[i];
    if (config.learn_phi) {
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) model.phi_at(i, j) += scale * g_phi[i * n + j];
      }
    }
    check_divergence(model, step, "fit_dp_pseudolikelihood");
  }
  return model;
}

void write_factor_model_csv(const std::filesystem::path& path, const FactorModel& model) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "kind,i,j,value\n";
  char buf[128];
  for (std::size_t i = 0; i < model.size(); ++i) {
    std::snprintf(buf, sizeof buf, "theta,%zu,,%.17g\n", i, model.theta[i]);
    out << buf;
  }
  for (std::size_t i = 0; i < model.size(); ++i) {
    for (std::size_t j = i + 1; j < model.size(); ++j) {
      std::snprintf(buf, sizeof buf, "phi,%zu,%zu,%.17g\n", i, j, model.phi_at(i, j));
      out << buf;
    }
  }
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace adp::baselines
