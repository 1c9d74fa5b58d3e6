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


#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "adp/baselines.hpp"
#include "adp/lfb.hpp"
#include "adp/random.hpp"

using namespace adp;
using namespace adp::baselines;

namespace {

Tensor one_hot_rows(std::size_t m, const std::vector<std::size_t>& votes) {
  Tensor t({votes.size(), m});
  for (std::size_t i = 0; i < votes.size(); ++i) t.at(i, votes[i]) = 1.0;
  return t;
}

VoteMatrix make_votes(std::size_t n, std::size_t m, const std::vector<std::uint32_t>& flat) {
  VoteMatrix v;
  v.functions = n;
  v.num_classes = m;
  v.points = flat.size() / n;
  v.votes = flat;
  return v;
}

// Votes of functions with the given accuracies on uniformly drawn classes.
// Functions listed in `copies` repeat the vote of function copies[i].
VoteMatrix simulate(std::size_t points, std::size_t m, const std::vector<double>& acc, std::uint64_t seed,
                    const std::vector<int>& copies = {}) {
  Rng rng(seed);
  std::uniform_int_distribution<std::uint32_t> cls(0, static_cast<std::uint32_t>(m - 1));
  std::uniform_int_distribution<std::uint32_t> wrong(1, static_cast<std::uint32_t>(m - 1));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const std::size_t n = acc.size();
  std::vector<std::uint32_t> flat(points * n);
  for (std::size_t p = 0; p < points; ++p) {
    const std::uint32_t y = cls(rng);
    for (std::size_t i = 0; i < n; ++i) {
      if (i < copies.size() && copies[i] >= 0) {
        flat[p * n + i] = flat[p * n + static_cast<std::size_t>(copies[i])];
        continue;
      }
      flat[p * n + i] = u(rng) < acc[i] ? y : (y + wrong(rng)) % static_cast<std::uint32_t>(m);
    }
  }
  return make_votes(n, m, flat);
}

VoteMatrix uniform_votes(std::size_t points, std::size_t n, std::size_t m, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_int_distribution<std::uint32_t> cls(0, static_cast<std::uint32_t>(m - 1));
  std::vector<std::uint32_t> flat(points * n);
  for (auto& v : flat) v = cls(rng);
  return make_votes(n, m, flat);
}

// Exact mean log P(votes) for small n, enumerating y and every vote vector.
double exact_loglik(const FactorModel& model, const VoteMatrix& data) {
  const std::size_t n = model.size(), m = model.num_classes;
  std::size_t configs = 1;
  for (std::size_t i = 0; i < n; ++i) configs *= m;
  auto log_sum_y = [&](std::span<const std::uint32_t> votes) {
    double mx = -INFINITY;
    std::vector<double> lp(m);
    for (std::size_t y = 0; y < m; ++y) mx = std::max(mx, lp[y] = model_logpot(model, y, votes));
    double s = 0.0;
    for (double v : lp) s += std::exp(v - mx);
    return mx + std::log(s);
  };
  double log_z = -INFINITY;
  std::vector<std::uint32_t> votes(n);
  for (std::size_t c = 0; c < configs; ++c) {
    std::size_t r = c;
    for (std::size_t i = 0; i < n; ++i, r /= m) votes[i] = static_cast<std::uint32_t>(r % m);
    const double l = log_sum_y(votes);
    log_z = std::max(log_z, l) + std::log1p(std::exp(-std::abs(log_z - l)));
  }
  double total = 0.0;
  for (std::size_t p = 0; p < data.points; ++p) total += log_sum_y(data.row(p)) - log_z;
  return total / static_cast<double>(data.points);
}

DpConfig quick_config(std::uint64_t seed) {
  DpConfig c;
  c.steps = 300;
  c.sweeps = 120;
  c.burn_in = 20;
  c.learning_rate = 0.05;
  c.batch_size = 200;
  c.seed = seed;
  return c;
}

}  // namespace

TEST_CASE("majority vote examples") {
  CHECK(majority_vote(one_hot_rows(2, {0, 1, 1})).argmax() == 1);
  CHECK(majority_vote(one_hot_rows(3, {2, 2, 2})).probs() == std::vector<double>{0, 0, 1});
  CHECK(majority_vote(one_hot_rows(4, {3, 0, 3, 0})).argmax() == 0);
  Tensor soft({2, 3}, {0.2, 0.5, 0.3, 0.1, 0.1, 0.8});
  CHECK(majority_vote(soft).argmax() == 1);
}

TEST_CASE("majority vote equals uniform-theta aggregation without ties") {
  Rng rng(4);
  std::uniform_int_distribution<std::size_t> cls(0, 2);
  std::size_t checked = 0;
  for (int t = 0; t < 2000; ++t) {
    std::vector<std::size_t> votes(5);
    std::vector<int> counts(3, 0);
    for (auto& v : votes) ++counts[v = cls(rng)];
    const int top = *std::max_element(counts.begin(), counts.end());
    if (std::count(counts.begin(), counts.end(), top) > 1) continue;
    const auto lambda = one_hot_rows(3, votes);
    const auto agg = lfb::aggregate_theta(std::vector<double>(5, 1.0), lambda);
    CHECK(majority_vote(lambda).probs() == labeling::one_hot(agg.probs()));
    ++checked;
  }
  CHECK(checked > 1000);
}

TEST_CASE("vote matrices from label tensors") {
  const std::vector<Tensor> lambdas{one_hot_rows(3, {0, 2}), one_hot_rows(3, {1, 1})};
  const auto v = votes_from_lambdas(lambdas);
  CHECK(v.points == 2);
  CHECK(v.functions == 2);
  CHECK(v.num_classes == 3);
  CHECK(v.votes == std::vector<std::uint32_t>{0, 2, 1, 1});
  Tensor batch({2, 2, 3});
  std::copy(lambdas[0].data().begin(), lambdas[0].data().end(), batch.data().begin());
  std::copy(lambdas[1].data().begin(), lambdas[1].data().end(), batch.data().begin() + 6);
  CHECK(votes_from_batch(batch).votes == v.votes);
}

TEST_CASE("log-potential examples") {
  const std::vector<std::uint32_t> votes{0, 1, 1};
  FactorModel zero(3, 2);
  for (std::size_t y = 0; y < 2; ++y) CHECK(model_logpot(zero, y, votes) == 0.0);
  FactorModel one(1, 3, 1.0);
  const std::vector<std::uint32_t> v1{2};
  CHECK(model_logpot(one, 2, v1) - model_logpot(one, 0, v1) == 2.0);
  FactorModel two(2, 2, 1.0);
  two.phi_at(0, 1) = 0.5;
  const std::vector<std::uint32_t> agree{0, 0};
  CHECK(model_logpot(two, 0, agree) == 2.5);
  CHECK(model_logpot(two, 1, agree) == -1.5);
}

TEST_CASE("flat potential gives uniform Gibbs draws") {
  const FactorModel model(2, 3);
  const auto data = make_votes(2, 3, {0, 1});
  const auto s = gibbs_sample_y(model, data, 10100, 100, 7);
  REQUIRE(s.per_point == 10000);
  std::vector<double> freq(3, 0.0);
  for (auto y : s.of(0)) freq[y] += 1e-4;
  for (double f : freq) CHECK(std::abs(f - 1.0 / 3.0) <= 0.02);
}

TEST_CASE("Gibbs marginals match exact enumeration on all small fixtures") {
  Rng rng(12);
  std::normal_distribution<double> nd(0.0, 1.0);
  double worst = 0.0;
  for (std::size_t n = 1; n <= 3; ++n) {
    for (std::size_t m = 2; m <= 3; ++m) {
      FactorModel model(n, m);
      for (double& t : model.theta) t = nd(rng);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) model.phi_at(i, j) = nd(rng);
      }
      std::size_t configs = 1;
      for (std::size_t i = 0; i < n; ++i) configs *= m;
      std::vector<std::uint32_t> flat;
      for (std::size_t c = 0; c < configs; ++c) {
        std::size_t r = c;
        for (std::size_t i = 0; i < n; ++i, r /= m) flat.push_back(static_cast<std::uint32_t>(r % m));
      }
      const auto data = make_votes(n, m, flat);
      const auto samples = gibbs_sample_y(model, data, 10100, 100, derive_seed(n, m));
      for (std::size_t p = 0; p < data.points; ++p) {
        const auto exact = posterior_y(model, data.row(p));
        std::vector<double> freq(m, 0.0);
        for (auto y : samples.of(p)) freq[y] += 1.0 / static_cast<double>(samples.per_point);
        double tv = 0.0;
        for (std::size_t k = 0; k < m; ++k) tv += 0.5 * std::abs(freq[k] - exact[k]);
        worst = std::max(worst, tv);
      }
    }
  }
  CHECK(worst <= 0.02);
}

TEST_CASE("Gibbs streams are seed-deterministic") {
  FactorModel model(3, 2, 0.7, 0.2);
  const auto data = simulate(50, 2, {0.8, 0.7, 0.6}, 3);
  const auto a = gibbs_sample_y(model, data, 200, 50, 5);
  const auto b = gibbs_sample_y(model, data, 200, 50, 5);
  const auto c = gibbs_sample_y(model, data, 200, 50, 6);
  CHECK(a.y == b.y);
  CHECK(a.y != c.y);
  CHECK_THROWS_AS(gibbs_sample_y(model, data, 50, 50, 5), InvalidArgument);
}

TEST_SUITE("label model fitting") {
  TEST_CASE("fitted accuracies follow the true ordering") {
    const auto data = simulate(2000, 2, {0.9, 0.6, 0.75}, 21);
    for (bool mle : {true, false}) {
      CAPTURE(mle);
      auto c = quick_config(1);
      c.learn_phi = false;
      const auto fit = mle ? fit_dp_mle(data, c) : fit_dp_pseudolikelihood(data, c);
      CHECK(fit.theta[0] > fit.theta[1]);
      CHECK(fit.theta[0] > fit.theta[2]);
      CHECK(fit.theta[2] > fit.theta[1]);
    }
  }

  TEST_CASE("a perfectly correlated pair gets the largest dependency weight") {
    const auto data = simulate(2000, 2, {0.8, 0.7, 0.7, 0.75}, 22, {-1, -1, 1, -1});
    for (bool mle : {true, false}) {
      CAPTURE(mle);
      const auto fit = mle ? fit_dp_mle(data, quick_config(2)) : fit_dp_pseudolikelihood(data, quick_config(2));
      double best = -INFINITY;
      std::pair<std::size_t, std::size_t> arg;
      for (std::size_t i = 0; i < 4; ++i) {
        for (std::size_t j = i + 1; j < 4; ++j) {
          if (fit.phi_at(i, j) > best) {
            best = fit.phi_at(i, j);
            arg = {i, j};
          }
        }
      }
      CHECK(arg == std::pair<std::size_t, std::size_t>{1, 2});
    }
  }

  TEST_CASE("uniform random votes carry no accuracy signal") {
    const auto data = uniform_votes(2000, 4, 2, 23);
    for (bool mle : {true, false}) {
      CAPTURE(mle);
      auto c = quick_config(3);
      c.theta_init = 0.0;
      const auto fit = mle ? fit_dp_mle(data, c) : fit_dp_pseudolikelihood(data, c);
      for (double t : fit.theta) CHECK(std::abs(t) <= 0.1);
    }
  }

  TEST_CASE("MLE improves the exact likelihood over most windows") {
    const auto data = simulate(1000, 2, {0.85, 0.65, 0.75}, 24);
    auto c = quick_config(4);
    c.theta_init = 0.0;
    c.learning_rate = 0.01;
    std::vector<double> ll;
    for (std::size_t steps = 0; steps <= 500; steps += 50) {
      c.steps = steps;
      ll.push_back(exact_loglik(fit_dp_mle(data, c), data));
    }
    std::size_t violations = 0;
    for (std::size_t w = 1; w + 1 < ll.size(); ++w) violations += ll[w + 1] < ll[w - 1];
    CHECK(ll.back() > ll.front());
    CHECK(static_cast<double>(violations) <= 0.2 * static_cast<double>(ll.size() - 2));
  }

  TEST_CASE("divergence is reported") {
    const auto data = simulate(200, 2, {1.0, 1.0, 1.0}, 25);
    auto c = quick_config(5);
    c.learning_rate = 1e4;
    CHECK_THROWS_AS(fit_dp_mle(data, c), NumericError);
  }
}

TEST_CASE("factor model CSV") {
  FactorModel model(2, 2, 0.5);
  model.phi_at(0, 1) = -0.25;
  const auto path = std::filesystem::temp_directory_path() / "adp_test_factor.csv";
  write_factor_model_csv(path, model);
  std::ifstream in(path);
  std::string header, t0, t1, p01, extra;
  std::getline(in, header);
  std::getline(in, t0);
  std::getline(in, t1);
  std::getline(in, p01);
  CHECK(header == "kind,i,j,value");
  CHECK(t0 == "theta,0,,0.5");
  CHECK(p01 == "phi,0,1,-0.25");
  CHECK_FALSE(static_cast<bool>(std::getline(in, extra)));
  std::filesystem::remove(path);
}
