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

#include <filesystem>
#include <random>

#include "../support/fixtures.hpp"
#include "adp/lfb.hpp"
#include "adp/random.hpp"

using namespace adp;
using namespace adp::lfb;
using testing::random_lambda;
using testing::reference_phi_real;

namespace {

Tensor matrix(std::size_t r, std::size_t c, std::vector<double> v) { return Tensor({r, c}, std::move(v)); }

}  // namespace

TEST_CASE("normalize_theta") {
  CHECK(normalize_theta(std::vector<double>{1, 1, 1, 1}) == std::vector<double>{0.25, 0.25, 0.25, 0.25});
  CHECK(normalize_theta(std::vector<double>{2, 0}) == std::vector<double>{1, 0});
  CHECK_THROWS_AS(normalize_theta(std::vector<double>{0, 0}), InvalidArgument);
  CHECK_THROWS_AS(normalize_theta(std::vector<double>{1, -1}), InvalidArgument);
  Rng rng(7);
  std::uniform_real_distribution<double> u(0.01, 3.0);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> theta(6), scaled(6);
    for (std::size_t i = 0; i < 6; ++i) scaled[i] = 5.0 * (theta[i] = u(rng));
    const auto a = normalize_theta(theta), b = normalize_theta(scaled);
    for (std::size_t i = 0; i < 6; ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-14));
  }
}

TEST_CASE("aggregate_theta examples") {
  const auto same = matrix(2, 2, {1, 0, 1, 0});
  CHECK(aggregate_theta(std::vector<double>{1, 1}, same).probs() == std::vector<double>{1, 0});
  const auto l = matrix(2, 2, {0.3, 0.7, 0.9, 0.1});
  const auto y = aggregate_theta(std::vector<double>{1, 0}, l);
  CHECK(y[0] == doctest::Approx(0.3));
  CHECK(y[1] == doctest::Approx(0.7));
  const auto z = aggregate_theta(std::vector<double>{1, 3}, matrix(2, 2, {1, 0, 0, 1}));
  CHECK(z[0] == doctest::Approx(0.25));
  CHECK(z[1] == doctest::Approx(0.75));
  CHECK_THROWS_AS(aggregate_theta(std::vector<double>{1, 1, 1}, same), ShapeError);
}

TEST_CASE("aggregate_theta_phi examples") {
  Rng rng(11);
  std::uniform_real_distribution<double> u(0.1, 2.0);
  for (int t = 0; t < 20; ++t) {
    const auto l = random_lambda(4, 3, rng);
    std::vector<double> theta{u(rng), u(rng), u(rng), u(rng)};
    Tensor eye({4, 4});
    for (std::size_t i = 0; i < 4; ++i) eye.at(i, i) = 1.0;
    const auto a = aggregate_theta(theta, l), b = aggregate_theta_phi(theta, eye, l);
    for (std::size_t k = 0; k < 3; ++k) CHECK(std::abs(a[k] - b[k]) <= 1e-12);
    CHECK(labeling::on_simplex(a.probs()));

    const auto ones = aggregate_theta_phi(std::vector<double>(4, 1.0), Tensor({4, 4}, 1.0), l);
    for (std::size_t k = 0; k < 3; ++k) {
      double mean = 0.0;
      for (std::size_t i = 0; i < 4; ++i) mean += l.at(i, k) / 4.0;
      CHECK(ones[k] == doctest::Approx(mean).epsilon(1e-12));
    }
  }
  const auto y = aggregate_theta_phi(std::vector<double>{1, 1}, matrix(2, 2, {1, 0.5, 0.5, 1}), matrix(2, 2, {1, 0, 0, 1}));
  CHECK(y[0] == doctest::Approx(0.5));
  CHECK(y[1] == doctest::Approx(0.5));
  const auto zero = aggregate_theta_phi(std::vector<double>{1, 1}, Tensor({2, 2}, 0.0), matrix(2, 2, {1, 0, 0, 1}));
  CHECK(zero.probs() == std::vector<double>{0.5, 0.5});
  CHECK_THROWS_AS(aggregate_theta_phi(std::vector<double>{1, 1}, Tensor({3, 3}, 1.0), matrix(2, 2, {1, 0, 0, 1})),
                  ShapeError);
}

TEST_CASE("phi_real traces") {
  SUBCASE("single function") {
    const std::vector<Tensor> batch{matrix(1, 2, {0.2, 0.8}), matrix(1, 2, {0.9, 0.1})};
    CHECK(compute_phi_real(std::vector<double>{2.0}, batch) == matrix(1, 1, {1.0}));
  }
  SUBCASE("two agreeing functions") {
    const std::vector<Tensor> batch{matrix(2, 2, {1, 0, 1, 0})};
    const auto pre = phi_agreement_counts(std::vector<double>{1, 1}, batch);
    CHECK(pre == matrix(2, 2, {1, 1, 0, 1}));
    CHECK(compute_phi_real(std::vector<double>{1, 1}, batch) == matrix(2, 2, {0.5, 0.5, 0.5, 1.0}));
  }
  SUBCASE("two disagreeing functions") {
    const std::vector<Tensor> batch{matrix(2, 2, {1, 0, 0, 1})};
    CHECK(compute_phi_real(std::vector<double>{1, 1}, batch) == matrix(2, 2, {1, 0, 0, 1}));
  }
  SUBCASE("non-positive theta is rejected") {
    const std::vector<Tensor> batch{matrix(2, 2, {1, 0, 0, 1})};
    CHECK_THROWS_AS(compute_phi_real(std::vector<double>{1, 0}, batch), InvalidArgument);
  }
}

TEST_CASE("phi_real matches a straight-line reimplementation and its invariants") {
  Rng rng(21);
  std::uniform_real_distribution<double> u(0.1, 2.0);
  for (int t = 0; t < 20; ++t) {
    const std::size_t n = 5, m = 3, batch_size = 16;
    std::vector<Tensor> lambdas;
    for (std::size_t b = 0; b < batch_size; ++b) lambdas.push_back(random_lambda(n, m, rng));
    std::vector<double> theta(n), scaled(n);
    for (std::size_t i = 0; i < n; ++i) scaled[i] = 10.0 * (theta[i] = u(rng));

    const auto phi = compute_phi_real(theta, lambdas);
    const auto ref = reference_phi_real(lambdas);
    for (std::size_t i = 0; i < phi.size(); ++i) CHECK(phi[i] == doctest::Approx(ref[i]).epsilon(1e-15));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) CHECK(phi.at(i, j) == phi.at(j, i));
    }
    CHECK(compute_phi_real(scaled, lambdas) == phi);

    Tensor stacked({batch_size, n, m});
    for (std::size_t b = 0; b < batch_size; ++b) {
      std::copy(lambdas[b].data().begin(), lambdas[b].data().end(), stacked.data().begin() + b * n * m);
    }
    CHECK(compute_phi_real(theta, stacked) == phi);

    const std::vector<std::size_t> perm{3, 0, 4, 1, 2};
    std::vector<Tensor> permuted;
    std::vector<double> ptheta(n);
    for (std::size_t i = 0; i < n; ++i) ptheta[i] = theta[perm[i]];
    for (const auto& l : lambdas) {
      Tensor p({n, m});
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < m; ++k) p.at(i, k) = l.at(perm[i], k);
      }
      permuted.push_back(p);
    }
    const auto counts = phi_agreement_counts(theta, lambdas);
    const auto pcounts = phi_agreement_counts(ptheta, permuted);
    const auto sym = [](const Tensor& c, std::size_t i, std::size_t j) {
      return i == j ? c.at(i, i) : c.at(std::min(i, j), std::max(i, j));
    };
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) CHECK(sym(pcounts, i, j) == sym(counts, perm[i], perm[j]));
    }
  }
}

TEST_CASE("row normalization depends on function order") {
  // Three functions that always agree: rows hold 3, 2 and 1 counted entries.
  const std::vector<Tensor> batch{matrix(3, 2, {1, 0, 1, 0, 1, 0})};
  const auto phi = compute_phi_real(std::vector<double>(3, 1.0), batch);
  CHECK(phi.at(0, 0) == doctest::Approx(1.0 / 3.0));
  CHECK(phi.at(1, 1) == doctest::Approx(0.5));
  CHECK(phi.at(2, 2) == doctest::Approx(1.0));
  CHECK(phi.at(0, 1) == doctest::Approx(1.0 / 3.0));
  CHECK(phi.at(1, 2) == doctest::Approx(0.5));
}

TEST_CASE("agreement counts never decrease when an agreeing sample is added") {
  Rng rng(5);
  std::vector<Tensor> lambdas;
  for (int b = 0; b < 8; ++b) lambdas.push_back(random_lambda(4, 2, rng));
  const std::vector<double> theta(4, 1.0);
  const auto before = phi_agreement_counts(theta, lambdas);
  lambdas.push_back(matrix(4, 2, {1, 0, 1, 0, 1, 0, 1, 0}));
  const auto after = phi_agreement_counts(theta, lambdas);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = i + 1; j < 4; ++j) CHECK(after.at(i, j) == before.at(i, j) + 1.0);
  }
}

TEST_CASE("matrix and vector CSV round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "adp_test_lfb";
  std::filesystem::create_directories(dir);
  const auto m = matrix(2, 3, {0.1, 1.0 / 3.0, 2, 3, 4e-300, 5});
  write_matrix_csv(dir / "m.csv", m);
  CHECK(read_matrix_csv(dir / "m.csv") == m);
  const std::vector<double> v{0.5, 1e-17, 2.0 / 7.0};
  write_vector_csv(dir / "v.csv", v);
  CHECK(read_vector_csv(dir / "v.csv") == v);
  CHECK_THROWS_AS(read_matrix_csv(dir / "v.csv"), ParseError);
  CHECK_THROWS_AS(read_vector_csv(dir / "missing.csv"), IoError);
  std::filesystem::remove_all(dir);
}
