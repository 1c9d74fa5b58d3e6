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


#include "adp/lfb.hpp"

#include <cstdio>
#include <fstream>
#include <map>

#include "adp/error.hpp"
#include "adp/kv.hpp"

namespace adp::lfb {

namespace {

void check_lambda(const Tensor& lambda, std::size_t n) {
  if (lambda.rank() != 2 || lambda.dim(0) != n) {
    throw ShapeError("label matrix " + shape_str(lambda.shape()) + " does not have " + std::to_string(n) +
                     " rows");
  }
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::vector<double> normalize_theta(std::span<const double> theta) {
  if (theta.empty()) throw InvalidArgument("theta is empty");
  double total = 0.0;
  for (double t : theta) {
    if (!(t >= 0.0) || !std::isfinite(t)) throw InvalidArgument("theta entries must be finite and non-negative");
    total += t;
  }
  if (!(total > 0.0)) throw InvalidArgument("theta must not be all zero");
  std::vector<double> out(theta.begin(), theta.end());
  for (double& t : out) t /= total;
  return out;
}

labeling::LabelDistribution aggregate_theta(std::span<const double> theta, const Tensor& lambda) {
  check_lambda(lambda, theta.size());
  const auto weights = normalize_theta(theta);
  const std::size_t m = lambda.dim(1);
  std::vector<double> y(m, 0.0);
  for (std::size_t i = 0; i < weights.size(); ++i) {
    for (std::size_t k = 0; k < m; ++k) y[k] += weights[i] * lambda.at(i, k);
  }
  // Rounding can leave the sum a few ulps off 1.
  double s = 0.0;
  for (double v : y) s += v;
  for (double& v : y) v /= s;
  return labeling::LabelDistribution(std::move(y));
}

labeling::LabelDistribution aggregate_theta_phi(std::span<const double> theta, const Tensor& phi,
                                                const Tensor& lambda) {
  const std::size_t n = theta.size();
  if (phi.rank() != 2 || phi.dim(0) != n || phi.dim(1) != n) {
    throw ShapeError("phi " + shape_str(phi.shape()) + " is not " + std::to_string(n) + "x" + std::to_string(n));
  }
  check_lambda(lambda, n);
  const auto weights = normalize_theta(theta);
  // w_j = Σ_i θ̃_i Φ_ji
  std::vector<double> w(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < n; ++i) w[j] += weights[i] * phi.at(j, i);
  }
  const std::size_t m = lambda.dim(1);
  std::vector<double> raw(m, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t k = 0; k < m; ++k) raw[k] += w[j] * lambda.at(j, k);
  }
  double s = 0.0;
  for (double v : raw) s += std::max(v, 0.0);
  if (!(s > 0.0)) return labeling::LabelDistribution::uniform(m);
  for (double& v : raw) v = std::max(v, 0.0) / s;
  return labeling::LabelDistribution(std::move(raw));
}

Tensor phi_agreement_counts(std::span<const double> theta, std::span<const Tensor> lambdas) {
  const std::size_t n = theta.size();
  if (n == 0) throw InvalidArgument("theta is empty");
  if (lambdas.empty()) throw InvalidArgument("Phi_real needs at least one sample");
  for (double t : theta) {
    if (!(t > 0.0)) throw InvalidArgument("Phi_real needs strictly positive theta");
  }
  Tensor counts({n, n}, 0.0);
  for (std::size_t i = 0; i < n; ++i) counts.at(i, i) = 1.0;

  std::vector<std::size_t> votes(n);
  std::vector<double> scaled;
  for (const Tensor& lambda : lambdas) {
    check_lambda(lambda, n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto row = lambda.row(i);
      scaled.assign(row.begin(), row.end());
      for (double& v : scaled) v *= theta[i];
      votes[i] = labeling::argmax(scaled);
    }
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        if (votes[i] == votes[j]) counts.at(i, j) += 1.0;
      }
    }
  }
  return counts;
}

Tensor compute_phi_real(std::span<const double> theta, std::span<const Tensor> lambdas) {
  Tensor phi = phi_agreement_counts(theta, lambdas);
  const std::size_t n = theta.size();
  for (std::size_t p = 0; p < n; ++p) {
    double s = 0.0;
    for (std::size_t u = 0; u < n; ++u) s += phi.at(p, u);
    for (std::size_t u = 0; u < n; ++u) phi.at(p, u) /= s;
  }
  Tensor out({n, n});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      out.at(i, j) = phi.at(i, j) + phi.at(j, i) - (i == j ? phi.at(i, i) : 0.0);
    }
  }
  return out;
}

Tensor compute_phi_real(std::span<const double> theta, const Tensor& lambda_batch) {
  if (lambda_batch.rank() != 3) throw ShapeError("expected a (B, n, m) label batch");
  const std::size_t batch = lambda_batch.dim(0), n = lambda_batch.dim(1), m = lambda_batch.dim(2);
  std::vector<Tensor> lambdas;
  lambdas.reserve(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    lambdas.emplace_back(Shape{n, m}, std::vector<double>(lambda_batch.data().begin() + b * n * m,
                                                          lambda_batch.data().begin() + (b + 1) * n * m));
  }
  return compute_phi_real(theta, lambdas);
}

void write_matrix_csv(const std::filesystem::path& path, const Tensor& matrix) {
  if (matrix.rank() != 2) throw ShapeError("matrix CSV needs a rank-2 tensor");
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "i,j,value\n";
  for (std::size_t i = 0; i < matrix.dim(0); ++i) {
    for (std::size_t j = 0; j < matrix.dim(1); ++j) {
      out << i << ',' << j << ',' << format_double(matrix.at(i, j)) << '\n';
    }
  }
  if (!out) throw IoError("failed writing " + path.string());
}

void write_vector_csv(const std::filesystem::path& path, std::span<const double> values) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "i,value\n";
  for (std::size_t i = 0; i < values.size(); ++i) out << i << ',' << format_double(values[i]) << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

Tensor read_matrix_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  std::size_t lineno = 1;
  if (!std::getline(in, line) || kv::trim(line) != "i,j,value") throw ParseError("expected header i,j,value", 1);
  std::map<std::pair<std::size_t, std::size_t>, double> cells;
  std::size_t rows = 0, cols = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (kv::trim(line).empty()) continue;
    const auto parts = kv::split(line, ',');
    if (parts.size() != 3) throw ParseError("expected 3 fields", lineno);
    const auto i = kv::to_u64(parts[0], lineno), j = kv::to_u64(parts[1], lineno);
    cells[{i, j}] = kv::to_double(parts[2], lineno);
    rows = std::max<std::size_t>(rows, i + 1);
    cols = std::max<std::size_t>(cols, j + 1);
  }
  if (cells.size() != rows * cols || rows == 0) throw ParseError("matrix CSV is incomplete", lineno);
  Tensor out({rows, cols});
  for (const auto& [ij, v] : cells) out.at(ij.first, ij.second) = v;
  return out;
}

std::vector<double> read_vector_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  std::size_t lineno = 1;
  if (!std::getline(in, line) || kv::trim(line) != "i,value") throw ParseError("expected header i,value", 1);
  std::map<std::size_t, double> cells;
  while (std::getline(in, line)) {
    ++lineno;
    if (kv::trim(line).empty()) continue;
    const auto parts = kv::split(line, ',');
    if (parts.size() != 2) throw ParseError("expected 2 fields", lineno);
    cells[kv::to_u64(parts[0], lineno)] = kv::to_double(parts[1], lineno);
  }
  std::vector<double> out;
  for (const auto& [i, v] : cells) {
    if (i != out.size()) throw ParseError("vector CSV has a gap at index " + std::to_string(out.size()), lineno);
    out.push_back(v);
  }
  return out;
}

}  // namespace adp::lfb
