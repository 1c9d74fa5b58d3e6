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


#include "adp/engine/graph.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Core>

namespace adp::engine {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMatrix = Eigen::Map<RowMatrix>;
using ConstMapMatrix = Eigen::Map<const RowMatrix>;
using ConstMapVector = Eigen::Map<const Eigen::RowVectorXd>;

ConstMapMatrix as_matrix(const Tensor& t, std::size_t rows, std::size_t cols) {
  return ConstMapMatrix(t.data().data(), static_cast<Eigen::Index>(rows),
                        static_cast<Eigen::Index>(cols));
}

MapMatrix as_matrix(Tensor& t, std::size_t rows, std::size_t cols) {
  return MapMatrix(t.data().data(), static_cast<Eigen::Index>(rows),
                   static_cast<Eigen::Index>(cols));
}

double sigmoid_of(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus_of(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double clamp_prob(double p) { return std::clamp(p, kProbEpsilon, 1.0 - kProbEpsilon); }

}  // namespace

const char* op_name(Op op) {
  switch (op) {
    case Op::kInput: return "input";
    case Op::kParameter: return "parameter";
    case Op::kConstant: return "constant";
    case Op::kAffine: return "affine";
    case Op::kPRelu: return "prelu";
    case Op::kSigmoid: return "sigmoid";
    case Op::kTanh: return "tanh";
    case Op::kSoftplus: return "softplus";
    case Op::kSoftmax: return "softmax";
    case Op::kBatchNorm: return "batch_norm";
    case Op::kConcat: return "concat";
    case Op::kAdd: return "add";
    case Op::kMul: return "mul";
    case Op::kScale: return "scale";
    case Op::kMean: return "mean";
    case Op::kBce: return "bce";
    case Op::kBatchMatmul: return "batch_matmul";
    case Op::kReshape: return "reshape";
    case Op::kNormalizeRows: return "normalize_rows";
    case Op::kDetach: return "detach";
  }
  return "unknown";
}

double bce(double score, double target) {
  const double s = clamp_prob(score);
  return -(target * std::log(s) + (1.0 - target) * std::log(1.0 - s));
}

const Graph::Node& Graph::node(NodeId id) const {
  if (id >= nodes_.size()) throw InvalidArgument("unknown node id " + std::to_string(id));
  return nodes_[id];
}

const Tensor& Graph::value(NodeId id) const {
  const Node& n = node(id);
  return n.external ? *n.external : n.value;
}

void Graph::shape_fail(NodeId id, Op op, const std::string& detail) const {
  throw ShapeError("op " + std::to_string(id) + " (" + op_name(op) + "): " + detail);
}

NodeId Graph::push(Node n) {
  for (NodeId in : n.inputs) {
    if (in >= nodes_.size()) {
      throw InvalidArgument("op " + std::to_string(nodes_.size()) + " consumes unknown node " +
                            std::to_string(in));
    }
    if (nodes_[in].requires_grad) n.requires_grad = true;
  }
  if (n.op == Op::kDetach) n.requires_grad = false;
  nodes_.push_back(std::move(n));
  const NodeId id = nodes_.size() - 1;
  try {
    evaluate(id);
  } catch (...) {
    nodes_.pop_back();
    throw;
  }
  return id;
}

NodeId Graph::input(std::string name, Tensor value, bool requires_grad) {
  if (!value.all_finite()) {
    throw NumericError("op " + std::to_string(nodes_.size()) + " (input '" + name +
                       "'): non-finite values");
  }
  Node n{.op = Op::kInput, .name = std::move(name), .value = std::move(value)};
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return nodes_.size() - 1;
}

NodeId Graph::parameter(const std::string& name, const Tensor& value) {
  if (auto it = parameters_.find(name); it != parameters_.end()) return it->second;
  Node n{.op = Op::kParameter, .name = name};
  n.requires_grad = true;
  n.external = &value;
  nodes_.push_back(std::move(n));
  parameters_[name] = nodes_.size() - 1;
  return nodes_.size() - 1;
}

NodeId Graph::constant(Tensor value) {
  nodes_.push_back(Node{.op = Op::kConstant, .value = std::move(value)});
  return nodes_.size() - 1;
}

NodeId Graph::affine(NodeId x, NodeId w, NodeId b) { return push({.op = Op::kAffine, .inputs = {x, w, b}}); }
NodeId Graph::prelu(NodeId x, NodeId slope) { return push({.op = Op::kPRelu, .inputs = {x, slope}}); }
NodeId Graph::sigmoid(NodeId x) { return push({.op = Op::kSigmoid, .inputs = {x}}); }
NodeId Graph::tanh(NodeId x) { return push({.op = Op::kTanh, .inputs = {x}}); }
NodeId Graph::softplus(NodeId x) { return push({.op = Op::kSoftplus, .inputs = {x}}); }
NodeId Graph::softmax(NodeId x) { return push({.op = Op::kSoftmax, .inputs = {x}}); }
NodeId Graph::batch_norm(NodeId x, NodeId gamma, NodeId beta, NodeId running_mean,
                         NodeId running_var) {
  return push({.op = Op::kBatchNorm, .inputs = {x, gamma, beta, running_mean, running_var}});
}
NodeId Graph::concat(NodeId a, NodeId b) { return push({.op = Op::kConcat, .inputs = {a, b}}); }
NodeId Graph::add(NodeId a, NodeId b) { return push({.op = Op::kAdd, .inputs = {a, b}}); }
NodeId Graph::mul(NodeId a, NodeId b) { return push({.op = Op::kMul, .inputs = {a, b}}); }
NodeId Graph::scale(NodeId a, double factor) {
  return push({.op = Op::kScale, .inputs = {a}, .attr = factor});
}
NodeId Graph::mean(NodeId a) { return push({.op = Op::kMean, .inputs = {a}}); }
NodeId Graph::bce(NodeId score, NodeId target) { return push({.op = Op::kBce, .inputs = {score, target}}); }
NodeId Graph::batch_matmul(NodeId a, NodeId b, bool transpose_b) {
  return push({.op = Op::kBatchMatmul, .inputs = {a, b}, .flag = transpose_b});
}
NodeId Graph::reshape(NodeId a, Shape shape) {
  Node n{.op = Op::kReshape, .inputs = {a}};
  n.value = Tensor(std::move(shape));
  return push(std::move(n));
}
NodeId Graph::normalize_rows(NodeId a) { return push({.op = Op::kNormalizeRows, .inputs = {a}}); }
NodeId Graph::detach(NodeId a) { return push({.op = Op::kDetach, .inputs = {a}}); }

void Graph::evaluate(NodeId id) {
  Node& n = nodes_[id];
  auto in = [&](std::size_t k) -> const Tensor& { return value(n.inputs[k]); };

  switch (n.op) {
    case Op::kInput:
    case Op::kParameter:
    case Op::kConstant:
      return;

    case Op::kAffine: {
      const Tensor& x = in(0);
      const Tensor& w = in(1);
      const Tensor& b = in(2);
      if (x.rank() != 2 || w.rank() != 2 || x.dim(1) != w.dim(0) || b.size() != w.dim(1)) {
        shape_fail(id, n.op, "x" + shape_str(x.shape()) + " w" + shape_str(w.shape()) + " b" +
                                 shape_str(b.shape()));
      }
      const std::size_t rows = x.dim(0), cols = w.dim(1);
      if (n.value.shape() != Shape{rows, cols}) n.value = Tensor({rows, cols});
      auto out = as_matrix(n.value, rows, cols);
      out.noalias() = as_matrix(x, rows, x.dim(1)) * as_matrix(w, w.dim(0), cols);
      out.rowwise() += ConstMapVector(b.data().data(), static_cast<Eigen::Index>(cols));
      break;
    }

    case Op::kPRelu: {
      const Tensor& x = in(0);
      const Tensor& a = in(1);
      const std::size_t f = x.shape().back();
      if (a.size() != 1 && a.size() != f) {
        shape_fail(id, n.op, "slope" + shape_str(a.shape()) + " for x" + shape_str(x.shape()));
      }
      n.value = x;
      auto out = n.value.data();
      for (std::size_t i = 0; i < out.size(); ++i) {
        if (out[i] <= 0.0) out[i] *= a[a.size() == 1 ? 0 : i % f];
      }
      break;
    }

    case Op::kSigmoid: {
      n.value = in(0);
      auto v = n.value.data();
      Eigen::Map<Eigen::ArrayXd> a(v.data(), static_cast<Eigen::Index>(v.size()));
      const Eigen::ArrayXd e = (-a.abs()).exp();
      // 1 / (1 + e) for x >= 0 and e / (1 + e) otherwise, without branches.
      for (Eigen::Index i = 0; i < a.size(); ++i) a[i] = std::max(e[i], double(a[i] >= 0.0)) / (1.0 + e[i]);
      break;
    }

    case Op::kTanh:
    case Op::kSoftplus: {
      n.value = in(0);
      for (double& v : n.value.data()) {
        v = n.op == Op::kSigmoid ? sigmoid_of(v) : n.op == Op::kTanh ? std::tanh(v) : softplus_of(v);
      }
      break;
    }

    case Op::kSoftmax: {
      n.value = in(0);
      const std::size_t w = n.value.shape().back();
      for (std::size_t r = 0; r < n.value.size() / w; ++r) {
        auto row = n.value.row(r);
        const double mx = *std::max_element(row.begin(), row.end());
        double s = 0.0;
        for (double& v : row) s += (v = std::exp(v - mx));
        for (double& v : row) v /= s;
      }
      break;
    }

    case Op::kBatchNorm: {
      const Tensor& x = in(0);
      if (x.rank() != 2) shape_fail(id, n.op, "x" + shape_str(x.shape()) + " must be rank 2");
      const std::size_t rows = x.dim(0), f = x.dim(1);
      for (std::size_t k = 1; k < 5; ++k) {
        if (in(k).size() != f) shape_fail(id, n.op, "statistics width mismatch at input " + std::to_string(k));
      }
      const Tensor& gamma = in(1);
      const Tensor& beta = in(2);
      n.value = x;
      if (mode_ == Mode::kTraining && rows == 1) {
        n.cache.clear();
        break;
      }
      // cache layout: [inv_std (f) | xhat (rows*f)]
      n.cache.assign(f + rows * f, 0.0);
      for (std::size_t c = 0; c < f; ++c) {
        double mu, var;
        if (mode_ == Mode::kTraining) {
          mu = 0.0;
          for (std::size_t r = 0; r < rows; ++r) mu += x.at(r, c);
          mu /= static_cast<double>(rows);
          var = 0.0;
          for (std::size_t r = 0; r < rows; ++r) var += (x.at(r, c) - mu) * (x.at(r, c) - mu);
          var /= static_cast<double>(rows);
        } else {
          mu = in(3)[c];
          var = in(4)[c];
        }
        const double inv = 1.0 / std::sqrt(var + kBatchNormEpsilon);
        n.cache[c] = inv;
        for (std::size_t r = 0; r < rows; ++r) {
          const double xhat = (x.at(r, c) - mu) * inv;
          n.cache[f + r * f + c] = xhat;
          n.value.at(r, c) = gamma[c] * xhat + beta[c];
        }
      }
      break;
    }

    case Op::kConcat: {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      if (a.rank() != 2 || b.rank() != 2 || a.dim(0) != b.dim(0)) {
        shape_fail(id, n.op, shape_str(a.shape()) + " vs " + shape_str(b.shape()));
      }
      const std::size_t rows = a.dim(0), p = a.dim(1), q = b.dim(1);
      n.value = Tensor({rows, p + q});
      for (std::size_t r = 0; r < rows; ++r) {
        std::copy_n(a.row(r).begin(), p, n.value.row(r).begin());
        std::copy_n(b.row(r).begin(), q, n.value.row(r).begin() + p);
      }
      break;
    }

    case Op::kAdd:
    case Op::kMul: {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      if (a.shape() != b.shape()) shape_fail(id, n.op, shape_str(a.shape()) + " vs " + shape_str(b.shape()));
      n.value = a;
      auto out = n.value.data();
      for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = n.op == Op::kAdd ? out[i] + b[i] : out[i] * b[i];
      }
      break;
    }

    case Op::kScale:
      n.value = in(0);
      for (double& v : n.value.data()) v *= n.attr;
      break;

    case Op::kMean:
      n.value = Tensor::scalar(in(0).sum() / static_cast<double>(in(0).size()));
      break;

    case Op::kBce: {
      const Tensor& s = in(0);
      const Tensor& t = in(1);
      if (s.size() != t.size()) shape_fail(id, n.op, shape_str(s.shape()) + " vs " + shape_str(t.shape()));
      double total = 0.0;
      for (std::size_t i = 0; i < s.size(); ++i) total += engine::bce(s[i], t[i]);
      n.value = Tensor::scalar(total / static_cast<double>(s.size()));
      break;
    }

    case Op::kBatchMatmul: {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      if (a.rank() != 3 || b.rank() != 3 || a.dim(0) != b.dim(0)) {
        shape_fail(id, n.op, shape_str(a.shape()) + " x " + shape_str(b.shape()));
      }
      const std::size_t batch = a.dim(0), p = a.dim(1), q = a.dim(2);
      const std::size_t bq = n.flag ? b.dim(2) : b.dim(1);
      const std::size_t r = n.flag ? b.dim(1) : b.dim(2);
      if (bq != q) shape_fail(id, n.op, shape_str(a.shape()) + " x " + shape_str(b.shape()));
      n.value = Tensor({batch, p, r});
      for (std::size_t k = 0; k < batch; ++k) {
        auto lhs = ConstMapMatrix(a.data().data() + k * p * q, p, q);
        auto out = MapMatrix(n.value.data().data() + k * p * r, p, r);
        if (n.flag) {
          out.noalias() = lhs * ConstMapMatrix(b.data().data() + k * r * q, r, q).transpose();
        } else {
          out.noalias() = lhs * ConstMapMatrix(b.data().data() + k * q * r, q, r);
        }
      }
      break;
    }

    case Op::kReshape: {
      Shape target = n.value.shape();
      if (shape_size(target) != in(0).size()) {
        shape_fail(id, n.op, shape_str(in(0).shape()) + " -> " + shape_str(target));
      }
      n.value = in(0).reshaped(std::move(target));
      break;
    }

    case Op::kNormalizeRows: {
      n.value = in(0);
      const std::size_t w = n.value.shape().back();
      const std::size_t rows = n.value.size() / w;
      n.cache.assign(rows, 0.0);
      for (std::size_t r = 0; r < rows; ++r) {
        auto row = n.value.row(r);
        double s = 0.0;
        for (double v : row) s += v;
        n.cache[r] = s;
        for (double& v : row) v = s > 0.0 ? v / s : 1.0 / static_cast<double>(w);
      }
      break;
    }

    case Op::kDetach:
      n.value = in(0);
      break;
  }

  if (!n.value.all_finite()) {
    throw NumericError("op " + std::to_string(id) + " (" + op_name(n.op) + "): non-finite values");
  }
}

void Graph::forward(const NamedTensors& inputs) {
  for (NodeId id = 0; id < nodes_.size(); ++id) {
    Node& n = nodes_[id];
    if (n.op == Op::kInput) {
      auto it = inputs.find(n.name);
      if (it == inputs.end()) {
        throw InvalidArgument("op " + std::to_string(id) + " (input): missing value for '" + n.name + "'");
      }
      if (it->second.shape() != n.value.shape()) {
        shape_fail(id, n.op, "input '" + n.name + "' expects " + shape_str(n.value.shape()) + ", got " +
                                 shape_str(it->second.shape()));
      }
      if (!it->second.all_finite()) {
        throw NumericError("op " + std::to_string(id) + " (input '" + n.name + "'): non-finite values");
      }
      n.value = it->second;
    } else {
      evaluate(id);
    }
  }
  has_grads_ = false;
}

Tensor Graph::grad(NodeId id) const {
  const Node& n = node(id);
  if (!has_grads_) throw InvalidArgument("grad() requires a preceding backward()");
  if (!n.requires_grad) return Tensor(value(id).shape(), 0.0);
  return n.grad;
}

Gradients Graph::backward(NodeId loss) {
  if (value(loss).size() != 1) {
    throw InvalidArgument("backward: loss node " + std::to_string(loss) + " is not scalar, shape " +
                          shape_str(value(loss).shape()));
  }
  for (Node& n : nodes_) {
    if (!n.requires_grad) {
      n.grad = Tensor();
      continue;
    }
    const Tensor& v = n.external ? *n.external : n.value;
    if (n.grad.shape() == v.shape()) {
      n.grad.fill(0.0);
    } else {
      n.grad = Tensor(v.shape(), 0.0);
    }
  }
  has_grads_ = true;
  nodes_[loss].grad[0] = 1.0;
  for (NodeId id = loss + 1; id-- > 0;) {
    if (nodes_[id].requires_grad) propagate(id);
  }

  Gradients out;
  for (const auto& [name, id] : parameters_) out[name] = nodes_[id].grad;
  return out;
}

void Graph::propagate(NodeId id) {
  Node& n = nodes_[id];
  const Tensor& dy = n.grad;
  auto in = [&](std::size_t k) -> const Tensor& { return value(n.inputs[k]); };
  auto wants = [&](std::size_t k) { return nodes_[n.inputs[k]].requires_grad; };
  auto g = [&](std::size_t k) -> Tensor& { return nodes_[n.inputs[k]].grad; };

  switch (n.op) {
    case Op::kInput:
    case Op::kParameter:
    case Op::kConstant:
    case Op::kDetach:
      return;

    case Op::kAffine: {
      const Tensor& x = in(0);
      const Tensor& w = in(1);
      const std::size_t rows = x.dim(0), k = w.dim(0), cols = w.dim(1);
      auto dym = as_matrix(dy, rows, cols);
      if (wants(0)) as_matrix(g(0), rows, k).noalias() += dym * as_matrix(w, k, cols).transpose();
      if (wants(1)) as_matrix(g(1), k, cols).noalias() += as_matrix(x, rows, k).transpose() * dym;
      if (wants(2)) as_matrix(g(2), 1, cols) += dym.colwise().sum();
      break;
    }

    case Op::kPRelu: {
      const Tensor& x = in(0);
      const Tensor& a = in(1);
      const std::size_t f = x.shape().back();
      for (std::size_t i = 0; i < x.size(); ++i) {
        const std::size_t ai = a.size() == 1 ? 0 : i % f;
        if (x[i] > 0.0) {
          if (wants(0)) g(0)[i] += dy[i];
        } else {
          if (wants(0)) g(0)[i] += a[ai] * dy[i];
          if (wants(1)) g(1)[ai] += x[i] * dy[i];
        }
      }
      break;
    }

    case Op::kSigmoid:
      if (wants(0)) {
        for (std::size_t i = 0; i < dy.size(); ++i) g(0)[i] += dy[i] * n.value[i] * (1.0 - n.value[i]);
      }
      break;

    case Op::kTanh:
      if (wants(0)) {
        for (std::size_t i = 0; i < dy.size(); ++i) g(0)[i] += dy[i] * (1.0 - n.value[i] * n.value[i]);
      }
      break;

    case Op::kSoftplus:
      if (wants(0)) {
        const Tensor& x = in(0);
        for (std::size_t i = 0; i < dy.size(); ++i) g(0)[i] += dy[i] * sigmoid_of(x[i]);
      }
      break;

    case Op::kSoftmax:
      if (wants(0)) {
        const std::size_t w = n.value.shape().back();
        for (std::size_t r = 0; r < n.value.size() / w; ++r) {
          auto y = n.value.row(r);
          auto d = dy.row(r);
          double dot = 0.0;
          for (std::size_t j = 0; j < w; ++j) dot += d[j] * y[j];
          auto gx = g(0).row(r);
          for (std::size_t j = 0; j < w; ++j) gx[j] += y[j] * (d[j] - dot);
        }
      }
      break;

    case Op::kBatchNorm: {
      const Tensor& x = in(0);
      const std::size_t rows = x.dim(0), f = x.dim(1);
      if (n.cache.empty()) {  // identity pass-through
        if (wants(0)) {
          for (std::size_t i = 0; i < dy.size(); ++i) g(0)[i] += dy[i];
        }
        break;
      }
      const Tensor& gamma = in(1);
      const double count = static_cast<double>(rows);
      for (std::size_t c = 0; c < f; ++c) {
        const double inv = n.cache[c];
        double sum_dy = 0.0, sum_dy_xhat = 0.0;
        for (std::size_t r = 0; r < rows; ++r) {
          const double xhat = n.cache[f + r * f + c];
          sum_dy += dy.at(r, c);
          sum_dy_xhat += dy.at(r, c) * xhat;
        }
        if (wants(1)) g(1)[c] += sum_dy_xhat;
        if (wants(2)) g(2)[c] += sum_dy;
        if (!wants(0)) continue;
        for (std::size_t r = 0; r < rows; ++r) {
          const double xhat = n.cache[f + r * f + c];
          if (mode_ == Mode::kTraining) {
            g(0).at(r, c) += gamma[c] * inv / count * (count * dy.at(r, c) - sum_dy - xhat * sum_dy_xhat);
          } else {
            g(0).at(r, c) += gamma[c] * inv * dy.at(r, c);
          }
        }
      }
      break;
    }

    case Op::kConcat: {
      const std::size_t rows = in(0).dim(0), p = in(0).dim(1), q = in(1).dim(1);
      for (std::size_t r = 0; r < rows; ++r) {
        auto d = dy.row(r);
        if (wants(0)) {
          auto ga = g(0).row(r);
          for (std::size_t j = 0; j < p; ++j) ga[j] += d[j];
        }
        if (wants(1)) {
          auto gb = g(1).row(r);
          for (std::size_t j = 0; j < q; ++j) gb[j] += d[p + j];
        }
      }
      break;
    }

    case Op::kAdd:
      for (std::size_t k = 0; k < 2; ++k) {
        if (!wants(k)) continue;
        for (std::size_t i = 0; i < dy.size(); ++i) g(k)[i] += dy[i];
      }
      break;

    case Op::kMul:
      if (wants(0)) {
        for (std::size_t i = 0; i < dy.size(); ++i) g(0)[i] += dy[i] * in(1)[i];
      }
      if (wants(1)) {
        for (std::size_t i = 0; i < dy.size(); ++i) g(1)[i] += dy[i] * in(0)[i];
      }
      break;

    case Op::kScale:
      if (wants(0)) {
        for (std::size_t i = 0; i < dy.size(); ++i) g(0)[i] += dy[i] * n.attr;
      }
      break;

    case Op::kMean:
      if (wants(0)) {
        const double share = dy[0] / static_cast<double>(in(0).size());
        for (double& v : g(0).data()) v += share;
      }
      break;

    case Op::kBce:
      if (wants(0)) {
        const Tensor& s = in(0);
        const Tensor& t = in(1);
        const double scale = dy[0] / static_cast<double>(s.size());
        for (std::size_t i = 0; i < s.size(); ++i) {
          if (s[i] < kProbEpsilon || s[i] > 1.0 - kProbEpsilon) continue;
          g(0)[i] += scale * (-t[i] / s[i] + (1.0 - t[i]) / (1.0 - s[i]));
        }
      }
      break;

    case Op::kBatchMatmul: {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      const std::size_t batch = a.dim(0), p = a.dim(1), q = a.dim(2);
      const std::size_t r = n.value.dim(2);
      for (std::size_t k = 0; k < batch; ++k) {
        auto d = ConstMapMatrix(dy.data().data() + k * p * r, p, r);
        auto lhs = ConstMapMatrix(a.data().data() + k * p * q, p, q);
        if (n.flag) {  // out = A B^T, B is (r, q)
          auto rhs = ConstMapMatrix(b.data().data() + k * r * q, r, q);
          if (wants(0)) MapMatrix(g(0).data().data() + k * p * q, p, q).noalias() += d * rhs;
          if (wants(1)) MapMatrix(g(1).data().data() + k * r * q, r, q).noalias() += d.transpose() * lhs;
        } else {
          auto rhs = ConstMapMatrix(b.data().data() + k * q * r, q, r);
          if (wants(0)) MapMatrix(g(0).data().data() + k * p * q, p, q).noalias() += d * rhs.transpose();
          if (wants(1)) MapMatrix(g(1).data().data() + k * q * r, q, r).noalias() += lhs.transpose() * d;
        }
      }
      break;
    }

    case Op::kReshape:
      if (wants(0)) {
        for (std::size_t i = 0; i < dy.size(); ++i) g(0)[i] += dy[i];
      }
      break;

    case Op::kNormalizeRows:
      if (wants(0)) {
        const std::size_t w = n.value.shape().back();
        for (std::size_t r = 0; r < n.cache.size(); ++r) {
          const double s = n.cache[r];
          if (s <= 0.0) continue;
          auto y = n.value.row(r);
          auto d = dy.row(r);
          double dot = 0.0;
          for (std::size_t j = 0; j < w; ++j) dot += d[j] * y[j];
          auto gx = g(0).row(r);
          for (std::size_t j = 0; j < w; ++j) gx[j] += (d[j] - dot) / s;
        }
      }
      break;
  }
}

}  // namespace adp::engine
