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
#include <map>
#include <string>
#include <vector>

#include "adp/engine/tensor.hpp"

namespace adp::engine {

using NodeId = std::size_t;
using NamedTensors = std::map<std::string, Tensor>;
using ParameterSet = NamedTensors;
using Gradients = NamedTensors;

enum class Op {
  kInput,
  kParameter,
  kConstant,
  kAffine,
  kPRelu,
  kSigmoid,
  kTanh,
  kSoftplus,
  kSoftmax,
  kBatchNorm,
  kConcat,
  kAdd,
  kMul,
  kScale,
  kMean,
  kBce,
  kBatchMatmul,
  kReshape,
  kNormalizeRows,
  kDetach,
};

const char* op_name(Op op);

// Batch normalization uses mini-batch statistics in training mode and the
// supplied running statistics in inference mode.
enum class Mode { kTraining, kInference };

// Probabilities are clamped to [kProbEpsilon, 1 - kProbEpsilon] in every log.
inline constexpr double kProbEpsilon = 1e-7;
inline constexpr double kBatchNormEpsilon = 1e-5;

// Binary cross-entropy of a single probability against a 0/1 target.
double bce(double score, double target);

// A computation record. Nodes are evaluated eagerly as they are appended, so
// value() is available immediately; forward() replays the whole record
// against fresh input tensors. Parameters are referenced, not copied: the
// referenced tensors must outlive the graph.
class Graph {
 public:
  explicit Graph(Mode mode = Mode::kTraining) : mode_(mode) {}

  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;
  Graph(Graph&&) = default;
  Graph& operator=(Graph&&) = default;

  Mode mode() const noexcept { return mode_; }

  // Named leaf replaced on forward(). Inputs flagged requires_grad receive a
  // gradient readable through grad().
  NodeId input(std::string name, Tensor value, bool requires_grad = false);
  // Trainable leaf. Registering the same name twice returns the first node.
  NodeId parameter(const std::string& name, const Tensor& value);
  NodeId constant(Tensor value);

  // x: (B, in), w: (in, out), b: (out) -> (B, out)
  NodeId affine(NodeId x, NodeId w, NodeId b);
  // slope has one entry per feature of the last axis, or a single entry.
  NodeId prelu(NodeId x, NodeId slope);
  NodeId sigmoid(NodeId x);
  NodeId tanh(NodeId x);
  NodeId softplus(NodeId x);
  // Softmax over the last axis.
  NodeId softmax(NodeId x);
  // x: (B, F); gamma, beta, running_mean, running_var: (F). A training-mode
  // batch of one row passes x through unchanged.
  NodeId batch_norm(NodeId x, NodeId gamma, NodeId beta, NodeId running_mean,
                    NodeId running_var);
  // Concatenation of two rank-2 tensors along the last axis.
  NodeId concat(NodeId a, NodeId b);
  NodeId add(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  NodeId scale(NodeId a, double factor);
  // Mean of all entries, shape (1).
  NodeId mean(NodeId a);
  // Mean binary cross-entropy of clamped scores against constant targets.
  NodeId bce(NodeId score, NodeId target);
  // a: (B, p, q), b: (B, q, r) or (B, r, q) when transpose_b -> (B, p, r).
  NodeId batch_matmul(NodeId a, NodeId b, bool transpose_b = false);
  NodeId reshape(NodeId a, Shape shape);
  // Divides each last-axis row by its sum; rows with sum <= 0 become uniform.
  NodeId normalize_rows(NodeId a);
  // Copies the value and blocks gradient flow.
  NodeId detach(NodeId a);

  std::size_t size() const noexcept { return nodes_.size(); }
  Op op(NodeId id) const { return nodes_.at(id).op; }
  const std::vector<NodeId>& inputs_of(NodeId id) const { return nodes_.at(id).inputs; }
  const Tensor& value(NodeId id) const;
  double scalar(NodeId id) const { return value(id)[0]; }

  // Replays every node with new values for the named inputs. Every input of
  // the record must be supplied with its original shape.
  void forward(const NamedTensors& inputs);

  // Reverse sweep from a scalar loss. Returns one gradient per parameter
  // node, zero-filled for parameters the loss does not depend on.
  Gradients backward(NodeId loss);

  // Gradient of a node from the last backward() (zeros if unreached).
  Tensor grad(NodeId id) const;

 private:
  struct Node {
    Op op;
    std::vector<NodeId> inputs;
    std::string name;
    double attr = 0.0;
    bool flag = false;
    bool requires_grad = false;
    const Tensor* external = nullptr;
    Tensor value;
    Tensor grad;
    std::vector<double> cache;
  };

  NodeId push(Node node);
  void evaluate(NodeId id);
  void propagate(NodeId id);
  const Node& node(NodeId id) const;
  [[noreturn]] void shape_fail(NodeId id, Op op, const std::string& detail) const;

  Mode mode_;
  std::vector<Node> nodes_;
  std::map<std::string, NodeId> parameters_;
  bool has_grads_ = false;
};

}  // namespace adp::engine
