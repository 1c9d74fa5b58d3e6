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


#include "adp/gan/model.hpp"

#include "adp/engine/layers.hpp"
#include "adp/error.hpp"

namespace adp::gan {

namespace el = adp::engine;

void ModelShape::validate() const {
  if (data_dims.empty()) throw InvalidArgument("model needs at least one image head");
  for (auto d : data_dims) {
    if (d == 0) throw InvalidArgument("data dimensionality must be positive");
  }
  if (num_classes < 2) throw InvalidArgument("model needs m >= 2");
  if (num_lfs == 0) throw InvalidArgument("model needs n >= 1");
  if (latent_dim == 0 || common_width == 0 || common_layers == 0 || image_width == 0 || param_width == 0 ||
      disc_width == 0 || dlfb_width == 0) {
    throw InvalidArgument("layer widths must be positive");
  }
}

Block block_of(const std::string& name) {
  const std::string head = name.substr(0, name.find('.'));
  if (head == "g_common") return Block::kGCommon;
  if (head == "g_param") return Block::kGParameter;
  if (head.starts_with("g_image")) return Block::kGImage;
  if (head == "d_lfb") return Block::kDLfb;
  if (head.size() > 1 && head[0] == 'd') return Block::kDiscriminator;
  throw InvalidArgument("parameter '" + name + "' belongs to no block");
}

bool is_generator(Block b) { return b == Block::kGCommon || b == Block::kGImage || b == Block::kGParameter; }

std::size_t domain_of(const std::string& name) {
  const std::string head = name.substr(0, name.find('.'));
  const Block b = block_of(name);
  if (b == Block::kGImage) return std::stoul(head.substr(7));
  if (b == Block::kDiscriminator) return std::stoul(head.substr(1));
  throw InvalidArgument("parameter '" + name + "' is not domain specific");
}

namespace {

std::string gimage(std::size_t h) { return "g_image" + std::to_string(h); }
std::string disc(std::size_t h) { return "d" + std::to_string(h); }

void init_fc_act(ParameterSet& p, const std::string& fc, const std::string& act, std::size_t in,
                 std::size_t out, Rng& rng) {
  el::init_dense(p, fc, in, out, rng);
  el::init_prelu(p, act, out);
}

NodeId fc_act(Graph& g, const ParameterSet& p, const std::string& fc, const std::string& act, NodeId x) {
  return el::prelu(g, p, act, el::dense(g, p, fc, x));
}

}  // namespace

AdpModel::AdpModel(ModelShape shape, std::uint64_t seed) : shape_(std::move(shape)) {
  shape_.validate();
  Rng rng(seed);
  const auto& s = shape_;
  const std::size_t n = s.num_lfs;

  std::size_t in = s.latent_dim;
  for (std::size_t k = 0; k < s.common_layers; ++k) {
    const std::string k_ = std::to_string(k);
    el::init_dense(params_, "g_common.fc" + k_, in, s.common_width, rng);
    el::init_batch_norm(params_, buffers_, "g_common.bn" + k_, s.common_width);
    el::init_prelu(params_, "g_common.act" + k_, s.common_width);
    in = s.common_width;
  }
  for (std::size_t h = 0; h < s.domains(); ++h) {
    init_fc_act(params_, gimage(h) + ".fc0", gimage(h) + ".act0", s.common_width, s.image_width, rng);
    el::init_dense(params_, gimage(h) + ".out", s.image_width, s.data_dims[h], rng);
  }
  init_fc_act(params_, "g_param.fc0", "g_param.act0", s.common_width, s.param_width, rng);
  el::init_dense(params_, "g_param.theta", s.param_width, n, rng);
  el::init_dense(params_, "g_param.phi", s.param_width, n * n, rng);

  const std::size_t w = s.disc_width;
  for (std::size_t h = 0; h < s.domains(); ++h) {
    const std::string p = disc(h);
    init_fc_act(params_, p + ".image_fc0", p + ".image_act0", s.data_dims[h], w, rng);
    init_fc_act(params_, p + ".image_fc1", p + ".image_act1", w, w, rng);
    init_fc_act(params_, p + ".label_fc0", p + ".label_act0", s.num_classes, w, rng);
    init_fc_act(params_, p + ".label_fc1", p + ".label_act1", w, w, rng);
    init_fc_act(params_, p + ".trunk_fc0", p + ".trunk_act0", 2 * w, w, rng);
    init_fc_act(params_, p + ".trunk_fc1", p + ".trunk_act1", w, w, rng);
    el::init_dense(params_, p + ".head_image", w, 1, rng);
    el::init_dense(params_, p + ".head_label", w, 1, rng);
  }

  init_fc_act(params_, "d_lfb.fc0", "d_lfb.act0", n * n, s.dlfb_width, rng);
  init_fc_act(params_, "d_lfb.fc1", "d_lfb.act1", s.dlfb_width, s.dlfb_width, rng);
  el::init_dense(params_, "d_lfb.out", s.dlfb_width, 1, rng);
}

GeneratorNodes AdpModel::generator_impl(Graph& g, NodeId z, NamedTensors* stats_sink, GeneratorParts parts) const {
  const auto& s = shape_;
  const auto& zv = g.value(z);
  if (zv.rank() != 2 || zv.dim(1) != s.latent_dim) {
    throw ShapeError("latent batch " + shape_str(zv.shape()) + " does not have width " + std::to_string(s.latent_dim));
  }
  const std::size_t batch = zv.dim(0), n = s.num_lfs;

  NodeId h = z;
  for (std::size_t k = 0; k < s.common_layers; ++k) {
    const std::string k_ = std::to_string(k);
    h = el::dense(g, params_, "g_common.fc" + k_, h);
    h = el::batch_norm(g, params_, stats_sink, buffers_, "g_common.bn" + k_, h);
    h = el::prelu(g, params_, "g_common.act" + k_, h);
  }

  GeneratorNodes out;
  if (parts.images) {
    for (std::size_t d = 0; d < s.domains(); ++d) {
      const NodeId a = fc_act(g, params_, gimage(d) + ".fc0", gimage(d) + ".act0", h);
      out.images.push_back(el::dense(g, params_, gimage(d) + ".out", a));
    }
  }
  const NodeId p = fc_act(g, params_, "g_param.fc0", "g_param.act0", h);
  out.theta = g.softplus(el::dense(g, params_, "g_param.theta", p));
  if (parts.phi) {
    out.phi_flat = g.sigmoid(el::dense(g, params_, "g_param.phi", p));
    out.phi = g.reshape(out.phi_flat, {batch, n, n});
  }
  return out;
}

GeneratorNodes AdpModel::build_generator(Graph& g, NodeId z, GeneratorParts parts) const {
  return generator_impl(g, z, nullptr, parts);
}

GeneratorNodes AdpModel::build_generator_tracking(Graph& g, NodeId z, GeneratorParts parts) {
  return generator_impl(g, z, &buffers_, parts);
}

DiscriminatorNodes AdpModel::build_discriminator(Graph& g, std::size_t domain, NodeId x, NodeId y) const {
  if (domain >= shape_.domains()) throw InvalidArgument("no discriminator for domain " + std::to_string(domain));
  const auto& xv = g.value(x);
  const auto& yv = g.value(y);
  if (xv.rank() != 2 || xv.dim(1) != shape_.data_dims[domain] || yv.rank() != 2 ||
      yv.dim(1) != shape_.num_classes || yv.dim(0) != xv.dim(0)) {
    throw ShapeError("discriminator inputs " + shape_str(xv.shape()) + ", " + shape_str(yv.shape()) +
                     " do not match the model");
  }
  const std::string p = disc(domain);
  NodeId hx = fc_act(g, params_, p + ".image_fc0", p + ".image_act0", x);
  hx = fc_act(g, params_, p + ".image_fc1", p + ".image_act1", hx);
  NodeId hy = fc_act(g, params_, p + ".label_fc0", p + ".label_act0", y);
  hy = fc_act(g, params_, p + ".label_fc1", p + ".label_act1", hy);
  NodeId t = g.concat(hx, hy);
  t = fc_act(g, params_, p + ".trunk_fc0", p + ".trunk_act0", t);
  t = fc_act(g, params_, p + ".trunk_fc1", p + ".trunk_act1", t);
  return {g.sigmoid(el::dense(g, params_, p + ".head_image", t)),
          g.sigmoid(el::dense(g, params_, p + ".head_label", t))};
}

NodeId AdpModel::build_dlfb(Graph& g, NodeId phi_flat) const {
  const auto& v = g.value(phi_flat);
  const std::size_t n = shape_.num_lfs;
  if (v.rank() != 2 || v.dim(1) != n * n) {
    throw ShapeError("D_LFB input " + shape_str(v.shape()) + " is not (B, " + std::to_string(n * n) + ")");
  }
  NodeId h = fc_act(g, params_, "d_lfb.fc0", "d_lfb.act0", phi_flat);
  h = fc_act(g, params_, "d_lfb.fc1", "d_lfb.act1", h);
  return g.sigmoid(el::dense(g, params_, "d_lfb.out", h));
}

NamedTensors AdpModel::export_tensors() const {
  NamedTensors out = params_;
  for (const auto& [k, v] : buffers_) out[k] = v;
  const auto& s = shape_;
  std::vector<double> dims(s.data_dims.begin(), s.data_dims.end());
  out["shape#data_dims"] = Tensor({dims.size()}, dims);
  auto put = [&](const char* key, std::size_t v) { out[std::string("shape#") + key] = Tensor::scalar(static_cast<double>(v)); };
  put("num_classes", s.num_classes);
  put("num_lfs", s.num_lfs);
  put("latent_dim", s.latent_dim);
  put("common_width", s.common_width);
  put("common_layers", s.common_layers);
  put("image_width", s.image_width);
  put("param_width", s.param_width);
  put("disc_width", s.disc_width);
  put("dlfb_width", s.dlfb_width);
  return out;
}

AdpModel AdpModel::from_tensors(const NamedTensors& tensors) {
  auto get = [&](const char* key) -> std::size_t {
    auto it = tensors.find(std::string("shape#") + key);
    if (it == tensors.end()) throw InvalidArgument(std::string("checkpoint lacks shape#") + key);
    return static_cast<std::size_t>(it->second[0]);
  };
  ModelShape s;
  auto dims = tensors.find("shape#data_dims");
  if (dims == tensors.end()) throw InvalidArgument("checkpoint lacks shape#data_dims");
  s.data_dims.assign(dims->second.data().begin(), dims->second.data().end());
  s.num_classes = get("num_classes");
  s.num_lfs = get("num_lfs");
  s.latent_dim = get("latent_dim");
  s.common_width = get("common_width");
  s.common_layers = get("common_layers");
  s.image_width = get("image_width");
  s.param_width = get("param_width");
  s.disc_width = get("disc_width");
  s.dlfb_width = get("dlfb_width");

  AdpModel model(s, 0);
  for (auto* set : {&model.params_, &model.buffers_}) {
    for (auto& [name, t] : *set) {
      auto it = tensors.find(name);
      if (it == tensors.end()) throw InvalidArgument("checkpoint lacks tensor '" + name + "'");
      if (it->second.shape() != t.shape()) throw ShapeError("checkpoint tensor '" + name + "' has the wrong shape");
      t = it->second;
    }
  }
  return model;
}

GeneratorOutput generator_forward(const AdpModel& model, const Tensor& z, engine::Mode mode) {
  Graph g(mode);
  const auto nodes = model.build_generator(g, g.input("z", z));
  GeneratorOutput out;
  for (auto id : nodes.images) out.images.push_back(g.value(id));
  out.theta = g.value(nodes.theta);
  out.phi = g.value(nodes.phi);
  return out;
}

DiscriminatorOutput discriminator_forward(const AdpModel& model, const Tensor& x, const Tensor& y,
                                          std::size_t domain) {
  Graph g;
  const auto nodes = model.build_discriminator(g, domain, g.input("x", x), g.input("y", y));
  const auto& si = g.value(nodes.s_image);
  const auto& sl = g.value(nodes.s_label);
  return {std::vector<double>(si.data().begin(), si.data().end()),
          std::vector<double>(sl.data().begin(), sl.data().end())};
}

double dlfb_forward(const AdpModel& model, const Tensor& phi) {
  const std::size_t n = model.shape().num_lfs;
  if (phi.rank() != 2 || phi.dim(0) != n || phi.dim(1) != n) {
    throw ShapeError("D_LFB expects a " + std::to_string(n) + "x" + std::to_string(n) + " matrix, got " +
                     shape_str(phi.shape()));
  }
  Graph g;
  return g.scalar(model.build_dlfb(g, g.input("phi", phi.reshaped({1, n * n}))));
}

}  // namespace adp::gan
