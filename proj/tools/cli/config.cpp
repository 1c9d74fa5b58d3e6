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


#include "config.hpp"

#include <cstdio>
#include <fstream>
#include <iterator>

#include "adp/error.hpp"
#include "adp/kv.hpp"

namespace adp::cli {

namespace {

KeySpec i(std::string key, std::string fallback) { return {std::move(key), ValueKind::kInt, std::move(fallback)}; }
KeySpec f(std::string key, std::string fallback) { return {std::move(key), ValueKind::kFloat, std::move(fallback)}; }
KeySpec b(std::string key, std::string fallback) { return {std::move(key), ValueKind::kBool, std::move(fallback)}; }
KeySpec s(std::string key, std::string fallback) { return {std::move(key), ValueKind::kString, std::move(fallback)}; }
KeySpec p(std::string key) { return {std::move(key), ValueKind::kPath, ""}; }
KeySpec c(std::string key, std::string fallback, std::string choices) {
  return {std::move(key), ValueKind::kChoice, std::move(fallback), std::move(choices)};
}
KeySpec il(std::string key, std::string fallback) { return {std::move(key), ValueKind::kIntList, std::move(fallback)}; }
KeySpec fl(std::string key, std::string fallback) {
  return {std::move(key), ValueKind::kFloatList, std::move(fallback)};
}

const KeySpec* find_spec(const std::string& key) {
  for (const auto& spec : key_specs()) {
    if (spec.key == key) return &spec;
  }
  return nullptr;
}

void check_value(const KeySpec& spec, const std::string& value, std::size_t line) {
  switch (spec.kind) {
    case ValueKind::kInt:
      kv::to_u64(value, line);
      break;
    case ValueKind::kFloat:
      kv::to_double(value, line);
      break;
    case ValueKind::kBool:
      kv::to_bool(value, line);
      break;
    case ValueKind::kIntList:
      kv::to_u64s(value, line);
      break;
    case ValueKind::kFloatList:
      kv::to_doubles(value, line);
      break;
    case ValueKind::kChoice:
      for (const auto& option : kv::split(spec.choices, '|')) {
        if (option == value) return;
      }
      throw ParseError("'" + spec.key + "' must be one of " + spec.choices + ", got '" + value + "'", line);
    case ValueKind::kString:
    case ValueKind::kPath:
      break;
  }
}

}  // namespace

const std::vector<KeySpec>& key_specs() {
  static const std::vector<KeySpec> specs = [] {
    std::vector<KeySpec> v{
        {"seed", ValueKind::kInt, "", "", true},
        s("out", "adp_out"),
        c("data.kind", "mixture", "mixture|idx"),
        c("data.layout", "grid", "grid|ring"),
        i("data.rows", "2"),
        i("data.cols", "4"),
        f("data.spacing", "4.0"),
        i("data.modes", "8"),
        f("data.radius", "5.0"),
        f("data.sigma", "0.3"),
        fl("data.offset", "0,0"),
        i("data.samples_per_mode", "500"),
        p("data.images"),
        p("data.labels"),
        p("data.test_images"),
        p("data.test_labels"),
        i("data.num_classes", "10"),
        i("data.limit", "0"),
        p("ensemble.spec"),
        i("ensemble.calibration_per_class", "20"),
        i("model.latent_dim", "64"),
        i("model.common_width", "128"),
        i("model.common_layers", "3"),
        i("model.image_width", "128"),
        i("model.param_width", "128"),
        i("model.disc_width", "64"),
        i("model.dlfb_width", "64"),
        i("train.batch_size", "128"),
        i("train.d_steps", "2"),
        i("train.iterations", "20000"),
        f("train.learning_rate", "1e-4"),
        f("train.beta1", "0.5"),
        c("train.aggregation", "theta", "theta|theta_phi"),
        c("train.generator_loss", "saturating", "saturating|non_saturating"),
        b("train.use_dlfb", "true"),
        i("train.checkpoint_every", "0"),
        i("generate.count", "1000"),
        c("generate.aggregation", "theta_phi", "theta|theta_phi"),
        p("generate.checkpoint"),
        c("aggregate.method", "theta", "majority|theta|theta_phi"),
        p("aggregate.theta"),
        p("aggregate.phi"),
        c("baseline.method", "mle", "mle|pseudolikelihood"),
        f("baseline.learning_rate", "0.01"),
        i("baseline.steps", "500"),
        i("baseline.sweeps", "1100"),
        i("baseline.burn_in", "100"),
        f("baseline.theta_init", "0.5"),
        i("baseline.batch_size", "0"),
        b("baseline.learn_phi", "true"),
        il("timing.n_list", "35,45,55"),
        i("timing.dataset_size", "2000"),
        i("timing.trials", "5"),
        i("timing.num_classes", "2"),
        i("timing.steps", "20"),
        i("timing.mle_sweeps", "1100"),
        i("timing.mle_burn_in", "100"),
        i("timing.adv_batch_size", "32"),
        i("timing.adv_width", "128"),
        p("eval.pairs"),
        f("eval.radius", "1.0"),
        fl("eval.sigma_grid", "0.05,0.1,0.2,0.5,1.0"),
        i("eval.max_test", "1000"),
    };
    return v;
  }();
  return specs;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path, const std::vector<std::string>& overrides,
                                        const char* env_seed) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config: " + path.string());
  ExperimentConfig config;
  config.source_ = path;
  for (const auto& spec : key_specs()) {
    if (!spec.required) config.values_[spec.key] = spec.fallback;
  }
  for (const auto& e : kv::parse(in)) config.set(e.key, e.value, e.line);
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw InvalidArgument("--set expects key=value, got '" + o + "'");
    config.set(kv::trim(o.substr(0, eq)), kv::trim(o.substr(eq + 1)));
  }
  if (env_seed != nullptr && *env_seed != '\0') config.set("seed", env_seed);
  for (const auto& spec : key_specs()) {
    if (spec.required && !config.values_.contains(spec.key)) {
      throw InvalidArgument("missing required key '" + spec.key + "'");
    }
  }
  return config;
}

void ExperimentConfig::set(const std::string& key, const std::string& value, std::size_t line) {
  const KeySpec* spec = find_spec(key);
  if (spec == nullptr) {
    if (line > 0) throw ParseError("unknown config key '" + key + "'", line);
    throw InvalidArgument("unknown config key '" + key + "'");
  }
  if (line > 0) {
    check_value(*spec, value, line);
  } else {
    try {
      check_value(*spec, value, 1);
    } catch (const ParseError& e) {
      const std::string what = e.what();
      throw InvalidArgument("override " + key + ": " + what.substr(what.find(": ") + 2));
    }
  }
  values_[key] = value;
}

std::uint64_t ExperimentConfig::get_u64(const std::string& key) const { return kv::to_u64(values_.at(key), 0); }
double ExperimentConfig::get_double(const std::string& key) const { return kv::to_double(values_.at(key), 0); }
bool ExperimentConfig::get_bool(const std::string& key) const { return kv::to_bool(values_.at(key), 0); }
const std::string& ExperimentConfig::get_string(const std::string& key) const { return values_.at(key); }
std::vector<std::uint64_t> ExperimentConfig::get_u64s(const std::string& key) const {
  return kv::to_u64s(values_.at(key), 0);
}
std::vector<double> ExperimentConfig::get_doubles(const std::string& key) const {
  return kv::to_doubles(values_.at(key), 0);
}

nlohmann::ordered_json ExperimentConfig::to_json() const {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [key, value] : values_) {
    switch (find_spec(key)->kind) {
      case ValueKind::kInt:
        j[key] = get_u64(key);
        break;
      case ValueKind::kFloat:
        j[key] = get_double(key);
        break;
      case ValueKind::kBool:
        j[key] = get_bool(key);
        break;
      case ValueKind::kIntList:
        j[key] = get_u64s(key);
        break;
      case ValueKind::kFloatList:
        j[key] = get_doubles(key);
        break;
      default:
        j[key] = value;
    }
  }
  return j;
}

std::string ExperimentConfig::hash() const {
  std::uint64_t h = fnv1a(nullptr, 0);
  for (const auto& [key, value] : values_) {
    if (key == "out") continue;
    const std::string line = key + "=" + value + "\n";
    h = fnv1a(line.data(), line.size(), h);
  }
  return hex64(h);
}

std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t h) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  for (std::size_t k = 0; k < size; ++k) {
    h ^= bytes[k];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string file_hash(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open input file: " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return "fnv1a64:" + hex64(fnv1a(bytes.data(), bytes.size()));
}

}  // namespace adp::cli
