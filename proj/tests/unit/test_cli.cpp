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

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "adp/error.hpp"
#include "adp/kv.hpp"
#include "cli/commands.hpp"
#include "cli/config.hpp"

namespace fs = std::filesystem;
using adp::cli::ExperimentConfig;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("adp_cli_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<std::string> lines(const fs::path& path) {
  std::istringstream in(slurp(path));
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

fs::path mixture_config(const fs::path& dir) {
  write(dir / "ensemble.txt",
        "n = 6\nm = 4\nseed = 2\nkind = synthetic\naccuracy = 0.9,0.8,0.7,0.9,0.8,0.7\ngroups = 0,1;2;3;4;5\n");
  write(dir / "run.cfg",
        "# 4-mode mixture\n"
        "seed = 5\n"
        "data.rows = 2\ndata.cols = 2\ndata.samples_per_mode = 60\n"
        "ensemble.spec = ensemble.txt\n"
        "model.latent_dim = 8\nmodel.common_width = 16\nmodel.common_layers = 2\n"
        "model.image_width = 16\nmodel.param_width = 16\nmodel.disc_width = 16\nmodel.dlfb_width = 16\n"
        "train.batch_size = 16\ntrain.iterations = 7\ngenerate.count = 100\n");
  return dir / "run.cfg";
}

ExperimentConfig load(const fs::path& cfg, std::vector<std::string> sets, const fs::path& out,
                      const char* env_seed = nullptr) {
  sets.push_back("out=" + out.string());
  return ExperimentConfig::load(cfg, sets, env_seed);
}

}  // namespace

TEST_CASE("train writes a checkpoint and one loss row per iteration") {
  const auto dir = scratch("train");
  const auto cfg = mixture_config(dir);
  adp::cli::run("train", load(cfg, {}, dir / "out"));
  CHECK(fs::exists(dir / "out" / "model.adp"));
  CHECK(lines(dir / "out" / "loss.csv").size() == 1 + 7);

  const auto resolved = nlohmann::json::parse(slurp(dir / "out" / "resolved_config.json"));
  CHECK(resolved["subcommand"] == "train");
  CHECK(resolved["config"]["seed"] == 5);
  CHECK(resolved["config"]["train.iterations"] == 7);
  CHECK(resolved["inputs"]["ensemble.spec"]["hash"] == adp::cli::file_hash(dir / "ensemble.txt"));
  CHECK(resolved["config_file"]["hash"] == adp::cli::file_hash(cfg));
}

TEST_CASE("aggregate with uniform theta reproduces majority vote on tie-free rows") {
  const auto dir = scratch("aggregate");
  const auto cfg = mixture_config(dir);
  write(dir / "theta.csv", "i,value\n0,0.25\n1,0.25\n2,0.25\n3,0.25\n4,0.25\n5,0.25\n");
  for (const std::string theta : {"", "theta.csv"}) {
    adp::cli::run("aggregate", load(cfg, {"aggregate.method=theta", "aggregate.theta=" + theta}, dir / "out"));
    const auto rows = lines(dir / "out" / "aggregated.csv");
    REQUIRE(rows.size() == 1 + 240);
    CHECK(rows[0].rfind("point,true_label,majority,vote_tie,argmax,y_0", 0) == 0);
    std::size_t tie_free = 0;
    for (std::size_t r = 1; r < rows.size(); ++r) {
      const auto cells = adp::kv::split(rows[r], ',');
      if (cells[3] == "1") continue;
      ++tie_free;
      CHECK(cells[2] == cells[4]);
    }
    CHECK(tie_free > 200);
  }
}

TEST_CASE("same config and seed give byte-identical metrics") {
  const auto dir = scratch("determinism");
  const auto cfg = mixture_config(dir);
  for (const std::string cmd : {"train", "aggregate", "baseline"}) {
    const std::vector<std::string> sets{"baseline.steps=5", "baseline.sweeps=30", "baseline.burn_in=5"};
    adp::cli::run(cmd, load(cfg, sets, dir / "a"));
    adp::cli::run(cmd, load(cfg, sets, dir / "b"));
    CHECK(slurp(dir / "a" / "metrics.json") == slurp(dir / "b" / "metrics.json"));
  }
  adp::cli::run("train", load(cfg, {}, dir / "c", "6"));
  CHECK(slurp(dir / "a" / "loss.csv") != slurp(dir / "c" / "loss.csv"));
}

TEST_CASE("unknown keys are rejected before anything runs") {
  const auto dir = scratch("strict");
  const auto cfg = mixture_config(dir);
  CHECK_THROWS_AS(load(cfg, {"train.bogus=1"}, dir / "out"), adp::InvalidArgument);
  CHECK_FALSE(fs::exists(dir / "out"));

  write(dir / "bad.cfg", "seed = 1\n\ntrain.batchsize = 4\n");
  try {
    ExperimentConfig::load(dir / "bad.cfg", {}, nullptr);
    FAIL("expected a parse error");
  } catch (const adp::ParseError& e) {
    CHECK(e.line() == 3);
  }
  CHECK_THROWS_AS(load(cfg, {"train.iterations=-3"}, dir / "out"), adp::InvalidArgument);
  CHECK_THROWS_AS(load(cfg, {"train.aggregation=phi"}, dir / "out"), adp::InvalidArgument);
  CHECK_THROWS_AS(load(cfg, {"no_equals_sign"}, dir / "out"), adp::InvalidArgument);
}

TEST_CASE("missing files are rejected with their path") {
  const auto dir = scratch("missing");
  const auto cfg = mixture_config(dir);
  CHECK_THROWS_AS(ExperimentConfig::load(dir / "absent.cfg", {}, nullptr), adp::IoError);
  try {
    adp::cli::run("aggregate", load(cfg, {"ensemble.spec=nowhere.txt"}, dir / "out"));
    FAIL("expected an io error");
  } catch (const adp::IoError& e) {
    CHECK(std::string(e.what()).find("nowhere.txt") != std::string::npos);
  }
  CHECK_FALSE(fs::exists(dir / "out"));

  write(dir / "noseed.cfg", "data.rows = 2\n");
  CHECK_THROWS_AS(ExperimentConfig::load(dir / "noseed.cfg", {}, nullptr), adp::InvalidArgument);
  CHECK(ExperimentConfig::load(dir / "noseed.cfg", {}, "9").get_u64("seed") == 9);
}

TEST_CASE("overrides apply after the file and the environment seed last") {
  const auto dir = scratch("precedence");
  const auto cfg = mixture_config(dir);
  const auto base = load(cfg, {}, dir / "o");
  const auto set = load(cfg, {"seed=11", "train.iterations=3"}, dir / "o");
  const auto env = load(cfg, {"seed=11"}, dir / "o", "12");
  CHECK(base.get_u64("seed") == 5);
  CHECK(set.get_u64("seed") == 11);
  CHECK(set.get_u64("train.iterations") == 3);
  CHECK(env.get_u64("seed") == 12);
  CHECK(load(cfg, {}, dir / "elsewhere").hash() == base.hash());
  CHECK(set.hash() != base.hash());
}

TEST_CASE("every subcommand runs end to end") {
  const auto dir = scratch("pipeline");
  const auto cfg = mixture_config(dir);
  const std::vector<std::string> fast{"baseline.steps=3",   "baseline.sweeps=20", "baseline.burn_in=4",
                                      "timing.n_list=3,4",  "timing.trials=1",    "timing.steps=2",
                                      "timing.mle_sweeps=10", "timing.mle_burn_in=2", "timing.dataset_size=50",
                                      "timing.adv_width=8"};
  auto with = [&](std::vector<std::string> extra) {
    extra.insert(extra.end(), fast.begin(), fast.end());
    return extra;
  };
  adp::cli::run("train", load(cfg, with({}), dir / "train"));
  adp::cli::run("generate",
                load(cfg, with({"generate.checkpoint=" + (dir / "train" / "model.adp").string()}), dir / "gen"));
  CHECK(lines(dir / "gen" / "pairs.csv").size() == 1 + 100);
  const std::string pairs = "eval.pairs=" + (dir / "gen" / "pairs.csv").string();
  adp::cli::run("eval-parzen", load(cfg, with({pairs}), dir / "parzen"));
  adp::cli::run("eval-modes", load(cfg, with({pairs}), dir / "modes"));
  adp::cli::run("baseline", load(cfg, with({}), dir / "baseline"));
  adp::cli::run("bench-timing", load(cfg, with({}), dir / "timing"));
  CHECK(lines(dir / "parzen" / "parzen.csv").size() == 1 + 5);
  CHECK(lines(dir / "modes" / "modes.csv").size() == 1 + 4);
  CHECK(lines(dir / "baseline" / "factor_model.csv").size() > 6);
  CHECK(lines(dir / "timing" / "timing.csv").size() == 1 + 4);
  for (const char* sub : {"train", "gen", "parzen", "modes", "baseline", "timing"}) {
    CHECK(fs::exists(dir / sub / "metrics.json"));
    CHECK(fs::exists(dir / sub / "resolved_config.json"));
  }
  CHECK_THROWS_AS(adp::cli::run("fit", load(cfg, {}, dir / "x")), adp::InvalidArgument);
}
