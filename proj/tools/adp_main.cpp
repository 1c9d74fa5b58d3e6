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


#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "adp/error.hpp"
#include "adp/platform.hpp"
#include "cli/commands.hpp"
#include "cli/config.hpp"

namespace {

int fail(const std::string& code, const std::string& message, int status) {
  std::cerr << nlohmann::json{{"error", code}, {"message", message}}.dump() << std::endl;
  return status;
}

}  // namespace

int main(int argc, char** argv) {
  adp::tune_allocator();
  CLI::App app{"Adversarial data programming experiments"};
  app.require_subcommand(1, 1);
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out_dir;
  for (const char* name : adp::cli::kSubcommands) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "Configuration file")->required();
    sub->add_option("--set", overrides, "Override key=value")->allow_extra_args(false);
    sub->add_option("--out", out_dir, "Output directory");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what(), 64);
  }
  const std::string subcommand = app.get_subcommands().front()->get_name();
  try {
    if (!out_dir.empty()) overrides.push_back("out=" + out_dir);
    const auto config = adp::cli::ExperimentConfig::load(config_path, overrides, std::getenv("ADP_SEED"));
    std::cout << adp::cli::run(subcommand, config) << "\n";
  } catch (const adp::Error& e) {
    return fail(e.code(), e.what(), 1);
  } catch (const std::exception& e) {
    return fail("internal", e.what(), 70);
  }
  return 0;
}
