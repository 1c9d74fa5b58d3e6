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

#include <filesystem>
#include <string>

#include "config.hpp"

namespace adp::cli {

inline constexpr const char* kSubcommands[] = {"train",        "generate",    "aggregate", "baseline",
                                               "bench-timing", "eval-parzen", "eval-modes"};

// Runs one subcommand, writing every artifact into the configured `out`
// directory and returns the resolved configuration as one line of JSON.
// Throws adp::Error subclasses on failure.
std::string run(const std::string& subcommand, const ExperimentConfig& config);

}  // namespace adp::cli
