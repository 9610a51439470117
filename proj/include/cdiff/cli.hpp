// Copyright 2026 The cdiff Authors
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

#ifndef CDIFF_CLI_HPP_
#define CDIFF_CLI_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cdiff/config.hpp"
#include "cdiff/train.hpp"

namespace cdiff {

// Builds the training configuration from a config document, rejecting
// unknown keys. Key list in docs/config_keys.md.
TrainConfig train_config_from(const Config& cfg);

// Worker-thread cap from CDL_THREADS (0 or unset = auto).
int worker_threads();

// Command implementations; each returns a process exit code and reports
// failures on stderr. Exposed separately so tests can drive them without
// spawning processes.
int cmd_train(const std::string& config_path, const std::string& out_dir,
              std::optional<uint64_t> seed_override);
int cmd_sample(const std::string& checkpoint_path, const std::string& out_path,
               int n, const std::string& sampler, int steps, uint64_t seed,
               bool use_raw_params);
int cmd_report(const std::string& kind,
               const std::vector<std::string>& checkpoint_paths,
               const std::string& config_path, const std::string& out_dir,
               uint64_t seed);
int cmd_sweep(const std::string& config_path, const std::string& out_dir,
              std::optional<uint64_t> seed_override);

// Full argv entry point (train / sample / report / sweep subcommands).
int run_cli(int argc, const char* const* argv);
int run_cli(const std::vector<std::string>& args);

}  // namespace cdiff

#endif  // CDIFF_CLI_HPP_
