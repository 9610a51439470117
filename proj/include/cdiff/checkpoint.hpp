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

#ifndef CDIFF_CHECKPOINT_HPP_
#define CDIFF_CHECKPOINT_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "cdiff/network.hpp"
#include "cdiff/schedule.hpp"

namespace cdiff {

// Versioned model snapshot: both raw and EMA parameters plus everything
// needed to rebuild the network and schedule. metadata_json carries
// free-form extras (training step, config keys, inlined task file text).
// Binary layout is documented in docs/checkpoint_format.md.
struct Checkpoint {
  NetworkConfig network;
  NoiseSchedule schedule;
  std::vector<double> params;
  std::vector<double> ema_params;
  std::string metadata_json = "{}";
};

inline constexpr uint32_t kCheckpointVersion = 1;

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);

// Throws std::runtime_error on missing file, bad magic, or an unsupported
// version.
Checkpoint load_checkpoint(const std::string& path);

// Human-readable JSON export of the full checkpoint, parameters included.
std::string checkpoint_to_json(const Checkpoint& ckpt);

}  // namespace cdiff

#endif  // CDIFF_CHECKPOINT_HPP_
