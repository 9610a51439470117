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

#include "cdiff/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace cdiff {

namespace {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "checkpoint i/o assumes a little-endian host");

constexpr char kMagic[4] = {'C', 'D', 'I', 'F'};

json header_json(const Checkpoint& ckpt) {
  json h;
  h["network"] = {{"d_a", ckpt.network.d_a},
                  {"d_s", ckpt.network.d_s},
                  {"hidden_layers", ckpt.network.hidden_layers},
                  {"hidden_width", ckpt.network.hidden_width},
                  {"time_embed_dim", ckpt.network.time_embed_dim}};
  h["schedule"] = {{"kind", to_string(ckpt.schedule.kind)},
                   {"beta_min", ckpt.schedule.beta_min},
                   {"beta_max", ckpt.schedule.beta_max},
                   {"t_eps", ckpt.schedule.t_eps}};
  h["param_count"] = ckpt.params.size();
  h["ema_count"] = ckpt.ema_params.size();
  h["metadata"] = json::parse(ckpt.metadata_json);
  return h;
}

void header_from_json(const json& h, Checkpoint& ckpt) {
  const json& n = h.at("network");
  ckpt.network.d_a = n.at("d_a").get<int>();
  ckpt.network.d_s = n.at("d_s").get<int>();
  ckpt.network.hidden_layers = n.at("hidden_layers").get<int>();
  ckpt.network.hidden_width = n.at("hidden_width").get<int>();
  ckpt.network.time_embed_dim = n.at("time_embed_dim").get<int>();
  const json& s = h.at("schedule");
  ckpt.schedule.kind = schedule_kind_from_string(s.at("kind").get<std::string>());
  ckpt.schedule.beta_min = s.at("beta_min").get<double>();
  ckpt.schedule.beta_max = s.at("beta_max").get<double>();
  ckpt.schedule.t_eps = s.at("t_eps").get<double>();
  ckpt.metadata_json = h.at("metadata").dump();
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw std::runtime_error("checkpoint: cannot open for writing: " + path);
  }
  const std::string header = header_json(ckpt).dump();
  out.write(kMagic, 4);
  const uint32_t version = kCheckpointVersion;
  out.write(reinterpret_cast<const char*>(&version), sizeof(version));
  const uint64_t header_len = header.size();
  out.write(reinterpret_cast<const char*>(&header_len), sizeof(header_len));
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  out.write(reinterpret_cast<const char*>(ckpt.params.data()),
            static_cast<std::streamsize>(ckpt.params.size() * sizeof(double)));
  out.write(
      reinterpret_cast<const char*>(ckpt.ema_params.data()),
      static_cast<std::streamsize>(ckpt.ema_params.size() * sizeof(double)));
  if (!out) {
    throw std::runtime_error("checkpoint: write failed: " + path);
  }
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("checkpoint: cannot open: " + path);
  }
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) {
    throw std::runtime_error("checkpoint: bad magic in " + path);
  }
  uint32_t version = 0;
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  if (version != kCheckpointVersion) {
    throw std::runtime_error("checkpoint: unsupported version " +
                             std::to_string(version) + " in " + path);
  }
  uint64_t header_len = 0;
  in.read(reinterpret_cast<char*>(&header_len), sizeof(header_len));
  std::string header(header_len, '\0');
  in.read(header.data(), static_cast<std::streamsize>(header_len));
  if (!in) {
    throw std::runtime_error("checkpoint: truncated header in " + path);
  }
  Checkpoint ckpt;
  json h;
  try {
    h = json::parse(header);
    header_from_json(h, ckpt);
  } catch (const json::exception& e) {
    throw std::runtime_error("checkpoint: malformed header in " + path +
                             ": " + e.what());
  }
  const auto param_count = h.at("param_count").get<size_t>();
  const auto ema_count = h.at("ema_count").get<size_t>();
  ckpt.params.resize(param_count);
  ckpt.ema_params.resize(ema_count);
  in.read(reinterpret_cast<char*>(ckpt.params.data()),
          static_cast<std::streamsize>(param_count * sizeof(double)));
  in.read(reinterpret_cast<char*>(ckpt.ema_params.data()),
          static_cast<std::streamsize>(ema_count * sizeof(double)));
  if (!in) {
    throw std::runtime_error("checkpoint: truncated parameters in " + path);
  }
  return ckpt;
}

std::string checkpoint_to_json(const Checkpoint& ckpt) {
  json j = header_json(ckpt);
  j["params"] = ckpt.params;
  j["ema_params"] = ckpt.ema_params;
  j["version"] = kCheckpointVersion;
  return j.dump(2);
}

}  // namespace cdiff
