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

#ifndef CDIFF_CONFIG_HPP_
#define CDIFF_CONFIG_HPP_

#include <cstdint>
#include <map>
#include <set>
#include <string>

namespace cdiff {

// Flat "key = value" configuration document with dotted section keys.
// '#' starts a comment; blank lines are ignored. See docs/config_keys.md
// for the key list.
class Config {
 public:
  static Config parse(const std::string& text);
  static Config load(const std::string& path);

  bool has(const std::string& key) const { return kv_.count(key) > 0; }
  void set(const std::string& key, const std::string& value);

  // Typed getters. The no-default forms throw std::invalid_argument naming
  // the key when it is missing; all forms throw on unparseable values.
  std::string get_string(const std::string& key) const;
  std::string get_string(const std::string& key,
                         const std::string& fallback) const;
  double get_double(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key) const;
  int get_int(const std::string& key, int fallback) const;
  uint64_t get_uint64(const std::string& key, uint64_t fallback) const;

  // Throws listing every key not in `known`.
  void require_known_keys(const std::set<std::string>& known) const;

  // Canonical sorted "key = value" form; reruns snapshot this.
  std::string serialize() const;
  // FNV-1a of serialize(); stamped into report rows.
  uint64_t hash() const;

  const std::map<std::string, std::string>& entries() const { return kv_; }

 private:
  std::map<std::string, std::string> kv_;
};

}  // namespace cdiff

#endif  // CDIFF_CONFIG_HPP_
