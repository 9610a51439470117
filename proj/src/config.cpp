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

#include "cdiff/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace cdiff {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

[[noreturn]] void missing(const std::string& key) {
  throw std::invalid_argument("config: missing required key '" + key + "'");
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value,
                            const char* want) {
  throw std::invalid_argument("config: key '" + key + "' has value '" + value +
                              "', expected " + want);
}

}  // namespace

Config Config::parse(const std::string& text) {
  Config cfg;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": empty key");
    }
    cfg.kv_[key] = value;
  }
  return cfg;
}

Config Config::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("config file not found: " + path);
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

void Config::set(const std::string& key, const std::string& value) {
  kv_[key] = value;
}

std::string Config::get_string(const std::string& key) const {
  const auto it = kv_.find(key);
  if (it == kv_.end()) missing(key);
  return it->second;
}

std::string Config::get_string(const std::string& key,
                               const std::string& fallback) const {
  const auto it = kv_.find(key);
  return it == kv_.end() ? fallback : it->second;
}

double Config::get_double(const std::string& key) const {
  const std::string v = get_string(key);
  size_t pos = 0;
  double out;
  try {
    out = std::stod(v, &pos);
  } catch (const std::exception&) {
    bad_value(key, v, "a number");
  }
  if (pos != v.size()) bad_value(key, v, "a number");
  return out;
}

double Config::get_double(const std::string& key, double fallback) const {
  return has(key) ? get_double(key) : fallback;
}

int Config::get_int(const std::string& key) const {
  const std::string v = get_string(key);
  size_t pos = 0;
  long out;
  try {
    out = std::stol(v, &pos);
  } catch (const std::exception&) {
    bad_value(key, v, "an integer");
  }
  if (pos != v.size()) bad_value(key, v, "an integer");
  return static_cast<int>(out);
}

int Config::get_int(const std::string& key, int fallback) const {
  return has(key) ? get_int(key) : fallback;
}

uint64_t Config::get_uint64(const std::string& key, uint64_t fallback) const {
  if (!has(key)) return fallback;
  const std::string v = get_string(key);
  size_t pos = 0;
  unsigned long long out;
  try {
    out = std::stoull(v, &pos);
  } catch (const std::exception&) {
    bad_value(key, v, "a non-negative integer");
  }
  if (pos != v.size()) bad_value(key, v, "a non-negative integer");
  return out;
}

void Config::require_known_keys(const std::set<std::string>& known) const {
  std::string offenders;
  for (const auto& [key, value] : kv_) {
    if (known.count(key) == 0) {
      if (!offenders.empty()) offenders += ", ";
      offenders += "'" + key + "'";
    }
  }
  if (!offenders.empty()) {
    throw std::invalid_argument("config: unknown key(s) " + offenders);
  }
}

std::string Config::serialize() const {
  std::string out;
  for (const auto& [key, value] : kv_) {
    out += key + " = " + value + "\n";
  }
  return out;
}

uint64_t Config::hash() const {
  // FNV-1a over the canonical serialization.
  uint64_t h = 1469598103934665603ull;
  for (char c : serialize()) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace cdiff
