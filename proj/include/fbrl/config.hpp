// Copyright 2026 The fbrl Authors
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
//
// Training-configuration files: flat "key value" lines with comments and an
// include directive.
//
//   # comment (also allowed after a value)
//   include base.cfg        spliced in place, relative to this file
//   d 16
//   variant aware
//
// Later lines override earlier ones, so a file can include a base and then
// adjust single keys. The schema is closed: unknown keys are errors, never
// silently ignored. An optional leading "fbrl-config v1" line marks files
// written by tools; hand-written files may omit it.

#ifndef FBRL_CONFIG_HPP_
#define FBRL_CONFIG_HPP_

#include <cstdio>
#include <filesystem>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "fbrl/common.hpp"
#include "fbrl/fb_core.hpp"

namespace fbrl {

inline constexpr const char* kConfigMagic = "fbrl-config v1";

namespace detail {

inline std::string strip_config_line(const std::string& raw) {
  std::string line = raw;
  const std::size_t hash = line.find('#');
  if (hash != std::string::npos) line.erase(hash);
  const std::size_t first = line.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const std::size_t last = line.find_last_not_of(" \t\r");
  return line.substr(first, last - first + 1);
}

inline void read_config_entries_rec(
    const std::string& path,
    std::vector<std::pair<std::string, std::string>>& entries,
    std::vector<std::string>& chain) {
  namespace fs = std::filesystem;
  std::error_code ec;
  const fs::path canonical = fs::weakly_canonical(fs::path(path), ec);
  const std::string key = ec ? path : canonical.string();
  for (const std::string& ancestor : chain) {
    if (ancestor == key) {
      std::string cycle;
      for (const std::string& p : chain) cycle += p + " -> ";
      throw ContractError("config include cycle: " + cycle + key);
    }
  }
  if (chain.size() >= 16) {
    throw ContractError("config includes nested deeper than 16: " + path);
  }
  chain.push_back(key);

  const std::string text = read_text_file(path);
  std::istringstream in(text);
  std::string raw;
  bool first_content_line = true;
  while (std::getline(in, raw)) {
    const std::string line = strip_config_line(raw);
    if (line.empty()) continue;
    if (first_content_line && line == kConfigMagic) {
      first_content_line = false;
      continue;
    }
    first_content_line = false;

    const std::size_t cut = line.find_first_of(" \t");
    if (cut == std::string::npos) {
      throw ContractError("config line without a value in " + path + ": '" +
                          line + "'");
    }
    const std::string entry_key = line.substr(0, cut);
    const std::size_t value_at = line.find_first_not_of(" \t", cut);
    const std::string value = line.substr(value_at);

    if (entry_key == "include") {
      fs::path inc(value);
      if (inc.is_relative()) inc = fs::path(path).parent_path() / inc;
      read_config_entries_rec(inc.string(), entries, chain);
    } else {
      entries.emplace_back(entry_key, value);
    }
  }
  chain.pop_back();
}

}  // namespace detail

// All key-value settings of a config file, include directives expanded in
// place, in application order.
inline std::vector<std::pair<std::string, std::string>> read_config_entries(
    const std::string& path) {
  std::vector<std::pair<std::string, std::string>> entries;
  std::vector<std::string> chain;
  detail::read_config_entries_rec(path, entries, chain);
  return entries;
}

inline TrainConfig load_train_config(const std::string& path) {
  TrainConfig cfg;
  for (const auto& [key, value] : read_config_entries(path)) {
    apply_config_entry(cfg, key, value);
  }
  cfg.validate();
  return cfg;
}

// Canonical echo: every setting, defaults included, sorted by key. Loading
// the echo reproduces the configuration exactly, and its hash identifies it.
inline std::string train_config_text(const TrainConfig& cfg) {
  std::string out = std::string(kConfigMagic) + "\n";
  for (const auto& [key, value] : train_config_to_map(cfg)) {
    out += key + " " + value + "\n";
  }
  return out;
}

inline std::string train_config_hash(const TrainConfig& cfg) {
  std::string body;
  for (const auto& [key, value] : train_config_to_map(cfg)) {
    body += key + " " + value + "\n";
  }
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(body)));
  return buf;
}

inline void save_train_config(const TrainConfig& cfg,
                              const std::string& path) {
  write_text_file(path, train_config_text(cfg));
}

}  // namespace fbrl

#endif  // FBRL_CONFIG_HPP_
