/*
 * Copyright 2026 The geofeat Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef GEOFEAT_CONFIG_HPP_
#define GEOFEAT_CONFIG_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace geofeat {

// Flat `key = value` configuration. Lines starting with '#' are comments.
// Later assignments override earlier ones, so a file followed by
// command-line overrides resolves naturally.
class Config {
 public:
  static Config from_file(const std::string& path);
  static Config from_text(const std::string& text);

  void set(const std::string& key, const std::string& value);
  // Parses "key=value"; throws a usage error otherwise.
  void set_assignment(const std::string& assignment);
  void merge(const Config& other);

  bool has(const std::string& key) const;
  std::string get_string(const std::string& key,
                         const std::string& fallback) const;
  std::string require_string(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<int> get_int_list(const std::string& key,
                                const std::vector<int>& fallback) const;

  // Canonical text: sorted `key = value` lines. Parsing it back yields an
  // equal config.
  std::string dump() const;

  const std::map<std::string, std::string>& entries() const {
    return entries_;
  }

 private:
  std::map<std::string, std::string> entries_;
};

}  // namespace geofeat

#endif  // GEOFEAT_CONFIG_HPP_
