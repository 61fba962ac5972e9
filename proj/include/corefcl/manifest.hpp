// Copyright 2026 The corefcl Authors.
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

#ifndef COREFCL_MANIFEST_HPP_
#define COREFCL_MANIFEST_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include "json.hpp"

namespace corefcl {

std::string sha256_hex(std::string_view bytes);
// Digest of the file's bytes; throws std::runtime_error if unreadable.
std::string sha256_file(const std::filesystem::path& path);

struct RunManifest {
  std::string subcommand;
  nlohmann::json config = nlohmann::json::object();
  std::uint64_t seed = 0;
  std::map<std::string, std::string> inputs;     // path -> sha256
  std::map<std::string, std::string> artifacts;  // path -> sha256
  double duration_seconds = 0.0;

  void add_input(const std::filesystem::path& p) { inputs[p.string()] = sha256_file(p); }
  void add_artifact(const std::filesystem::path& p) { artifacts[p.string()] = sha256_file(p); }

  nlohmann::json to_json() const;
  // Writes <dir>/manifest.json.
  void write(const std::filesystem::path& dir) const;
};

}  // namespace corefcl

#endif  // COREFCL_MANIFEST_HPP_
