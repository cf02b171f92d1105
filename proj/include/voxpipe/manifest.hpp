// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

namespace voxpipe {

std::string sha256_hex(const std::string& data);

struct ManifestInput {
  std::string path;
  std::string sha256;
};

/// Describes the run that produced an output. The hash covers every field
/// except the timestamp, so identical runs produce identical hashes.
struct RunManifest {
  std::string command;
  std::map<std::string, std::string> parameters;
  std::vector<ManifestInput> inputs;
  std::uint64_t seed = 0;
  std::string tool_version;
  std::string timestamp;

  /// Reads the file and records its content hash.
  void add_input(const std::string& path, const std::string& contents);
  nlohmann::json body() const;
  std::string hash() const;
  /// body() plus the hash, for embedding in outputs.
  nlohmann::json embedded() const;
  /// embedded() plus the timestamp, for the optional sidecar file.
  nlohmann::json sidecar() const;
};

}  // namespace voxpipe
