// SPDX-License-Identifier: Apache-2.0
#include "voxpipe/manifest.hpp"

#include <openssl/evp.h>

#include <array>
#include <cstdio>

#include "voxpipe/errors.hpp"

namespace voxpipe {

std::string sha256_hex(const std::string& data) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1) {
    throw InvariantError("SHA-256 computation failed");
  }
  std::string hex;
  hex.reserve(2 * len);
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

void RunManifest::add_input(const std::string& path, const std::string& contents) {
  inputs.push_back({path, sha256_hex(contents)});
}

nlohmann::json RunManifest::body() const {
  nlohmann::json in = nlohmann::json::array();
  for (const auto& i : inputs) in.push_back({{"path", i.path}, {"sha256", i.sha256}});
  return {{"command", command},
          {"parameters", parameters},
          {"inputs", std::move(in)},
          {"seed", seed},
          {"tool_version", tool_version}};
}

std::string RunManifest::hash() const { return sha256_hex(body().dump()); }

nlohmann::json RunManifest::embedded() const {
  nlohmann::json j = body();
  j["hash"] = hash();
  return j;
}

nlohmann::json RunManifest::sidecar() const {
  nlohmann::json j = embedded();
  j["timestamp"] = timestamp;
  return j;
}

}  // namespace voxpipe
