// SPDX-License-Identifier: Apache-2.0
// Profile and cluster builders shared by the planner and simulator tests.
#pragma once

#include <cmath>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "voxpipe/profile.hpp"

namespace voxpipe::testing {

/// Layers with the given per-layer fwd/bwd times (microseconds) and sizes.
inline std::vector<LayerProfile> make_layers(const std::vector<double>& fwd_us,
                                             const std::vector<double>& bwd_us,
                                             const std::vector<std::uint64_t>& act,
                                             const std::vector<std::uint64_t>& params) {
  std::vector<LayerProfile> out;
  for (std::size_t i = 0; i < fwd_us.size(); ++i) {
    out.push_back({static_cast<int>(i), fwd_us[i], bwd_us[i], act[i], params[i]});
  }
  return out;
}

/// One processor type per entry of `speed`; layer times scale by the factor.
inline ProfileSet scaled_profiles(const std::vector<LayerProfile>& base,
                                  const std::map<std::string, double>& speed) {
  ProfileSet set("test", 1);
  for (const auto& [type, factor] : speed) {
    auto layers = base;
    for (auto& l : layers) {
      l.fwd_time_us *= factor;
      l.bwd_time_us *= factor;
    }
    set.add(type, std::move(layers));
  }
  return set;
}

inline ClusterSpec make_cluster(const std::vector<std::string>& types, double bw) {
  ClusterSpec c;
  c.bandwidth_bytes_per_sec = bw;
  std::map<std::string, int> counts;
  for (const auto& t : types) c.processors.push_back({t + std::to_string(counts[t]++), t});
  return c;
}

/// Random instance: up to `max_types` processor types with independent
/// per-layer times, shared sizes.
struct RandomInstance {
  ProfileSet profiles;
  ClusterSpec cluster;
};

inline RandomInstance random_instance(std::mt19937_64& rng, int layers, int processors,
                                      int max_types) {
  std::uniform_real_distribution<double> time(100.0, 100000.0);
  std::uniform_int_distribution<std::uint64_t> bytes(0, 50'000'000);
  std::uniform_real_distribution<double> logbw(7.0, 10.5);
  const int num_types = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(max_types));
  std::vector<std::uint64_t> act, params;
  for (int l = 0; l < layers; ++l) {
    act.push_back(bytes(rng));
    params.push_back(rng() % 4 == 0 ? 0 : bytes(rng));
  }
  RandomInstance inst;
  inst.profiles = ProfileSet("random", 1);
  std::vector<std::string> type_names;
  for (int t = 0; t < num_types; ++t) {
    std::vector<double> f, b;
    for (int l = 0; l < layers; ++l) {
      f.push_back(time(rng));
      b.push_back(time(rng));
    }
    type_names.push_back("T" + std::to_string(t));
    inst.profiles.add(type_names.back(), make_layers(f, b, act, params));
  }
  std::vector<std::string> procs;
  for (int p = 0; p < processors; ++p) procs.push_back(type_names[rng() % type_names.size()]);
  inst.cluster = make_cluster(procs, std::pow(10.0, logbw(rng)));
  return inst;
}

}  // namespace voxpipe::testing
