// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "voxpipe/profile.hpp"

namespace voxpipe::detail {

/// Prefix sums over the profile so a stage cost is O(group size).
class CostModel {
 public:
  CostModel(const ProfileSet& profiles, double bandwidth);

  std::size_t num_layers() const { return layers_; }
  double compute(int i, int j, const std::string& type) const;
  double q(int i, int j, std::span<const std::string> group) const;
  double transfer(int k) const;
  std::uint64_t activation(int k) const { return activation_[static_cast<std::size_t>(k)]; }

 private:
  const std::vector<double>& prefix(const std::string& type) const;

  double bandwidth_;
  std::size_t layers_ = 0;
  std::map<std::string, std::vector<double>> time_prefix_;
  std::vector<std::uint64_t> param_prefix_;
  std::vector<std::uint64_t> activation_;
};

/// Slowest-first order, then its reverse.
std::vector<std::vector<Processor>> candidate_orders(const ClusterSpec& cluster,
                                                     const ProfileSet& profiles);

/// Largest value still treated as equal to `objective` when breaking ties.
double tie_bound(double objective);

}  // namespace voxpipe::detail
