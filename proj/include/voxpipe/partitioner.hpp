// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "voxpipe/profile.hpp"

namespace voxpipe {

struct Stage {
  int layer_start = 0;  // inclusive
  int layer_end = 0;    // inclusive
  std::vector<std::string> processors;
  double predicted_stage_time = 0.0;  // seconds

  friend bool operator==(const Stage&, const Stage&) = default;
};

struct PartitionPlan {
  std::vector<Stage> stages;
  /// Slowest stage or inter-stage transfer, seconds.
  double objective = 0.0;
  std::string split_config;

  int num_layers() const { return stages.empty() ? 0 : stages.back().layer_end + 1; }
  friend bool operator==(const PartitionPlan&, const PartitionPlan&) = default;
};

/// Replicated stage time for layers i..j on `group` (processor types, one
/// entry per processor), in seconds:
///   (max_a sum_l t_a^l + 2(m-1) sum_l p^l / bw) / m
/// with t = fwd + bwd.
double stage_time_q(int i, int j, std::span<const std::string> group, const ProfileSet& profiles,
                    double bandwidth);

/// Same quantity computed by first locating the slowest processor of the
/// group, then evaluating its time plus the synchronization cost.
double get_comp_time(int i, int j, std::span<const std::string> group, const ProfileSet& profiles,
                     double bandwidth);

/// Processors ordered slowest first by whole-model time; ties by id.
std::vector<Processor> sort_processors(const ClusterSpec& cluster, const ProfileSet& profiles);

/// Seconds to move layer k's output across a stage boundary.
double transfer_time(int k, const ProfileSet& profiles, double bandwidth);

/// Heterogeneity-aware partition. Searches contiguous segments of the
/// sorted processor list, in both slowest-first and fastest-first order,
/// allowing unused processors. Ties go to fewer stages, then less
/// inter-stage activation traffic, then the slowest-first order.
PartitionPlan plan(const ProfileSet& profiles, const ClusterSpec& cluster, double bandwidth);

/// Exhaustive search over the same objective. With restrict_to_segments the
/// processor groups are contiguous segments of either sorted order (the
/// planner's search space); otherwise every assignment of processors to
/// stages or to idle is tried. Refuses L > 10 or M > 5.
PartitionPlan brute_force_plan(const ProfileSet& profiles, const ClusterSpec& cluster,
                               double bandwidth, bool restrict_to_segments);

/// max over stages of the stage time and every boundary transfer.
double evaluate_plan(const PartitionPlan& plan, const ProfileSet& profiles,
                     const ClusterSpec& cluster, double bandwidth);

/// Checks contiguity, coverage of 0..L-1, disjoint non-empty processor
/// sets and known ids. Throws StructuralError.
void validate_plan(const PartitionPlan& plan, const ClusterSpec& cluster, std::size_t num_layers);

/// "7-1" style string: replica count per stage.
std::string split_config_of(const std::vector<Stage>& stages);
std::vector<int> parse_split_config(const std::string& s);

nlohmann::json to_json(const PartitionPlan& plan);
PartitionPlan plan_from_json(const nlohmann::json& j);

}  // namespace voxpipe
