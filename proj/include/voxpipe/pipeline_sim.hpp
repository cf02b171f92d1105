// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "voxpipe/partitioner.hpp"
#include "voxpipe/profile.hpp"

namespace voxpipe {

enum class SimMode { naive_mp, pipedream_1f1b, data_parallel };

SimMode sim_mode_from_string(const std::string& name);
std::string to_string(SimMode mode);

struct SimConfig {
  PartitionPlan plan;
  ProfileSet profiles;
  ClusterSpec cluster;
  /// Scalar bytes/s for transfers and parameter sync. Per-pair overrides
  /// from the cluster still apply to transfers. Zero means "use the cluster's".
  double bandwidth = 0.0;
  int num_minibatches = 1;
  SimMode mode = SimMode::pipedream_1f1b;
  /// Used for backward time when use_profiled_bwd is false.
  double bwd_fwd_ratio = 2.0;
  bool use_profiled_bwd = true;
  bool overlap_comm = true;
  bool weight_stashing = true;
  std::uint64_t seed = 0;
  /// Each compute duration is scaled by (1 + noise * u), u ~ U[-1, 1).
  double noise = 0.0;
};

enum class Direction { fwd, bwd };

struct WorkItem {
  int minibatch = 0;
  int stage = 0;
  int replica = 0;
  std::string processor;
  Direction direction = Direction::fwd;
  double start = 0.0;
  double end = 0.0;
  int weight_version = 0;

  friend bool operator==(const WorkItem&, const WorkItem&) = default;
};

struct VersionRecord {
  int minibatch = 0;
  int stage = 0;
  int replica = 0;
  int fwd_version = 0;
  int bwd_version = 0;

  friend bool operator==(const VersionRecord&, const VersionRecord&) = default;
};

struct SimReport {
  SimMode mode = SimMode::pipedream_1f1b;
  int num_minibatches = 0;
  int num_stages = 0;
  double total_time = 0.0;
  double steady_state_period = 0.0;
  /// Until the first minibatch completes its last backward.
  double warmup_time = 0.0;
  double steady_time = 0.0;
  /// After the last forward on stage 0 starts draining the pipeline.
  double drain_time = 0.0;
  std::map<std::string, double> busy_time;
  std::map<std::string, double> busy_fraction;
  /// Busy fraction inside the window used for steady_state_period.
  std::map<std::string, double> steady_utilization;
  double bubble_fraction = 0.0;
  /// Time each minibatch finished its stage-0 backward, by minibatch id.
  std::vector<double> completion_times;
  std::vector<VersionRecord> weight_versions;
  std::vector<WorkItem> timeline;

  friend bool operator==(const SimReport&, const SimReport&) = default;
};

SimReport simulate(const SimConfig& config);

/// Round-robin replica for a minibatch.
int route_replica(int minibatch, int replica_count);

struct WeightAudit {
  bool pass = true;
  std::vector<VersionRecord> violations;
  /// bwd_version - fwd_version -> count.
  std::map<int, int> staleness;
};

WeightAudit audit_weight_versions(const SimReport& report);

struct StrategyRow {
  std::string name;  // "DP", "MP", "HETE-MP"
  PartitionPlan plan;
  double total_time = 0.0;
  double steady_state_period = 0.0;
  double throughput = 0.0;  // minibatches per second over the whole run
  double speedup = 0.0;     // DP total_time / this total_time
};

struct CompareOptions {
  int num_minibatches = 100;
  bool overlap_comm = true;
  std::uint64_t seed = 0;
};

/// DP: one stage over every processor. MP: planned as if every processor
/// were the slowest type, then simulated with real speeds. HETE-MP: plan().
std::vector<StrategyRow> compare_strategies(const ProfileSet& profiles, const ClusterSpec& cluster,
                                            double bandwidth, const CompareOptions& options);

/// Every processor type replaced by the profile of the slowest one.
ProfileSet homogenized_profiles(const ProfileSet& profiles, const ClusterSpec& cluster);

nlohmann::json to_json(const SimReport& report);
nlohmann::json to_json(const WeightAudit& audit);
nlohmann::json to_json(const std::vector<StrategyRow>& rows);
/// Header: time_start,time_end,processor,stage,replica,minibatch,direction
std::string timeline_csv(const SimReport& report);
std::string strategies_csv(const std::vector<StrategyRow>& rows);

}  // namespace voxpipe
