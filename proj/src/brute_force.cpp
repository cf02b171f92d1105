// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>

#include "partitioner_internal.hpp"
#include "voxpipe/errors.hpp"
#include "voxpipe/partitioner.hpp"

namespace voxpipe {

namespace {

constexpr int kMaxLayers = 10;
constexpr int kMaxProcessors = 5;

struct Candidate {
  double objective = std::numeric_limits<double>::infinity();
  std::size_t stages = 0;
  std::uint64_t traffic = 0;
  std::vector<std::pair<int, int>> ranges;
  std::vector<std::vector<Processor>> groups;
};

// Evaluated with the loop-based stage cost so the search shares no code
// with the table-driven planner.
double score(const ProfileSet& profiles, double bw, const std::vector<std::pair<int, int>>& ranges,
             const std::vector<std::vector<Processor>>& groups) {
  double worst = 0.0;
  for (std::size_t s = 0; s < ranges.size(); ++s) {
    std::vector<std::string> types;
    for (const auto& p : groups[s]) types.push_back(p.type);
    worst = std::max(worst, get_comp_time(ranges[s].first, ranges[s].second, types, profiles, bw));
    if (s + 1 < ranges.size()) {
      const auto& layer = profiles.all().begin()->second[static_cast<std::size_t>(ranges[s].second)];
      worst = std::max(worst, static_cast<double>(layer.activation_bytes) / bw);
    }
  }
  return worst;
}

void offer(Candidate& best, const ProfileSet& profiles, double bw,
           const std::vector<std::pair<int, int>>& ranges,
           const std::vector<std::vector<Processor>>& groups) {
  const double obj = score(profiles, bw, ranges, groups);
  std::uint64_t traffic = 0;
  const auto& layers = profiles.all().begin()->second;
  for (std::size_t s = 0; s + 1 < ranges.size(); ++s) {
    traffic += layers[static_cast<std::size_t>(ranges[s].second)].activation_bytes;
  }
  if (!std::isinf(best.objective)) {
    const bool tied = obj <= detail::tie_bound(best.objective) && best.objective <= detail::tie_bound(obj);
    if (tied) {
      const bool simpler = ranges.size() < best.stages ||
                           (ranges.size() == best.stages && traffic < best.traffic);
      if (!simpler) return;
    } else if (obj > best.objective) {
      return;
    }
  }
  best.objective = obj;
  best.stages = ranges.size();
  best.traffic = traffic;
  best.ranges = ranges;
  best.groups = groups;
}

// All ways to cut layers 0..L-1 into `stages` contiguous ranges.
void for_each_layer_split(int L, int stages,
                          const std::function<void(const std::vector<std::pair<int, int>>&)>& fn) {
  std::vector<std::pair<int, int>> ranges;
  std::function<void(int, int)> rec = [&](int start, int left) {
    if (left == 1) {
      ranges.emplace_back(start, L - 1);
      fn(ranges);
      ranges.pop_back();
      return;
    }
    for (int end = start; end <= L - left; ++end) {
      ranges.emplace_back(start, end);
      rec(end + 1, left - 1);
      ranges.pop_back();
    }
  };
  rec(0, stages);
}

PartitionPlan to_plan(const Candidate& c, const ProfileSet& profiles, const ClusterSpec& cluster,
                      double bw) {
  PartitionPlan p;
  for (std::size_t s = 0; s < c.ranges.size(); ++s) {
    Stage st;
    st.layer_start = c.ranges[s].first;
    st.layer_end = c.ranges[s].second;
    std::vector<std::string> types;
    for (const auto& proc : c.groups[s]) {
      st.processors.push_back(proc.id);
      types.push_back(proc.type);
    }
    st.predicted_stage_time = get_comp_time(st.layer_start, st.layer_end, types, profiles, bw);
    p.stages.push_back(std::move(st));
  }
  p.split_config = split_config_of(p.stages);
  p.objective = c.objective;
  validate_plan(p, cluster, profiles.num_layers());
  return p;
}

}  // namespace

PartitionPlan brute_force_plan(const ProfileSet& profiles, const ClusterSpec& cluster,
                               double bandwidth, bool restrict_to_segments) {
  cluster.validate();
  const int L = static_cast<int>(profiles.num_layers());
  const int M = static_cast<int>(cluster.processors.size());
  if (L > kMaxLayers || M > kMaxProcessors) {
    throw RefusalError("exhaustive search limited to " + std::to_string(kMaxLayers) +
                       " layers and " + std::to_string(kMaxProcessors) + " processors; got " +
                       std::to_string(L) + " and " + std::to_string(M));
  }
  if (L < 1) throw InputError("profile set has no layers");
  for (const auto& p : cluster.processors) profiles.layers(p.type);
  if (!(bandwidth > 0) || !std::isfinite(bandwidth)) {
    throw InputError("bandwidth must be positive and finite");
  }

  Candidate best;
  const auto orders = detail::candidate_orders(cluster, profiles);
  for (int S = 1; S <= std::min(L, M); ++S) {
    if (restrict_to_segments) {
      for (const auto& order : orders) {
        // Segment bounds 0 <= b1 < e1 <= b2 < e2 <= ... <= M, one pair per stage.
        std::vector<std::vector<Processor>> groups;
        std::function<void(int, int)> rec = [&](int from, int left) {
          if (left == 0) {
            for_each_layer_split(L, S, [&](const auto& ranges) {
              offer(best, profiles, bandwidth, ranges, groups);
            });
            return;
          }
          for (int b = from; b < M; ++b) {
            for (int e = b + 1; e <= M - (left - 1); ++e) {
              groups.emplace_back(order.begin() + b, order.begin() + e);
              rec(e, left - 1);
              groups.pop_back();
            }
          }
        };
        rec(0, S);
      }
    } else {
      // Label each processor (slowest-first order) with a stage or idle.
      const auto& order = orders.front();
      std::vector<int> label(static_cast<std::size_t>(M), 0);
      while (true) {
        std::vector<std::vector<Processor>> groups(static_cast<std::size_t>(S));
        for (int p = 0; p < M; ++p) {
          if (label[static_cast<std::size_t>(p)] > 0) {
            groups[static_cast<std::size_t>(label[static_cast<std::size_t>(p)] - 1)].push_back(
                order[static_cast<std::size_t>(p)]);
          }
        }
        const bool all_used = std::all_of(groups.begin(), groups.end(),
                                          [](const auto& g) { return !g.empty(); });
        if (all_used) {
          for_each_layer_split(L, S, [&](const auto& ranges) {
            offer(best, profiles, bandwidth, ranges, groups);
          });
        }
        int p = 0;
        while (p < M && ++label[static_cast<std::size_t>(p)] > S) label[static_cast<std::size_t>(p++)] = 0;
        if (p == M) break;
      }
    }
  }
  if (best.ranges.empty()) throw InvariantError("exhaustive search found no plan");
  return to_plan(best, profiles, cluster, bandwidth);
}

}  // namespace voxpipe
