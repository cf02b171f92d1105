// SPDX-License-Identifier: Apache-2.0
#include <cstdio>
#include <string>

#include "voxpipe/pipeline_sim.hpp"

namespace voxpipe {

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

const char* dir_name(Direction d) { return d == Direction::fwd ? "fwd" : "bwd"; }

nlohmann::json version_json(const VersionRecord& v) {
  return {{"minibatch", v.minibatch},
          {"stage", v.stage},
          {"replica", v.replica},
          {"fwd_version", v.fwd_version},
          {"bwd_version", v.bwd_version}};
}

}  // namespace

nlohmann::json to_json(const SimReport& r) {
  nlohmann::json versions = nlohmann::json::array();
  for (const auto& v : r.weight_versions) versions.push_back(version_json(v));
  nlohmann::json timeline = nlohmann::json::array();
  for (const auto& w : r.timeline) {
    timeline.push_back({{"minibatch", w.minibatch},
                        {"stage", w.stage},
                        {"replica", w.replica},
                        {"processor", w.processor},
                        {"direction", dir_name(w.direction)},
                        {"start", w.start},
                        {"end", w.end},
                        {"weight_version", w.weight_version}});
  }
  return {{"format_version", 1},
          {"mode", to_string(r.mode)},
          {"num_minibatches", r.num_minibatches},
          {"num_stages", r.num_stages},
          {"total_time", r.total_time},
          {"steady_state_period", r.steady_state_period},
          {"phases",
           {{"warmup", r.warmup_time}, {"steady", r.steady_time}, {"drain", r.drain_time}}},
          {"busy_time", r.busy_time},
          {"per_processor_busy_fraction", r.busy_fraction},
          {"steady_utilization", r.steady_utilization},
          {"bubble_fraction", r.bubble_fraction},
          {"completion_times", r.completion_times},
          {"weight_version_audit", std::move(versions)},
          {"timeline", std::move(timeline)}};
}

nlohmann::json to_json(const WeightAudit& a) {
  nlohmann::json violations = nlohmann::json::array();
  for (const auto& v : a.violations) violations.push_back(version_json(v));
  nlohmann::json staleness = nlohmann::json::object();
  for (const auto& [lag, count] : a.staleness) staleness[std::to_string(lag)] = count;
  return {{"pass", a.pass}, {"violations", std::move(violations)}, {"staleness", std::move(staleness)}};
}

nlohmann::json to_json(const std::vector<StrategyRow>& rows) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : rows) {
    out.push_back({{"strategy", r.name},
                   {"split_config", r.plan.split_config},
                   {"plan", to_json(r.plan)},
                   {"total_time", r.total_time},
                   {"steady_state_period", r.steady_state_period},
                   {"throughput", r.throughput},
                   {"speedup", r.speedup}});
  }
  return out;
}

std::string timeline_csv(const SimReport& r) {
  std::string out = "time_start,time_end,processor,stage,replica,minibatch,direction\n";
  for (const auto& w : r.timeline) {
    out += num(w.start) + ',' + num(w.end) + ',' + w.processor + ',' + std::to_string(w.stage) +
           ',' + std::to_string(w.replica) + ',' + std::to_string(w.minibatch) + ',' +
           dir_name(w.direction) + '\n';
  }
  return out;
}

std::string strategies_csv(const std::vector<StrategyRow>& rows) {
  std::string out = "strategy,split_config,total_time,steady_state_period,throughput,speedup\n";
  for (const auto& r : rows) {
    out += r.name + ',' + r.plan.split_config + ',' + num(r.total_time) + ',' +
           num(r.steady_state_period) + ',' + num(r.throughput) + ',' + num(r.speedup) + '\n';
  }
  return out;
}

}  // namespace voxpipe
