// SPDX-License-Identifier: Apache-2.0
#include <string>

#include "voxpipe/errors.hpp"
#include "voxpipe/partitioner.hpp"

namespace voxpipe {

nlohmann::json to_json(const PartitionPlan& plan) {
  nlohmann::json stages = nlohmann::json::array();
  for (const auto& s : plan.stages) {
    stages.push_back({{"layer_start", s.layer_start},
                      {"layer_end", s.layer_end},
                      {"processors", s.processors},
                      {"predicted_stage_time", s.predicted_stage_time}});
  }
  return {{"format_version", 1},
          {"objective_seconds", plan.objective},
          {"split_config", plan.split_config},
          {"stages", std::move(stages)}};
}

PartitionPlan plan_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format_version").get<int>() != 1) {
      throw InputError("plan: unsupported format_version");
    }
    PartitionPlan p;
    p.objective = j.at("objective_seconds").get<double>();
    p.split_config = j.at("split_config").get<std::string>();
    for (const auto& s : j.at("stages")) {
      Stage st;
      st.layer_start = s.at("layer_start").get<int>();
      st.layer_end = s.at("layer_end").get<int>();
      st.processors = s.at("processors").get<std::vector<std::string>>();
      st.predicted_stage_time = s.at("predicted_stage_time").get<double>();
      p.stages.push_back(std::move(st));
    }
    if (p.stages.empty()) throw StructuralError("plan: no stages");
    if (split_config_of(p.stages) != p.split_config) {
      throw StructuralError("plan: split_config '" + p.split_config +
                            "' does not match the stage processor counts");
    }
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("plan: ") + e.what());
  }
}

}  // namespace voxpipe
