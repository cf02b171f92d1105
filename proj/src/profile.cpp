// SPDX-License-Identifier: Apache-2.0
#include "voxpipe/profile.hpp"

#include <cmath>
#include <set>
#include <string>

#include "voxpipe/errors.hpp"

namespace voxpipe {

void validate_layers(std::span<const LayerProfile> layers) {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerProfile& l = layers[i];
    if (l.layer_id != static_cast<int>(i)) {
      throw InputError("layer " + std::to_string(i) + " has layer_id " +
                       std::to_string(l.layer_id) + "; ids must be 0..L-1 in order");
    }
    if (!std::isfinite(l.fwd_time_us) || !std::isfinite(l.bwd_time_us) || l.fwd_time_us < 0 ||
        l.bwd_time_us < 0) {
      throw InputError("layer " + std::to_string(i) + " has a negative or non-finite time");
    }
  }
}

void ProfileSet::add(const std::string& processor_type, std::vector<LayerProfile> layers) {
  if (processor_type.empty()) throw InputError("processor type name must not be empty");
  validate_layers(layers);
  for (const auto& [name, existing] : by_type_) {
    if (name == processor_type) continue;
    if (existing.size() != layers.size()) {
      throw InputError("profile for '" + processor_type + "' has " +
                       std::to_string(layers.size()) + " layers but '" + name + "' has " +
                       std::to_string(existing.size()));
    }
    for (std::size_t i = 0; i < layers.size(); ++i) {
      if (existing[i].activation_bytes != layers[i].activation_bytes ||
          existing[i].param_bytes != layers[i].param_bytes) {
        throw InputError("profile for '" + processor_type + "' disagrees with '" + name +
                         "' on sizes of layer " + std::to_string(i));
      }
    }
    break;
  }
  by_type_[processor_type] = std::move(layers);
}

const std::vector<LayerProfile>& ProfileSet::layers(const std::string& processor_type) const {
  auto it = by_type_.find(processor_type);
  if (it == by_type_.end()) {
    throw ConfigurationError("no profile for processor type '" + processor_type + "'");
  }
  return it->second;
}

std::vector<std::string> ProfileSet::types() const {
  std::vector<std::string> out;
  for (const auto& [name, _] : by_type_) out.push_back(name);
  return out;
}

std::size_t ProfileSet::num_layers() const {
  return by_type_.empty() ? 0 : by_type_.begin()->second.size();
}

void ClusterSpec::validate() const {
  if (processors.empty()) throw InputError("cluster has no processors");
  if (!(bandwidth_bytes_per_sec > 0) || !std::isfinite(bandwidth_bytes_per_sec)) {
    throw InputError("cluster bandwidth must be positive and finite");
  }
  std::set<std::string> ids;
  for (const auto& p : processors) {
    if (p.id.empty() || p.type.empty()) throw InputError("processor id and type must be set");
    if (!ids.insert(p.id).second) throw InputError("duplicate processor id '" + p.id + "'");
  }
  for (const auto& [key, bw] : bandwidth_overrides) {
    if (!(bw > 0) || !std::isfinite(bw)) {
      throw InputError("bandwidth override must be positive and finite");
    }
    if (!ids.count(key.first) || !ids.count(key.second)) {
      throw InputError("bandwidth override names unknown processor");
    }
  }
}

const Processor& ClusterSpec::processor(const std::string& id) const {
  for (const auto& p : processors) {
    if (p.id == id) return p;
  }
  throw StructuralError("unknown processor id '" + id + "'");
}

double ClusterSpec::bandwidth_between(const std::string& a, const std::string& b) const {
  auto key = a < b ? std::make_pair(a, b) : std::make_pair(b, a);
  auto it = bandwidth_overrides.find(key);
  return it == bandwidth_overrides.end() ? bandwidth_bytes_per_sec : it->second;
}

AlcrCurves compute_alcr(std::span<const LayerProfile> layers) {
  if (layers.empty()) throw InputError("cannot compute layer cost ratios of an empty profile");
  AlcrCurves c;
  double time_total = 0.0;
  std::uint64_t act_total = 0;
  std::uint64_t param_total = 0;
  for (const auto& l : layers) {
    time_total += l.total_time_us();
    act_total += l.activation_bytes;
    param_total += l.param_bytes;
  }
  c.compute_defined = time_total > 0.0;
  c.activation_defined = act_total > 0;
  c.params_defined = param_total > 0;

  // Running sums replay the exact additions used for the totals, so the
  // final ratio is total / total == 1.0 with no rounding slack.
  double time_run = 0.0;
  std::uint64_t act_run = 0;
  std::uint64_t param_run = 0;
  for (const auto& l : layers) {
    time_run += l.total_time_us();
    act_run += l.activation_bytes;
    param_run += l.param_bytes;
    if (c.compute_defined) c.compute.push_back(time_run / time_total);
    if (c.activation_defined) {
      c.activation.push_back(static_cast<double>(act_run) / static_cast<double>(act_total));
    }
    if (c.params_defined) {
      c.params.push_back(static_cast<double>(param_run) / static_cast<double>(param_total));
    }
  }
  return c;
}

}  // namespace voxpipe
