// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace voxpipe {

struct ProcessorType {
  std::string name;
  std::optional<double> cuda_cores;
  std::optional<double> boost_clock_mhz;
  std::optional<double> tflops_sp;
  std::optional<double> memory_gb;
  std::optional<double> memory_bw_gbs;
};

struct LayerProfile {
  int layer_id = 0;
  double fwd_time_us = 0.0;
  double bwd_time_us = 0.0;
  std::uint64_t activation_bytes = 0;
  std::uint64_t param_bytes = 0;

  double total_time_us() const { return fwd_time_us + bwd_time_us; }

  friend bool operator==(const LayerProfile&, const LayerProfile&) = default;
};

/// Throws InputError on negative or non-finite times or non-consecutive ids.
void validate_layers(std::span<const LayerProfile> layers);

/// Per processor type, the same L layers. Sizes must agree across types;
/// only times may differ.
class ProfileSet {
 public:
  ProfileSet() = default;
  ProfileSet(std::string model_name, int batch_size)
      : model_name_(std::move(model_name)), batch_size_(batch_size) {}

  const std::string& model_name() const { return model_name_; }
  int batch_size() const { return batch_size_; }

  /// Adds or replaces a processor type. Throws if the layer count or any
  /// size disagrees with types already present.
  void add(const std::string& processor_type, std::vector<LayerProfile> layers);

  bool has(const std::string& processor_type) const { return by_type_.count(processor_type) > 0; }
  /// Throws ConfigurationError for an unknown type.
  const std::vector<LayerProfile>& layers(const std::string& processor_type) const;
  const std::map<std::string, std::vector<LayerProfile>>& all() const { return by_type_; }
  std::vector<std::string> types() const;

  std::size_t num_layers() const;
  bool empty() const { return by_type_.empty(); }

 private:
  std::string model_name_;
  int batch_size_ = 0;
  std::map<std::string, std::vector<LayerProfile>> by_type_;
};

struct Processor {
  std::string id;
  std::string type;
};

struct ClusterSpec {
  std::vector<Processor> processors;
  double bandwidth_bytes_per_sec = 0.0;
  std::map<std::string, ProcessorType> types;
  /// Keyed by (id, id) with the lexicographically smaller id first.
  std::map<std::pair<std::string, std::string>, double> bandwidth_overrides;

  /// Throws InputError on BW <= 0, no processors, or repeated ids.
  void validate() const;
  const Processor& processor(const std::string& id) const;
  double bandwidth_between(const std::string& a, const std::string& b) const;
};

// File formats. Both carry "format_version": 1.
nlohmann::json profile_to_json(const ProfileSet& set, const std::string& processor_type);
/// One document per processor type, wrapped as {"format_version": 1, "profiles": [...]}.
nlohmann::json profile_bundle_to_json(const ProfileSet& set);
/// Accepts single-type documents and bundles; merges them into one set.
ProfileSet profile_set_from_json(std::span<const nlohmann::json> docs);
ProfileSet profile_set_from_json(const nlohmann::json& doc);

nlohmann::json to_json(const ClusterSpec& cluster);
ClusterSpec cluster_from_json(const nlohmann::json& j);

/// Cumulative fractions over layers. Each defined curve is nondecreasing
/// and its last entry is exactly 1.0. A quantity whose total is zero is
/// flagged and its curve left empty.
struct AlcrCurves {
  std::vector<double> compute;
  std::vector<double> activation;
  std::vector<double> params;
  bool compute_defined = false;
  bool activation_defined = false;
  bool params_defined = false;
};

AlcrCurves compute_alcr(std::span<const LayerProfile> layers);

enum class SynthTemplate { vgg16bn_like, uniform, custom };

SynthTemplate synth_template_from_string(const std::string& name);
std::string to_string(SynthTemplate t);

struct SynthScale {
  std::string model_name = "synthetic";
  int batch_size = 64;
  /// Whole-model fwd+bwd time of one minibatch at speed factor 1.
  double total_time_us = 200000.0;
  /// Occupied sites per sample entering the first layer (vgg16bn_like).
  double input_sites = 284000.0;
  /// uniform: per-layer values.
  double layer_time_us = 1000.0;
  std::uint64_t activation_bytes = 1 << 20;
  std::uint64_t param_bytes = 1 << 20;
  /// custom: base layers at speed factor 1; L must match.
  std::vector<LayerProfile> custom_layers;
};

/// Generates a profile for every entry of `speed_factors` (type -> time
/// multiplier). Each layer's time splits one third forward, two thirds backward.
ProfileSet synth_profile(SynthTemplate tmpl, int num_layers, const SynthScale& scale,
                         const std::map<std::string, double>& speed_factors);

/// Layer names of the 53-layer VGG16-BN layout used by vgg16bn_like.
const std::vector<std::string>& vgg16bn_layer_names();

}  // namespace voxpipe
