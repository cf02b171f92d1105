// SPDX-License-Identifier: Apache-2.0
#include <string>

#include "voxpipe/errors.hpp"
#include "voxpipe/profile.hpp"

namespace voxpipe {

namespace {

constexpr int kFormatVersion = 1;

void check_version(const nlohmann::json& j, const char* what) {
  if (!j.contains("format_version")) {
    throw InputError(std::string(what) + ": missing format_version");
  }
  if (j.at("format_version").get<int>() != kFormatVersion) {
    throw InputError(std::string(what) + ": unsupported format_version");
  }
}

std::uint64_t get_bytes(const nlohmann::json& j, const char* key) {
  const auto& v = j.at(key);
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer()) {
    const auto s = v.get<std::int64_t>();
    if (s < 0) throw InputError(std::string(key) + " must be non-negative");
    return static_cast<std::uint64_t>(s);
  }
  throw InputError(std::string(key) + " must be a non-negative integer");
}

void add_single(ProfileSet& set, bool& initialized, const nlohmann::json& doc) {
  check_version(doc, "profile");
  const std::string model = doc.at("model_name").get<std::string>();
  const int batch = doc.at("batch_size").get<int>();
  if (batch < 1) throw InputError("profile: batch_size must be >= 1");
  if (!initialized) {
    set = ProfileSet(model, batch);
    initialized = true;
  } else if (set.model_name() != model || set.batch_size() != batch) {
    throw InputError("profile: files describe different models or batch sizes");
  }
  const std::string type = doc.at("processor_type").get<std::string>();
  if (set.has(type)) throw InputError("profile: processor type '" + type + "' given twice");
  std::vector<LayerProfile> layers;
  for (const auto& l : doc.at("layers")) {
    LayerProfile p;
    p.layer_id = l.at("layer_id").get<int>();
    p.fwd_time_us = l.at("fwd_time_us").get<double>();
    p.bwd_time_us = l.at("bwd_time_us").get<double>();
    p.activation_bytes = get_bytes(l, "activation_bytes");
    p.param_bytes = get_bytes(l, "param_bytes");
    layers.push_back(p);
  }
  if (layers.empty()) throw InputError("profile: '" + type + "' lists no layers");
  set.add(type, std::move(layers));
}

std::optional<double> opt_number(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

}  // namespace

nlohmann::json profile_to_json(const ProfileSet& set, const std::string& processor_type) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : set.layers(processor_type)) {
    layers.push_back({{"layer_id", l.layer_id},
                      {"fwd_time_us", l.fwd_time_us},
                      {"bwd_time_us", l.bwd_time_us},
                      {"activation_bytes", l.activation_bytes},
                      {"param_bytes", l.param_bytes}});
  }
  return {{"format_version", kFormatVersion},
          {"model_name", set.model_name()},
          {"batch_size", set.batch_size()},
          {"processor_type", processor_type},
          {"layers", std::move(layers)}};
}

nlohmann::json profile_bundle_to_json(const ProfileSet& set) {
  nlohmann::json docs = nlohmann::json::array();
  for (const auto& type : set.types()) docs.push_back(profile_to_json(set, type));
  return {{"format_version", kFormatVersion}, {"profiles", std::move(docs)}};
}

ProfileSet profile_set_from_json(std::span<const nlohmann::json> docs) {
  try {
    ProfileSet set;
    bool initialized = false;
    for (const auto& doc : docs) {
      if (doc.contains("profiles")) {
        check_version(doc, "profile bundle");
        for (const auto& inner : doc.at("profiles")) add_single(set, initialized, inner);
      } else {
        add_single(set, initialized, doc);
      }
    }
    if (set.empty()) throw InputError("profile: no processor types given");
    return set;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("profile: ") + e.what());
  }
}

ProfileSet profile_set_from_json(const nlohmann::json& doc) {
  return profile_set_from_json(std::span<const nlohmann::json>(&doc, 1));
}

nlohmann::json to_json(const ClusterSpec& cluster) {
  nlohmann::json procs = nlohmann::json::array();
  for (const auto& p : cluster.processors) procs.push_back({{"id", p.id}, {"type", p.type}});
  nlohmann::json j = {{"format_version", kFormatVersion},
                      {"processors", std::move(procs)},
                      {"bandwidth_bytes_per_sec", cluster.bandwidth_bytes_per_sec}};
  if (!cluster.types.empty()) {
    nlohmann::json types = nlohmann::json::array();
    for (const auto& [name, t] : cluster.types) {
      nlohmann::json e = {{"name", name}};
      if (t.cuda_cores) e["cuda_cores"] = *t.cuda_cores;
      if (t.boost_clock_mhz) e["boost_clock_mhz"] = *t.boost_clock_mhz;
      if (t.tflops_sp) e["tflops_sp"] = *t.tflops_sp;
      if (t.memory_gb) e["memory_gb"] = *t.memory_gb;
      if (t.memory_bw_gbs) e["memory_bw_gbs"] = *t.memory_bw_gbs;
      types.push_back(std::move(e));
    }
    j["processor_types"] = std::move(types);
  }
  if (!cluster.bandwidth_overrides.empty()) {
    nlohmann::json ov = nlohmann::json::array();
    for (const auto& [key, bw] : cluster.bandwidth_overrides) {
      ov.push_back({{"a", key.first}, {"b", key.second}, {"bandwidth_bytes_per_sec", bw}});
    }
    j["bandwidth_overrides"] = std::move(ov);
  }
  return j;
}

ClusterSpec cluster_from_json(const nlohmann::json& j) {
  try {
    check_version(j, "cluster");
    ClusterSpec c;
    for (const auto& p : j.at("processors")) {
      c.processors.push_back({p.at("id").get<std::string>(), p.at("type").get<std::string>()});
    }
    c.bandwidth_bytes_per_sec = j.at("bandwidth_bytes_per_sec").get<double>();
    if (j.contains("processor_types")) {
      for (const auto& t : j.at("processor_types")) {
        ProcessorType pt;
        pt.name = t.at("name").get<std::string>();
        pt.cuda_cores = opt_number(t, "cuda_cores");
        pt.boost_clock_mhz = opt_number(t, "boost_clock_mhz");
        pt.tflops_sp = opt_number(t, "tflops_sp");
        pt.memory_gb = opt_number(t, "memory_gb");
        pt.memory_bw_gbs = opt_number(t, "memory_bw_gbs");
        if (!c.types.emplace(pt.name, pt).second) {
          throw InputError("cluster: processor type '" + pt.name + "' declared twice");
        }
      }
    }
    if (j.contains("bandwidth_overrides")) {
      for (const auto& o : j.at("bandwidth_overrides")) {
        auto a = o.at("a").get<std::string>();
        auto b = o.at("b").get<std::string>();
        if (b < a) std::swap(a, b);
        c.bandwidth_overrides[{a, b}] = o.at("bandwidth_bytes_per_sec").get<double>();
      }
    }
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("cluster: ") + e.what());
  }
}

}  // namespace voxpipe
