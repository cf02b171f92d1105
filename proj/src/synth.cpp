// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <string>

#include "voxpipe/errors.hpp"
#include "voxpipe/profile.hpp"

namespace voxpipe {

namespace {

constexpr int kVggLayers = 53;
constexpr double kPoolReduction = 8.0;  // occupied sites shrink ~8x per 2x2x2 pool
constexpr double kElementCost = 10.0;   // per-site, per-channel cost of elementwise layers
constexpr double kDenseCostScale = 0.05;
constexpr int kNumClasses = 40;

struct BaseLayer {
  double compute;               // relative units
  double activation_per_sample; // bytes
  double params;                // bytes
};

// Relative costs of a sparse VGG16-BN over voxelized input. Compute tracks
// occupied sites times channel products; activations track sites times
// (features + coordinates); params are float32 weights.
std::vector<BaseLayer> vgg16bn_base(double input_sites) {
  const std::vector<std::vector<int>> blocks = {
      {64, 64}, {128, 128}, {256, 256, 256}, {512, 512, 512}, {512, 512, 512}};
  std::vector<BaseLayer> out;
  double cin = 1.0;
  double compute_sites = 1.0;
  double sites = input_sites;
  for (const auto& block : blocks) {
    for (int ci : block) {
      const double c = ci;
      const double act = sites * (c * 4.0 + 16.0);
      out.push_back({2.0 * compute_sites * 27.0 * cin * c, act, 27.0 * cin * c * 4.0});
      out.push_back({compute_sites * c * kElementCost, act, 2.0 * c * 4.0});
      out.push_back({compute_sites * c * kElementCost / 2.0, act, 0.0});
      cin = c;
    }
    compute_sites /= kPoolReduction;
    sites /= kPoolReduction;
    out.push_back({compute_sites * kPoolReduction * cin * kElementCost / 2.0,
                   sites * (cin * 4.0 + 16.0), 0.0});
  }
  out.push_back({compute_sites * cin * kElementCost, 512.0 * 4.0, 0.0});  // global pool
  out.push_back({1e-9, 512.0 * 4.0, 0.0});                                // flatten
  const std::vector<std::pair<double, double>> dense = {
      {512.0, 4096.0}, {4096.0, 4096.0}, {4096.0, kNumClasses}};
  for (const auto& [a, b] : dense) {
    out.push_back({2.0 * a * b * compute_sites * kDenseCostScale, b * 4.0, (a * b + b) * 4.0});
    if (b != kNumClasses) {
      const double elem = b * kElementCost * compute_sites * kDenseCostScale;
      out.push_back({elem, b * 4.0, 0.0});  // relu
      out.push_back({elem, b * 4.0, 0.0});  // dropout
    }
  }
  return out;
}

std::vector<LayerProfile> split_times(const std::vector<double>& total_us,
                                      const std::vector<std::uint64_t>& act,
                                      const std::vector<std::uint64_t>& params) {
  std::vector<LayerProfile> out(total_us.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].layer_id = static_cast<int>(i);
    out[i].fwd_time_us = total_us[i] / 3.0;
    out[i].bwd_time_us = total_us[i] - out[i].fwd_time_us;
    out[i].activation_bytes = act[i];
    out[i].param_bytes = params[i];
  }
  return out;
}

std::vector<LayerProfile> vgg_layers(int num_layers, const SynthScale& scale) {
  if (!(scale.input_sites > 0) || scale.batch_size < 1 || !(scale.total_time_us > 0)) {
    throw InputError("vgg16bn_like needs positive input_sites, batch_size and total_time_us");
  }
  const auto base = vgg16bn_base(scale.input_sites);
  const auto n = static_cast<std::size_t>(num_layers);
  std::vector<double> compute(n, 0.0), params(n, 0.0);
  std::vector<std::uint64_t> act(n, 0);
  if (num_layers == kVggLayers) {
    for (std::size_t i = 0; i < n; ++i) {
      compute[i] = base[i].compute;
      params[i] = base[i].params;
      act[i] = static_cast<std::uint64_t>(std::llround(base[i].activation_per_sample * scale.batch_size));
    }
  } else {
    // Resample the canonical layers over equal-width fractional intervals:
    // compute and params integrate, the activation crossing the right edge
    // of an interval is the one its output carries.
    const double width = static_cast<double>(kVggLayers) / num_layers;
    for (std::size_t r = 0; r < n; ++r) {
      const double lo = r * width;
      const double hi = (r + 1) * width;
      for (int b = static_cast<int>(std::floor(lo)); b < kVggLayers && b < hi; ++b) {
        const double overlap = std::min(hi, b + 1.0) - std::max(lo, static_cast<double>(b));
        if (overlap <= 0) continue;
        compute[r] += base[static_cast<std::size_t>(b)].compute * overlap;
        params[r] += base[static_cast<std::size_t>(b)].params * overlap;
      }
      const int src = std::clamp(static_cast<int>(std::ceil(hi - 1e-9)) - 1, 0, kVggLayers - 1);
      act[r] = static_cast<std::uint64_t>(
          std::llround(base[static_cast<std::size_t>(src)].activation_per_sample * scale.batch_size));
    }
  }
  double total = 0.0;
  for (double c : compute) total += c;
  std::vector<double> times(n);
  std::vector<std::uint64_t> param_bytes(n);
  for (std::size_t i = 0; i < n; ++i) {
    times[i] = scale.total_time_us * compute[i] / total;
    param_bytes[i] = static_cast<std::uint64_t>(std::llround(params[i]));
  }
  return split_times(times, act, param_bytes);
}

}  // namespace

SynthTemplate synth_template_from_string(const std::string& name) {
  if (name == "vgg16bn_like") return SynthTemplate::vgg16bn_like;
  if (name == "uniform") return SynthTemplate::uniform;
  if (name == "custom") return SynthTemplate::custom;
  throw InputError("unknown synthetic template '" + name + "'");
}

std::string to_string(SynthTemplate t) {
  switch (t) {
    case SynthTemplate::vgg16bn_like: return "vgg16bn_like";
    case SynthTemplate::uniform: return "uniform";
    case SynthTemplate::custom: return "custom";
  }
  return "unknown";
}

const std::vector<std::string>& vgg16bn_layer_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    const int convs_per_block[] = {2, 2, 3, 3, 3};
    for (int b = 0; b < 5; ++b) {
      for (int c = 0; c < convs_per_block[b]; ++c) {
        const std::string tag = std::to_string(b + 1) + "_" + std::to_string(c + 1);
        out.push_back("conv" + tag);
        out.push_back("bn" + tag);
        out.push_back("relu" + tag);
      }
      out.push_back("pool" + std::to_string(b + 1));
    }
    for (const char* n : {"avgpool", "flatten", "fc1", "fc1_relu", "fc1_dropout", "fc2",
                          "fc2_relu", "fc2_dropout", "fc3"}) {
      out.emplace_back(n);
    }
    return out;
  }();
  return names;
}

ProfileSet synth_profile(SynthTemplate tmpl, int num_layers, const SynthScale& scale,
                         const std::map<std::string, double>& speed_factors) {
  if (num_layers < 1) throw InputError("synthetic profile needs at least one layer");
  if (speed_factors.empty()) throw InputError("synthetic profile needs at least one processor type");
  for (const auto& [name, f] : speed_factors) {
    if (!(f > 0) || !std::isfinite(f)) {
      throw InputError("speed factor for '" + name + "' must be positive and finite");
    }
  }

  std::vector<LayerProfile> base;
  switch (tmpl) {
    case SynthTemplate::vgg16bn_like:
      base = vgg_layers(num_layers, scale);
      break;
    case SynthTemplate::uniform: {
      if (!(scale.layer_time_us >= 0)) throw InputError("layer_time_us must be non-negative");
      const auto n = static_cast<std::size_t>(num_layers);
      base = split_times(std::vector<double>(n, scale.layer_time_us),
                         std::vector<std::uint64_t>(n, scale.activation_bytes),
                         std::vector<std::uint64_t>(n, scale.param_bytes));
      break;
    }
    case SynthTemplate::custom:
      if (scale.custom_layers.size() != static_cast<std::size_t>(num_layers)) {
        throw StructuralError("custom template has " + std::to_string(scale.custom_layers.size()) +
                              " layers, expected " + std::to_string(num_layers));
      }
      base = scale.custom_layers;
      validate_layers(base);
      break;
  }

  ProfileSet set(scale.model_name, scale.batch_size);
  for (const auto& [name, f] : speed_factors) {
    std::vector<LayerProfile> layers = base;
    for (auto& l : layers) {
      l.fwd_time_us *= f;
      l.bwd_time_us *= f;
    }
    set.add(name, std::move(layers));
  }
  return set;
}

}  // namespace voxpipe
