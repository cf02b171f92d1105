// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "voxpipe/profile.hpp"
#include "voxpipe/sparse_conv.hpp"

namespace voxpipe {

/// Time source for profiling. Layer timings are taken as now_us() deltas
/// around each layer call; stub layers consume time through wait_us().
class ProfileClock {
 public:
  virtual ~ProfileClock() = default;
  virtual double now_us() = 0;
  virtual void wait_us(double us) = 0;
};

/// Monotonic wall clock; wait_us() spins on the clock.
class SteadyProfileClock : public ProfileClock {
 public:
  double now_us() override;
  void wait_us(double us) override;
};

/// Deterministic clock that only moves on wait_us() or advance_us().
class ManualProfileClock : public ProfileClock {
 public:
  double now_us() override { return now_; }
  void wait_us(double us) override { now_ += us; }
  void advance_us(double us) { now_ += us; }

 private:
  double now_ = 0.0;
};

/// Costs for a layer that is not executed by the sparse convolution engine.
struct SyntheticCost {
  double fwd_time_us = 0.0;
  double bwd_time_us = 0.0;
  std::uint64_t activation_bytes = 0;
  std::uint64_t param_bytes = 0;
};

struct LayerSpec {
  std::string name;
  /// "sparse_conv" layers are executed; "stub" and every other kind are
  /// timed by waiting their synthetic cost on the clock.
  std::string kind;
  int out_channels = 0;
  int kernel_size = 3;
  std::vector<int> stride;
  std::optional<SyntheticCost> synthetic;
};

struct InputSpec {
  /// "grid": fully occupied box of `extents`. "random_points": `points`
  /// uniform samples per batch entry, voxelized into `extents`.
  std::string kind = "grid";
  std::vector<int> extents;
  int points = 0;
  int channels = 1;
};

struct ModelSpec {
  std::string model_name;
  int batch_size = 1;
  InputSpec input;
  std::vector<LayerSpec> layers;
  std::uint64_t seed = 0;
};

ModelSpec model_spec_from_json(const nlohmann::json& j);

struct BenchmarkOptions {
  int warmup_iters = 50;
  int profile_iters = 100;
};

/// Warm-up iterations are run and discarded, then per-layer times are
/// averaged over profile_iters. Data loading is not timed.
std::vector<LayerProfile> run_benchmark_profile(const ModelSpec& model,
                                                const std::string& processor_label,
                                                const BenchmarkOptions& options,
                                                ProfileClock& clock);

/// Builds the input tensor described by the spec (deterministic in seed).
SparseTensor make_model_input(const ModelSpec& model);

struct ConvBenchmark {
  LayerProfile profile;
  std::size_t kernel_map_pairs = 0;
  std::size_t output_rows = 0;
};

/// Times one convolution call (forward and backward) on `input`.
ConvBenchmark benchmark_conv(const SparseTensor& input, const ConvWeights& w,
                             const KernelShape& shape, std::span<const int> stride,
                             const BenchmarkOptions& options, ProfileClock& clock);

}  // namespace voxpipe
