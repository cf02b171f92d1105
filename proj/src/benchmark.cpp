// SPDX-License-Identifier: Apache-2.0
#include "voxpipe/benchmark.hpp"

#include <chrono>
#include <random>
#include <string>

#include "voxpipe/errors.hpp"

namespace voxpipe {

double SteadyProfileClock::now_us() {
  const auto t = std::chrono::steady_clock::now().time_since_epoch();
  return std::chrono::duration<double, std::micro>(t).count();
}

void SteadyProfileClock::wait_us(double us) {
  const double until = now_us() + us;
  while (now_us() < until) {
  }
}

namespace {

double unit_draw(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

SyntheticCost synthetic_from_json(const nlohmann::json& j) {
  SyntheticCost c;
  c.fwd_time_us = j.at("fwd_time_us").get<double>();
  c.bwd_time_us = j.at("bwd_time_us").get<double>();
  c.activation_bytes = j.value("activation_bytes", std::uint64_t{0});
  c.param_bytes = j.value("param_bytes", std::uint64_t{0});
  if (!(c.fwd_time_us >= 0) || !(c.bwd_time_us >= 0)) {
    throw InputError("synthetic layer times must be non-negative");
  }
  return c;
}

void check_model(const ModelSpec& m) {
  if (m.batch_size < 1) throw InputError("model batch_size must be >= 1");
  if (m.layers.empty()) throw InputError("model lists no layers");
  if (m.input.extents.empty()) throw InputError("model input needs extents");
  for (int e : m.input.extents) {
    if (e < 1) throw InputError("model input extents must be positive");
  }
  if (m.input.channels < 1) throw InputError("model input needs at least one channel");
  if (m.input.kind != "grid" && m.input.kind != "random_points") {
    throw InputError("unknown model input kind '" + m.input.kind + "'");
  }
  if (m.input.kind == "random_points" && m.input.points < 0) {
    throw InputError("random_points input needs a non-negative point count");
  }
  for (const auto& l : m.layers) {
    if (l.kind == "sparse_conv") {
      if (l.out_channels < 1) throw InputError("layer '" + l.name + "' needs out_channels >= 1");
      if (l.kernel_size < 1 || l.kernel_size % 2 == 0) {
        throw InputError("layer '" + l.name + "' needs an odd kernel_size");
      }
      if (!l.stride.empty() && l.stride.size() != m.input.extents.size()) {
        throw StructuralError("layer '" + l.name + "' stride does not match input dimension");
      }
    } else if (!l.synthetic) {
      throw ConfigurationError("layer '" + l.name + "' of kind '" + l.kind +
                               "' cannot be executed and has no synthetic cost");
    }
  }
}

}  // namespace

ModelSpec model_spec_from_json(const nlohmann::json& j) {
  try {
    ModelSpec m;
    m.model_name = j.at("model_name").get<std::string>();
    m.batch_size = j.value("batch_size", 1);
    m.seed = j.value("seed", std::uint64_t{0});
    const auto& in = j.at("input");
    m.input.kind = in.value("kind", std::string("grid"));
    m.input.extents = in.at("extents").get<std::vector<int>>();
    m.input.points = in.value("points", 0);
    m.input.channels = in.value("channels", 1);
    for (const auto& l : j.at("layers")) {
      LayerSpec s;
      s.name = l.value("name", std::string());
      s.kind = l.at("kind").get<std::string>();
      s.out_channels = l.value("out_channels", 0);
      s.kernel_size = l.value("kernel_size", 3);
      s.stride = l.value("stride", std::vector<int>{});
      if (l.contains("synthetic")) s.synthetic = synthetic_from_json(l.at("synthetic"));
      m.layers.push_back(std::move(s));
    }
    check_model(m);
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("model definition: ") + e.what());
  }
}

SparseTensor make_model_input(const ModelSpec& model) {
  check_model(model);
  const auto& in = model.input;
  std::mt19937_64 rng(model.seed);
  const int dim = static_cast<int>(in.extents.size());
  std::vector<SparseTensor> samples;
  for (int b = 0; b < model.batch_size; ++b) {
    if (in.kind == "grid") {
      DenseGrid g{in.extents, in.channels, {}};
      g.values.resize(g.sites() * static_cast<std::size_t>(in.channels));
      for (double& v : g.values) v = 2.0 * unit_draw(rng) - 1.0;
      samples.push_back(sparse_from_dense(g));
    } else {
      PointCloud cloud;
      cloud.dim = dim;
      const auto n = static_cast<std::size_t>(in.points);
      cloud.points.resize(n * static_cast<std::size_t>(dim));
      for (std::size_t i = 0; i < n; ++i) {
        for (int a = 0; a < dim; ++a) {
          cloud.points[i * static_cast<std::size_t>(dim) + static_cast<std::size_t>(a)] =
              unit_draw(rng) * in.extents[static_cast<std::size_t>(a)];
        }
      }
      cloud.features = std::vector<double>(n * static_cast<std::size_t>(in.channels));
      for (double& v : *cloud.features) v = 2.0 * unit_draw(rng) - 1.0;
      cloud.feature_width = in.channels;
      samples.push_back(voxelize(cloud, 1.0, in.extents));
    }
  }
  return batch(samples);
}

std::vector<LayerProfile> run_benchmark_profile(const ModelSpec& model,
                                                const std::string& processor_label,
                                                const BenchmarkOptions& options,
                                                ProfileClock& clock) {
  if (options.warmup_iters < 0 || options.profile_iters < 1) {
    throw InputError("profiling needs warmup >= 0 and at least one profile iteration");
  }
  if (processor_label.empty()) throw InputError("processor label must not be empty");
  const SparseTensor input = make_model_input(model);
  const int dim = input.dim();
  const std::size_t n = model.layers.size();

  std::vector<ConvWeights> weights(n);
  std::vector<KernelShape> shapes;
  std::vector<std::vector<int>> strides(n);
  std::vector<LayerProfile> out(n);
  int width = input.feature_width();
  for (std::size_t i = 0; i < n; ++i) {
    const LayerSpec& l = model.layers[i];
    out[i].layer_id = static_cast<int>(i);
    if (l.kind == "sparse_conv") {
      shapes.push_back(KernelShape::hypercube(dim, l.kernel_size));
      weights[i] = ConvWeights::random(shapes.back().volume(), width, l.out_channels,
                                       model.seed + 1 + i, 0.1);
      strides[i] = l.stride.empty() ? std::vector<int>(static_cast<std::size_t>(dim), 1) : l.stride;
      out[i].param_bytes = weights[i].values.size() * sizeof(double);
      width = l.out_channels;
    } else {
      shapes.push_back(KernelShape::hypercube(dim, 1));
      out[i].param_bytes = l.synthetic->param_bytes;
      out[i].activation_bytes = l.synthetic->activation_bytes;
    }
  }

  std::vector<double> fwd_sum(n, 0.0), bwd_sum(n, 0.0);
  const int total_iters = options.warmup_iters + options.profile_iters;
  for (int it = 0; it < total_iters; ++it) {
    const bool record = it >= options.warmup_iters;
    std::vector<SparseTensor> inputs;
    inputs.reserve(n);
    SparseTensor x = input;
    for (std::size_t i = 0; i < n; ++i) {
      const LayerSpec& l = model.layers[i];
      inputs.push_back(x);
      const double t0 = clock.now_us();
      if (l.kind == "sparse_conv") {
        x = sparse_conv_forward(x, weights[i], shapes[i], strides[i]);
      } else {
        clock.wait_us(l.synthetic->fwd_time_us);
      }
      const double t1 = clock.now_us();
      if (record) fwd_sum[i] += t1 - t0;
      if (l.kind == "sparse_conv" && it == 0) out[i].activation_bytes = binary_size(x);
    }
    std::vector<double> grad(x.features().size(), 1.0);
    for (std::size_t i = n; i-- > 0;) {
      const LayerSpec& l = model.layers[i];
      const double t0 = clock.now_us();
      if (l.kind == "sparse_conv") {
        const auto g = sparse_conv_backward(inputs[i], weights[i], shapes[i], strides[i], grad);
        grad = g.grad_in;
      } else {
        clock.wait_us(l.synthetic->bwd_time_us);
      }
      const double t1 = clock.now_us();
      if (record) bwd_sum[i] += t1 - t0;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    out[i].fwd_time_us = fwd_sum[i] / options.profile_iters;
    out[i].bwd_time_us = bwd_sum[i] / options.profile_iters;
  }
  validate_layers(out);
  return out;
}

ConvBenchmark benchmark_conv(const SparseTensor& input, const ConvWeights& w,
                             const KernelShape& shape, std::span<const int> stride,
                             const BenchmarkOptions& options, ProfileClock& clock) {
  if (options.warmup_iters < 0 || options.profile_iters < 1) {
    throw InputError("benchmark needs warmup >= 0 and at least one profile iteration");
  }
  ConvBenchmark r;
  const OutputCoordinates oc = generate_output_coords(input, stride);
  r.output_rows = oc.coords.size();
  r.kernel_map_pairs =
      build_kernel_map(input.coords(), oc.coords, shape, input.tensor_stride()).pairs();
  double fwd = 0.0, bwd = 0.0;
  for (int it = 0; it < options.warmup_iters + options.profile_iters; ++it) {
    const double t0 = clock.now_us();
    const SparseTensor y = sparse_conv_forward(input, w, shape, stride);
    const double t1 = clock.now_us();
    std::vector<double> grad(y.features().size(), 1.0);
    const auto g = sparse_conv_backward(input, w, shape, stride, grad);
    const double t2 = clock.now_us();
    if (it >= options.warmup_iters) {
      fwd += t1 - t0;
      bwd += t2 - t1;
    }
    if (it == 0) r.profile.activation_bytes = binary_size(y);
  }
  r.profile.fwd_time_us = fwd / options.profile_iters;
  r.profile.bwd_time_us = bwd / options.profile_iters;
  r.profile.param_bytes = w.values.size() * sizeof(double);
  return r;
}

}  // namespace voxpipe
