// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <random>

#include "fixtures.hpp"
#include "voxpipe/benchmark.hpp"
#include "voxpipe/errors.hpp"
#include "voxpipe/profile.hpp"

using namespace voxpipe;
using namespace voxpipe::testing;

namespace {

void check_curve(const std::vector<double>& c, std::size_t n) {
  REQUIRE(c.size() == n);
  for (std::size_t i = 1; i < n; ++i) CHECK(c[i] >= c[i - 1]);
  CHECK(c.back() == 1.0);
  CHECK(c.front() >= 0.0);
}

}  // namespace

TEST_CASE("alcr of a uniform profile is linear") {
  const auto layers = make_layers({1, 1, 1, 1}, {2, 2, 2, 2}, {8, 8, 8, 8}, {4, 4, 4, 4});
  const auto c = compute_alcr(layers);
  REQUIRE(c.compute_defined);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(c.compute[i] == doctest::Approx((i + 1) / 4.0));
    CHECK(c.activation[i] == doctest::Approx((i + 1) / 4.0));
    CHECK(c.params[i] == doctest::Approx((i + 1) / 4.0));
  }
}

TEST_CASE("alcr curves are monotone and end at exactly one") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 60);
    const auto inst = random_instance(rng, n, 1, 1);
    const auto& layers = inst.profiles.layers(inst.profiles.types().front());
    const auto c = compute_alcr(layers);
    REQUIRE(c.compute_defined);
    check_curve(c.compute, layers.size());
    if (c.activation_defined) check_curve(c.activation, layers.size());
    if (c.params_defined) check_curve(c.params, layers.size());
  }
}

TEST_CASE("alcr flags an all-zero quantity and rejects empty input") {
  const auto layers = make_layers({1, 2}, {1, 2}, {5, 5}, {0, 0});
  const auto c = compute_alcr(layers);
  CHECK_FALSE(c.params_defined);
  CHECK(c.params.empty());
  CHECK(c.activation_defined);
  CHECK_THROWS_AS(compute_alcr(std::vector<LayerProfile>{}), InputError);
}

TEST_CASE("vgg16bn_like template front-loads activations and back-loads parameters") {
  const auto set = synth_profile(SynthTemplate::vgg16bn_like, 53, {}, {{"A", 1.0}, {"B", 2.0}});
  REQUIRE(set.num_layers() == 53);
  CHECK(vgg16bn_layer_names().size() == 53);
  const auto& a = set.layers("A");
  const auto& b = set.layers("B");
  double total = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(b[i].fwd_time_us == doctest::Approx(2 * a[i].fwd_time_us));
    CHECK(a[i].activation_bytes == b[i].activation_bytes);
    total += a[i].total_time_us();
  }
  CHECK(total == doctest::Approx(200000.0));
  const auto c = compute_alcr(a);
  REQUIRE(c.params_defined);
  // Early layers hold most activations; the classifier holds most parameters.
  CHECK(c.activation[12] > 0.5);
  CHECK(c.params[26] < 0.25);
  CHECK(c.compute[26] > 0.5);
}

TEST_CASE("synthetic templates resample to other layer counts") {
  for (int n : {1, 7, 53, 80}) {
    const auto set = synth_profile(SynthTemplate::vgg16bn_like, n, {}, {{"A", 1.0}});
    CHECK(set.num_layers() == static_cast<std::size_t>(n));
  }
  const auto u = synth_profile(SynthTemplate::uniform, 5, {}, {{"A", 1.0}});
  for (const auto& l : u.layers("A")) CHECK(l.total_time_us() == doctest::Approx(1000.0));
  CHECK_THROWS_AS(synth_profile(SynthTemplate::uniform, 5, {}, {{"A", 0.0}}), InputError);
  CHECK_THROWS_AS(synth_profile(SynthTemplate::uniform, 0, {}, {{"A", 1.0}}), InputError);
  CHECK_THROWS_AS(synth_template_from_string("resnet"), InputError);
}

TEST_CASE("profile sets enforce agreement across types") {
  ProfileSet set("m", 2);
  set.add("A", make_layers({1, 2}, {2, 4}, {10, 20}, {1, 2}));
  CHECK_THROWS_AS(set.add("B", make_layers({1}, {2}, {10}, {1})), InputError);
  CHECK_THROWS_AS(set.add("B", make_layers({1, 2}, {2, 4}, {10, 21}, {1, 2})), InputError);
  CHECK_THROWS_AS(set.add("C", make_layers({-1, 2}, {2, 4}, {10, 20}, {1, 2})), InputError);
  CHECK_THROWS_AS(set.layers("missing"), ConfigurationError);
}

TEST_CASE("profile json round trips through single documents and bundles") {
  const auto set = synth_profile(SynthTemplate::vgg16bn_like, 10, {}, {{"A", 1.0}, {"B", 1.5}});
  const auto bundle = profile_set_from_json(profile_bundle_to_json(set));
  CHECK(bundle.all() == set.all());
  std::vector<nlohmann::json> docs{profile_to_json(set, "A"), profile_to_json(set, "B")};
  const auto merged = profile_set_from_json(std::span<const nlohmann::json>(docs));
  CHECK(merged.all() == set.all());
  CHECK(merged.model_name() == set.model_name());

  auto bad = profile_to_json(set, "A");
  bad["format_version"] = 7;
  CHECK_THROWS_AS(profile_set_from_json(bad), InputError);
  auto empty = profile_to_json(set, "A");
  empty["layers"] = nlohmann::json::array();
  CHECK_THROWS_AS(profile_set_from_json(empty), InputError);
}

TEST_CASE("cluster json round trips and validates") {
  auto c = make_cluster({"X", "X", "Y"}, 1.25e9);
  c.types["X"] = {"X", 4352.0, 1545.0, 13.4, 11.0, 616.0};
  c.bandwidth_overrides[{"X0", "Y0"}] = 5e8;
  const auto back = cluster_from_json(to_json(c));
  CHECK(back.processors.size() == 3);
  CHECK(back.bandwidth_between("Y0", "X0") == 5e8);
  CHECK(back.bandwidth_between("X0", "X1") == 1.25e9);
  CHECK(back.types.at("X").tflops_sp == 13.4);
  auto dup = c;
  dup.processors.push_back({"X0", "X"});
  CHECK_THROWS_AS(dup.validate(), InputError);
  auto nobw = c;
  nobw.bandwidth_bytes_per_sec = 0;
  CHECK_THROWS_AS(nobw.validate(), InputError);
}

TEST_CASE("benchmark profiling with a manual clock is exact for stub layers") {
  ModelSpec spec;
  spec.model_name = "stub";
  spec.input.extents = {3, 3, 3};
  for (int i = 0; i < 3; ++i) {
    LayerSpec l;
    l.name = "stub" + std::to_string(i);
    l.kind = "stub";
    l.synthetic = SyntheticCost{10.0 * (i + 1), 20.0 * (i + 1), 100u * (i + 1), 7u};
    spec.layers.push_back(l);
  }
  ManualProfileClock clock;
  const auto layers = run_benchmark_profile(spec, "cpu", {50, 100}, clock);
  REQUIRE(layers.size() == 3);
  for (int i = 0; i < 3; ++i) {
    CHECK(layers[i].layer_id == i);
    CHECK(layers[i].fwd_time_us == doctest::Approx(10.0 * (i + 1)));
    CHECK(layers[i].bwd_time_us == doctest::Approx(20.0 * (i + 1)));
    CHECK(layers[i].activation_bytes == 100u * (i + 1));
  }
  // Warm-up plus measured iterations all consume clock time.
  CHECK(clock.now_us() == doctest::Approx(150 * (30.0 + 60.0 + 90.0)));
}

TEST_CASE("benchmark profiling runs real sparse convolutions") {
  const auto spec = model_spec_from_json(nlohmann::json::parse(R"({
    "model_name": "tiny", "batch_size": 1, "seed": 3,
    "input": {"kind": "grid", "extents": [4, 4, 4], "channels": 2},
    "layers": [
      {"name": "conv1", "kind": "sparse_conv", "out_channels": 4, "kernel_size": 3},
      {"name": "down", "kind": "sparse_conv", "out_channels": 4, "kernel_size": 3, "stride": [2, 2, 2]}
    ]})"));
  ManualProfileClock clock;
  const auto layers = run_benchmark_profile(spec, "cpu", {1, 2}, clock);
  REQUIRE(layers.size() == 2);
  // Serialized output tensor: 36-byte header, then 4 int32 coordinates and
  // 4 doubles per row.
  CHECK(layers[0].activation_bytes == 36u + 64u * (16u + 32u));
  CHECK(layers[1].activation_bytes == 36u + 8u * (16u + 32u));
  CHECK(layers[0].param_bytes == 27u * 2u * 4u * 8u);
  CHECK_THROWS_AS(model_spec_from_json(nlohmann::json::parse(R"({"layers": 3})")), InputError);
}
