// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <random>

#include "fixtures.hpp"
#include "voxpipe/errors.hpp"
#include "voxpipe/partitioner.hpp"
#include "voxpipe/pipeline_sim.hpp"

using namespace voxpipe;
using namespace voxpipe::testing;

namespace {

PartitionPlan manual_plan(std::vector<Stage> stages) {
  PartitionPlan p;
  p.stages = std::move(stages);
  p.split_config = split_config_of(p.stages);
  return p;
}

/// S equal stages of one layer each, fwd 1 s, bwd 2 s, no transfers.
SimConfig equal_stages(int stages, int minibatches) {
  std::vector<double> f(static_cast<std::size_t>(stages), 1e6), b(static_cast<std::size_t>(stages), 2e6);
  std::vector<std::uint64_t> zero(static_cast<std::size_t>(stages), 0);
  SimConfig c;
  c.profiles = scaled_profiles(make_layers(f, b, zero, zero), {{"A", 1.0}});
  c.cluster = make_cluster(std::vector<std::string>(static_cast<std::size_t>(stages), "A"), 1e9);
  std::vector<Stage> s;
  for (int i = 0; i < stages; ++i) s.push_back({i, i, {"A" + std::to_string(i)}, 3.0});
  c.plan = manual_plan(s);
  c.num_minibatches = minibatches;
  return c;
}

/// Two-layer model; layer 0 costs twice layer 1 and runs replicated on two
/// processors, layer 1 runs on the third.
SimConfig hybrid(int minibatches) {
  SimConfig c;
  c.profiles = scaled_profiles(make_layers({2e6, 1e6}, {4e6, 2e6}, {0, 0}, {0, 0}), {{"A", 1.0}});
  c.cluster = make_cluster({"A", "A", "A"}, 1e9);
  c.plan = manual_plan({{0, 0, {"A0", "A1"}, 3.0}, {1, 1, {"A2"}, 3.0}});
  c.num_minibatches = minibatches;
  return c;
}

}  // namespace

TEST_CASE("serial single stage") {
  auto c = equal_stages(1, 10);
  const auto r = simulate(c);
  CHECK(r.total_time == doctest::Approx(30.0));
  CHECK(r.bubble_fraction == doctest::Approx(0.0));
  CHECK(r.busy_fraction.at("A0") == doctest::Approx(1.0));
  CHECK(r.timeline.size() == 20);
}

TEST_CASE("route_replica is round robin") {
  CHECK(route_replica(5, 2) == 1);
  CHECK(route_replica(0, 7) == 0);
  std::vector<int> seq;
  for (int i = 0; i < 8; ++i) seq.push_back(route_replica(i, 3));
  CHECK(seq == std::vector<int>{0, 1, 2, 0, 1, 2, 0, 1});
  CHECK_THROWS(route_replica(1, 0));
}

TEST_CASE("four equal stages reach one stage's fwd+bwd per minibatch") {
  for (int b : {8, 50, 200}) {
    const auto r = simulate(equal_stages(4, b));
    CHECK(r.timeline.size() == static_cast<std::size_t>(2 * b * 4));
    CHECK(r.steady_state_period == doctest::Approx(3.0).epsilon(1e-9));
    // Fill plus drain: 3 stages of 1 s forward and 3 stages of 2 s backward.
    CHECK(r.total_time == doctest::Approx(3.0 * b + 9.0));
  }
  const auto small = simulate(equal_stages(4, 8));
  const auto large = simulate(equal_stages(4, 200));
  CHECK(large.busy_fraction.at("A3") > small.busy_fraction.at("A3"));
  CHECK(large.busy_fraction.at("A3") > 0.95);
}

TEST_CASE("1f1b warm-up admits S - s forwards before the first backward") {
  const auto r = simulate(equal_stages(4, 20));
  for (int s = 0; s < 4; ++s) {
    std::vector<WorkItem> items;
    for (const auto& w : r.timeline) {
      if (w.stage == s) items.push_back(w);
    }
    std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) { return a.start < b.start; });
    int fwd_before = 0;
    for (const auto& w : items) {
      if (w.direction == Direction::bwd) break;
      ++fwd_before;
    }
    CHECK(fwd_before == 4 - s);
  }
}

TEST_CASE("replicated hybrid pipeline balances throughput across processors") {
  const auto r = simulate(hybrid(200));
  const double a0 = r.steady_utilization.at("A0");
  const double a1 = r.steady_utilization.at("A1");
  const double a2 = r.steady_utilization.at("A2");
  CHECK(a0 == doctest::Approx(a2).epsilon(0.01));
  CHECK(a1 == doctest::Approx(a2).epsilon(0.01));
  CHECK(r.steady_state_period == doctest::Approx(3.0).epsilon(0.01));
  int on_a0 = 0;
  for (const auto& w : r.timeline) {
    if (w.stage == 0 && w.direction == Direction::fwd && w.processor == "A0") ++on_a0;
  }
  CHECK(on_a0 == 100);
}

TEST_CASE("weight stashing keeps forward and backward versions equal") {
  auto c = equal_stages(4, 30);
  const auto a = audit_weight_versions(simulate(c));
  CHECK(a.pass);
  CHECK(a.violations.empty());
}

TEST_CASE("without stashing the fifth minibatch sees three extra updates on the first stage") {
  auto c = equal_stages(4, 30);
  c.weight_stashing = false;
  const auto r = simulate(c);
  const auto a = audit_weight_versions(r);
  CHECK_FALSE(a.pass);
  const auto it = std::find_if(r.weight_versions.begin(), r.weight_versions.end(),
                               [](const auto& v) { return v.minibatch == 4 && v.stage == 0; });
  REQUIRE(it != r.weight_versions.end());
  CHECK(it->fwd_version == 1);
  CHECK(it->bwd_version == 4);
  CHECK(a.staleness.at(3) > 0);
}

TEST_CASE("single minibatch is trivially consistent") {
  auto c = equal_stages(3, 1);
  c.weight_stashing = false;
  CHECK(audit_weight_versions(simulate(c)).pass);
}

TEST_CASE("audit covers every minibatch and stage") {
  const auto r = simulate(hybrid(17));
  CHECK(r.weight_versions.size() == 17u * 2u);
}

TEST_CASE("naive model parallelism keeps one minibatch in flight") {
  auto c = equal_stages(4, 5);
  c.mode = SimMode::naive_mp;
  const auto r = simulate(c);
  CHECK(r.total_time == doctest::Approx(5 * 12.0));
  CHECK(audit_weight_versions(r).pass);
}

TEST_CASE("data parallel mode replicates the whole model") {
  SimConfig c = equal_stages(2, 10);
  c.mode = SimMode::data_parallel;
  c.plan = manual_plan({{0, 1, {"A0", "A1"}, 0.0}});
  const auto r = simulate(c);
  CHECK(r.num_stages == 1);
  // Each replica runs five minibatches of 6 s serially.
  CHECK(r.total_time == doctest::Approx(30.0));
}

TEST_CASE("work conservation, throughput bound and fairness on random plans") {
  std::mt19937_64 rng(61);
  for (int trial = 0; trial < 30; ++trial) {
    const auto inst = random_instance(rng, 5, 4, 2);
    SimConfig c;
    c.profiles = inst.profiles;
    c.cluster = inst.cluster;
    c.plan = plan(inst.profiles, inst.cluster, inst.cluster.bandwidth_bytes_per_sec);
    c.num_minibatches = 1 + static_cast<int>(rng() % 40);
    c.overlap_comm = trial % 2 == 0;
    const auto r = simulate(c);

    std::map<std::string, double> busy;
    for (const auto& w : r.timeline) busy[w.processor] += w.end - w.start;
    for (const auto& [proc, t] : r.busy_time) {
      CHECK(busy[proc] == doctest::Approx(t).epsilon(1e-9));
      CHECK(r.busy_fraction.at(proc) >= 0.0);
      CHECK(r.busy_fraction.at(proc) <= 1.0 + 1e-12);
    }
    CHECK(r.timeline.size() == static_cast<std::size_t>(2 * c.num_minibatches) * c.plan.stages.size());

    for (std::size_t s = 0; s < c.plan.stages.size(); ++s) {
      const auto& st = c.plan.stages[s];
      std::map<int, int> loads;
      for (const auto& w : r.timeline) {
        if (w.stage == static_cast<int>(s) && w.direction == Direction::fwd) ++loads[w.replica];
      }
      int lo = c.num_minibatches, hi = 0;
      for (std::size_t k = 0; k < st.processors.size(); ++k) {
        lo = std::min(lo, loads[static_cast<int>(k)]);
        hi = std::max(hi, loads[static_cast<int>(k)]);
      }
      CHECK(hi - lo <= 1);
    }

    // Steady state: long run, same plan.
    c.num_minibatches = 200;
    {
      const auto steady = simulate(c);
      double bound = 0.0;
      for (const auto& st : c.plan.stages) {
        double worst = 0.0;
        for (const auto& p : st.processors) {
          const auto& layers = c.profiles.layers(c.cluster.processor(p).type);
          double t = 0.0;
          for (int l = st.layer_start; l <= st.layer_end; ++l) t += layers[static_cast<std::size_t>(l)].total_time_us();
          worst = std::max(worst, t * 1e-6);
        }
        bound = std::max(bound, worst / static_cast<double>(st.processors.size()));
      }
      CHECK(steady.steady_state_period >= bound * (1 - 1e-9));
    }
  }
}

TEST_CASE("simulation is deterministic including noise") {
  auto c = hybrid(40);
  c.noise = 0.2;
  c.seed = 99;
  const auto a = simulate(c);
  const auto b = simulate(c);
  CHECK(a == b);
  CHECK(to_json(a).dump() == to_json(b).dump());
  c.seed = 100;
  CHECK_FALSE(simulate(c) == a);
}

TEST_CASE("non-replicated steady period matches the planner objective") {
  std::mt19937_64 rng(71);
  for (int trial = 0; trial < 20; ++trial) {
    auto inst = random_instance(rng, 6, 4, 3);
    SimConfig c;
    c.profiles = inst.profiles;
    c.cluster = inst.cluster;
    std::vector<Stage> stages;
    int start = 0;
    const int n = 1 + static_cast<int>(rng() % 4);
    for (int s = 0; s < n; ++s) {
      const int end = s == n - 1 ? 5 : std::min(5 - (n - 1 - s), start + static_cast<int>(rng() % 2));
      stages.push_back({start, end, {c.cluster.processors[static_cast<std::size_t>(s)].id}, 0.0});
      start = end + 1;
    }
    c.plan = manual_plan(stages);
    const double bw = c.cluster.bandwidth_bytes_per_sec;
    c.plan.objective = evaluate_plan(c.plan, c.profiles, c.cluster, bw);
    c.num_minibatches = 100;
    const auto r = simulate(c);
    CHECK(r.steady_state_period == doctest::Approx(c.plan.objective).epsilon(0.01));
  }
}

TEST_CASE("simulator rejects plans that do not fit the profiles") {
  auto c = equal_stages(2, 3);
  c.plan.stages.back().layer_end = 5;
  CHECK_THROWS_AS(simulate(c), StructuralError);
}

TEST_CASE("strategy comparison on a homogeneous cluster") {
  const auto base = make_layers({1e4, 2e4, 3e4, 1e4}, {2e4, 4e4, 6e4, 2e4}, {1000, 1000, 1000, 1000},
                                {1'000'000, 1'000'000, 2'000'000, 500'000});
  const auto p = scaled_profiles(base, {{"A", 1.0}});
  const auto c = make_cluster({"A", "A", "A"}, 1e9);
  const auto rows = compare_strategies(p, c, 1e9, {30, true, 0});
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].name == "DP");
  CHECK(rows[0].speedup == doctest::Approx(1.0));
  CHECK(rows[1].plan == rows[2].plan);
  CHECK(rows[1].total_time == rows[2].total_time);
  const auto csv = strategies_csv(rows);
  CHECK(csv.rfind("strategy,", 0) == 0);
}

TEST_CASE("timeline csv has one row per work item") {
  const auto r = simulate(equal_stages(2, 3));
  const auto csv = timeline_csv(r);
  CHECK(csv.rfind("time_start,time_end,processor,stage,replica,minibatch,direction\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == static_cast<long>(r.timeline.size() + 1));
}
