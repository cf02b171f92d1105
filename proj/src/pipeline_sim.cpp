// SPDX-License-Identifier: Apache-2.0
#include "voxpipe/pipeline_sim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <tuple>

#include "voxpipe/errors.hpp"

namespace voxpipe {

SimMode sim_mode_from_string(const std::string& name) {
  if (name == "naive_mp") return SimMode::naive_mp;
  if (name == "pipedream_1f1b") return SimMode::pipedream_1f1b;
  if (name == "data_parallel") return SimMode::data_parallel;
  throw InputError("unknown simulation mode '" + name + "'");
}

std::string to_string(SimMode mode) {
  switch (mode) {
    case SimMode::naive_mp: return "naive_mp";
    case SimMode::pipedream_1f1b: return "pipedream_1f1b";
    case SimMode::data_parallel: return "data_parallel";
  }
  return "unknown";
}

int route_replica(int minibatch, int replica_count) {
  if (replica_count < 1) throw InputError("replica count must be >= 1");
  if (minibatch < 0) throw InputError("minibatch id must be non-negative");
  return minibatch % replica_count;
}

namespace {

struct Replica {
  std::string proc;
  double fwd = 0.0;
  double bwd = 0.0;   // includes parameter synchronization
  int limit = 1;      // forwards admitted before their backward completes
  double blocked_until = 0.0;
  bool busy = false;
  int inflight = 0;
  int version = 0;
  Direction last = Direction::bwd;
  std::set<int> ready_fwd;
  std::set<int> ready_bwd;
};

struct StageRt {
  int first = 0;
  int last = 0;
  std::uint64_t out_bytes = 0;
  std::vector<Replica> replicas;
};

enum EventKind { kComputeDone = 0, kArrival = 1 };

struct Event {
  double time;
  int stage;
  int mb;
  Direction dir;
  EventKind kind;
  int replica;

  friend bool operator<(const Event& a, const Event& b) {
    return std::tie(a.time, a.stage, a.mb, a.dir, a.kind, a.replica) <
           std::tie(b.time, b.stage, b.mb, b.dir, b.kind, b.replica);
  }
};

void check_config(const SimConfig& c) {
  if (c.num_minibatches < 1) throw InputError("simulation needs at least one minibatch");
  if (!(c.bwd_fwd_ratio > 0) || !std::isfinite(c.bwd_fwd_ratio)) {
    throw InputError("backward/forward ratio must be positive");
  }
  if (!(c.noise >= 0) || c.noise >= 1) throw InputError("noise must lie in [0, 1)");
  if (c.bandwidth < 0 || !std::isfinite(c.bandwidth)) throw InputError("bandwidth must be >= 0");
  c.cluster.validate();
  validate_plan(c.plan, c.cluster, c.profiles.num_layers());
  for (const auto& s : c.plan.stages) {
    for (const auto& id : s.processors) {
      const auto& type = c.cluster.processor(id).type;
      if (!c.profiles.has(type)) {
        throw StructuralError("plan processor '" + id + "' has type '" + type +
                              "' missing from the profiles");
      }
    }
  }
}

class Simulator {
 public:
  explicit Simulator(const SimConfig& c) : cfg_(c), rng_(c.seed) {
    check_config(c);
    cluster_ = c.cluster;
    if (c.bandwidth > 0) cluster_.bandwidth_bytes_per_sec = c.bandwidth;
    bw_ = cluster_.bandwidth_bytes_per_sec;
    build_stages();
  }

  SimReport run();

 private:
  void build_stages();
  void assign_limits();
  double transfer_seconds(const std::string& a, const std::string& b, std::uint64_t bytes) const {
    return static_cast<double>(bytes) / cluster_.bandwidth_between(a, b);
  }
  void send(double now, int from_stage, int from_rep, int to_stage, int mb, Direction dir,
            std::uint64_t bytes);
  void handle(const Event& e);
  void dispatch(double now);
  double jitter(double d);

  const SimConfig& cfg_;
  ClusterSpec cluster_;
  double bw_ = 0.0;
  std::mt19937_64 rng_;
  std::vector<StageRt> stages_;
  std::multiset<Event> events_;
  std::map<std::pair<std::string, std::string>, double> link_free_;
  std::vector<std::vector<int>> stash_;  // [mb][stage]
  std::vector<double> completion_;
  std::vector<double> stage0_fwd_end_;
  SimReport report_;
};

void Simulator::build_stages() {
  const auto& layers_any = cfg_.profiles.all().begin()->second;
  std::vector<Stage> plan_stages = cfg_.plan.stages;
  if (cfg_.mode == SimMode::data_parallel) {
    Stage all;
    all.layer_start = 0;
    all.layer_end = static_cast<int>(cfg_.profiles.num_layers()) - 1;
    for (const auto& s : plan_stages) {
      all.processors.insert(all.processors.end(), s.processors.begin(), s.processors.end());
    }
    plan_stages = {all};
  }
  for (const auto& s : plan_stages) {
    StageRt rt;
    rt.first = s.layer_start;
    rt.last = s.layer_end;
    rt.out_bytes = layers_any[static_cast<std::size_t>(s.layer_end)].activation_bytes;
    std::uint64_t params = 0;
    for (int l = s.layer_start; l <= s.layer_end; ++l) {
      params += layers_any[static_cast<std::size_t>(l)].param_bytes;
    }
    const double m = static_cast<double>(s.processors.size());
    const double sync = 2.0 * (m - 1.0) * static_cast<double>(params) / bw_;
    for (const auto& id : s.processors) {
      const auto& layers = cfg_.profiles.layers(cluster_.processor(id).type);
      Replica r;
      r.proc = id;
      double bwd = 0.0;
      for (int l = s.layer_start; l <= s.layer_end; ++l) {
        r.fwd += layers[static_cast<std::size_t>(l)].fwd_time_us * 1e-6;
        bwd += layers[static_cast<std::size_t>(l)].bwd_time_us * 1e-6;
      }
      r.bwd = (cfg_.use_profiled_bwd ? bwd : cfg_.bwd_fwd_ratio * r.fwd) + sync;
      rt.replicas.push_back(std::move(r));
    }
    stages_.push_back(std::move(rt));
  }
  assign_limits();
}

// Stage s admits S - s forwards per replica before its first backward. With
// asynchronous sends the round trip through later stages also includes the
// transfers, so the depth is raised until a replica can stay busy over one
// round trip at the pipeline's bottleneck rate.
void Simulator::assign_limits() {
  const int S = static_cast<int>(stages_.size());
  if (cfg_.mode != SimMode::pipedream_1f1b) {
    for (auto& st : stages_) {
      for (auto& r : st.replicas) r.limit = 1;
    }
    return;
  }
  std::vector<double> work(static_cast<std::size_t>(S), 0.0);
  std::vector<double> hop(static_cast<std::size_t>(S), 0.0);  // transfer after stage s
  double period = 0.0;
  for (int s = 0; s < S; ++s) {
    const auto& st = stages_[static_cast<std::size_t>(s)];
    for (const auto& r : st.replicas) work[static_cast<std::size_t>(s)] = std::max(work[static_cast<std::size_t>(s)], r.fwd + r.bwd);
    period = std::max(period, work[static_cast<std::size_t>(s)] / static_cast<double>(st.replicas.size()));
    if (s + 1 < S) {
      const auto& next = stages_[static_cast<std::size_t>(s) + 1];
      for (const auto& a : st.replicas) {
        for (const auto& b : next.replicas) {
          hop[static_cast<std::size_t>(s)] = std::max(hop[static_cast<std::size_t>(s)], transfer_seconds(a.proc, b.proc, st.out_bytes));
        }
      }
      period = std::max(period, hop[static_cast<std::size_t>(s)]);
    }
  }
  for (int s = 0; s < S; ++s) {
    int limit = S - s;
    if (cfg_.overlap_comm && period > 0) {
      double round_trip = 0.0;
      for (int t = s; t < S; ++t) {
        round_trip += work[static_cast<std::size_t>(t)];
        if (t + 1 < S) round_trip += 2.0 * hop[static_cast<std::size_t>(t)];
      }
      const double m = static_cast<double>(stages_[static_cast<std::size_t>(s)].replicas.size());
      const int needed = static_cast<int>(std::ceil(round_trip / (m * period) - 1e-9));
      // One extra minibatch absorbs queueing at the bottleneck; without it
      // the depth is exactly enough only if nothing ever waits.
      if (needed > limit) limit = needed + 1;
    }
    for (auto& r : stages_[static_cast<std::size_t>(s)].replicas) r.limit = limit;
  }
}

double Simulator::jitter(double d) {
  if (cfg_.noise == 0.0) return d;
  const double u = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
  return d * (1.0 + cfg_.noise * (2.0 * u - 1.0));
}

void Simulator::send(double now, int from_stage, int from_rep, int to_stage, int mb, Direction dir,
                     std::uint64_t bytes) {
  auto& src = stages_[static_cast<std::size_t>(from_stage)].replicas[static_cast<std::size_t>(from_rep)];
  const auto& dst_stage = stages_[static_cast<std::size_t>(to_stage)];
  const int to_rep = route_replica(mb, static_cast<int>(dst_stage.replicas.size()));
  const auto& dst = dst_stage.replicas[static_cast<std::size_t>(to_rep)];
  double& link = link_free_[{src.proc, dst.proc}];
  const double start = std::max(now, link);
  const double end = start + transfer_seconds(src.proc, dst.proc, bytes);
  link = end;
  if (!cfg_.overlap_comm) src.blocked_until = std::max(src.blocked_until, end);
  events_.insert({end, to_stage, mb, dir, kArrival, to_rep});
}

void Simulator::handle(const Event& e) {
  const int S = static_cast<int>(stages_.size());
  auto& rep = stages_[static_cast<std::size_t>(e.stage)].replicas[static_cast<std::size_t>(e.replica)];
  if (e.kind == kArrival) {
    if (e.dir == Direction::fwd) {
      rep.ready_fwd.insert(e.mb);
    } else {
      rep.ready_bwd.insert(e.mb);
    }
    return;
  }
  rep.busy = false;
  if (e.dir == Direction::fwd) {
    if (e.stage == 0) stage0_fwd_end_[static_cast<std::size_t>(e.mb)] = e.time;
    if (e.stage == S - 1) {
      rep.ready_bwd.insert(e.mb);
    } else {
      send(e.time, e.stage, e.replica, e.stage + 1, e.mb, Direction::fwd,
           stages_[static_cast<std::size_t>(e.stage)].out_bytes);
    }
  } else {
    --rep.inflight;
    ++rep.version;
    if (e.stage == 0) {
      completion_[static_cast<std::size_t>(e.mb)] = e.time;
    } else {
      send(e.time, e.stage, e.replica, e.stage - 1, e.mb, Direction::bwd,
           stages_[static_cast<std::size_t>(e.stage) - 1].out_bytes);
    }
  }
}

void Simulator::dispatch(double now) {
  for (std::size_t s = 0; s < stages_.size(); ++s) {
    auto& reps = stages_[s].replicas;
    for (std::size_t r = 0; r < reps.size(); ++r) {
      Replica& rep = reps[r];
      if (rep.busy || rep.blocked_until > now) continue;
      const bool can_fwd = !rep.ready_fwd.empty() && rep.inflight < rep.limit;
      const bool can_bwd = !rep.ready_bwd.empty();
      Direction dir;
      if (can_fwd && (rep.last == Direction::bwd || !can_bwd)) {
        dir = Direction::fwd;
      } else if (can_bwd) {
        dir = Direction::bwd;
      } else {
        continue;
      }
      WorkItem item;
      item.stage = static_cast<int>(s);
      item.replica = static_cast<int>(r);
      item.processor = rep.proc;
      item.direction = dir;
      item.start = now;
      if (dir == Direction::fwd) {
        item.minibatch = *rep.ready_fwd.begin();
        rep.ready_fwd.erase(rep.ready_fwd.begin());
        ++rep.inflight;
        item.weight_version = rep.version;
        stash_[static_cast<std::size_t>(item.minibatch)][s] = rep.version;
        item.end = now + jitter(rep.fwd);
      } else {
        item.minibatch = *rep.ready_bwd.begin();
        rep.ready_bwd.erase(rep.ready_bwd.begin());
        const int stashed = stash_[static_cast<std::size_t>(item.minibatch)][s];
        item.weight_version = cfg_.weight_stashing ? stashed : rep.version;
        report_.weight_versions.push_back(
            {item.minibatch, item.stage, item.replica, stashed, item.weight_version});
        item.end = now + jitter(rep.bwd);
      }
      rep.busy = true;
      rep.last = dir;
      events_.insert({item.end, item.stage, item.minibatch, dir, kComputeDone, item.replica});
      report_.timeline.push_back(std::move(item));
    }
  }
}

SimReport Simulator::run() {
  const int B = cfg_.num_minibatches;
  const auto S = stages_.size();
  stash_.assign(static_cast<std::size_t>(B), std::vector<int>(S, 0));
  completion_.assign(static_cast<std::size_t>(B), -1.0);
  stage0_fwd_end_.assign(static_cast<std::size_t>(B), 0.0);
  auto& first = stages_.front();
  for (int mb = 0; mb < B; ++mb) {
    first.replicas[static_cast<std::size_t>(route_replica(mb, static_cast<int>(first.replicas.size())))]
        .ready_fwd.insert(mb);
  }

  dispatch(0.0);
  while (!events_.empty()) {
    const double t = events_.begin()->time;
    while (!events_.empty() && events_.begin()->time == t) {
      const Event e = *events_.begin();
      events_.erase(events_.begin());
      handle(e);
    }
    dispatch(t);
  }

  for (int mb = 0; mb < B; ++mb) {
    if (completion_[static_cast<std::size_t>(mb)] < 0) {
      throw InvariantError("minibatch " + std::to_string(mb) + " never completed");
    }
  }
  const std::size_t expected_items = 2 * static_cast<std::size_t>(B) * S;
  if (report_.timeline.size() != expected_items) {
    throw InvariantError("simulation produced " + std::to_string(report_.timeline.size()) +
                         " work items, expected " + std::to_string(expected_items));
  }

  SimReport& rep = report_;
  rep.mode = cfg_.mode;
  rep.num_minibatches = B;
  rep.num_stages = static_cast<int>(S);
  rep.completion_times = completion_;
  for (const auto& w : rep.timeline) rep.total_time = std::max(rep.total_time, w.end);

  std::vector<std::string> procs;
  for (const auto& st : stages_) {
    for (const auto& r : st.replicas) procs.push_back(r.proc);
  }
  for (const auto& p : procs) rep.busy_time[p] = 0.0;
  for (const auto& w : rep.timeline) rep.busy_time[w.processor] += w.end - w.start;
  double busy_total = 0.0;
  for (const auto& [p, busy] : rep.busy_time) {
    rep.busy_fraction[p] = rep.total_time > 0 ? busy / rep.total_time : 0.0;
    busy_total += busy;
  }
  rep.bubble_fraction =
      rep.total_time > 0 ? 1.0 - busy_total / (static_cast<double>(procs.size()) * rep.total_time) : 0.0;

  // Steady window: skip the first quarter of minibatches. The series is the
  // in-order completion time (minibatches 0..k all done), so a fast replica
  // running ahead of a slow one does not inflate the rate. Deterministic runs
  // settle into a repeating pattern whose length can exceed the round-robin
  // cycle, so look for the shortest repeat in the middle half and measure over whole
  // repeats. Without one, fall back to half the run in whole cycles.
  std::vector<double> in_order = completion_;
  for (std::size_t i = 1; i < in_order.size(); ++i) in_order[i] = std::max(in_order[i], in_order[i - 1]);
  std::vector<double> sorted = completion_;
  std::sort(sorted.begin(), sorted.end());
  int cycle = 1;
  for (const auto& st : stages_) cycle = std::lcm(cycle, static_cast<int>(st.replicas.size()));
  int lo = B / 4;
  const int hi = B - 1 - B / 4;  // drain perturbs the last minibatches
  int n = 0;
  const auto at = [&](int k) { return in_order[static_cast<std::size_t>(k)]; };
  for (int p = cycle; lo + 2 * p <= hi && n == 0; p += cycle) {
    const double d0 = at(lo + p) - at(lo);
    bool repeats = d0 > 0;
    for (int k = lo + 1; repeats && k + p <= hi; ++k) {
      repeats = std::abs(at(k + p) - at(k) - d0) <= 1e-9 * d0;
    }
    if (repeats) n = (hi - lo) / p * p;
  }
  if (n == 0) n = (B / 2) / cycle * cycle;
  if (n == 0) {
    lo = 0;
    n = B - 1;
  }
  double win_lo = 0.0;
  double win_hi = rep.total_time;
  if (n > 0) {
    win_lo = at(lo);
    win_hi = at(lo + n);
    rep.steady_state_period = (win_hi - win_lo) / n;
  } else {
    rep.steady_state_period = rep.total_time;
  }
  for (const auto& p : procs) rep.steady_utilization[p] = 0.0;
  const double win = win_hi - win_lo;
  for (const auto& w : rep.timeline) {
    const double overlap = std::min(w.end, win_hi) - std::max(w.start, win_lo);
    if (overlap > 0) rep.steady_utilization[w.processor] += overlap;
  }
  for (auto& [p, u] : rep.steady_utilization) u = win > 0 ? u / win : rep.busy_fraction[p];

  rep.warmup_time = sorted.front();
  const double last_fwd = *std::max_element(stage0_fwd_end_.begin(), stage0_fwd_end_.end());
  const double steady_end = std::max(rep.warmup_time, last_fwd);
  rep.steady_time = steady_end - rep.warmup_time;
  rep.drain_time = rep.total_time - steady_end;
  return rep;
}

}  // namespace

SimReport simulate(const SimConfig& config) { return Simulator(config).run(); }

WeightAudit audit_weight_versions(const SimReport& report) {
  WeightAudit a;
  for (const auto& v : report.weight_versions) {
    ++a.staleness[v.bwd_version - v.fwd_version];
    if (v.fwd_version != v.bwd_version) {
      a.pass = false;
      a.violations.push_back(v);
    }
  }
  return a;
}

ProfileSet homogenized_profiles(const ProfileSet& profiles, const ClusterSpec& cluster) {
  std::string slowest;
  double slowest_total = -1.0;
  for (const auto& p : cluster.processors) {
    double t = 0.0;
    for (const auto& l : profiles.layers(p.type)) t += l.total_time_us();
    if (t > slowest_total || (t == slowest_total && p.type < slowest)) {
      slowest_total = t;
      slowest = p.type;
    }
  }
  ProfileSet out(profiles.model_name(), profiles.batch_size());
  const auto& ref = profiles.layers(slowest);
  for (const auto& p : cluster.processors) {
    if (!out.has(p.type)) out.add(p.type, ref);
  }
  return out;
}

std::vector<StrategyRow> compare_strategies(const ProfileSet& profiles, const ClusterSpec& cluster,
                                            double bandwidth, const CompareOptions& options) {
  cluster.validate();
  const double bw = bandwidth > 0 ? bandwidth : cluster.bandwidth_bytes_per_sec;

  PartitionPlan dp;
  {
    Stage all;
    all.layer_start = 0;
    all.layer_end = static_cast<int>(profiles.num_layers()) - 1;
    std::vector<std::string> types;
    for (const auto& p : cluster.processors) {
      all.processors.push_back(p.id);
      types.push_back(p.type);
    }
    all.predicted_stage_time = stage_time_q(all.layer_start, all.layer_end, types, profiles, bw);
    dp.stages.push_back(std::move(all));
    dp.split_config = split_config_of(dp.stages);
    dp.objective = dp.stages.front().predicted_stage_time;
  }
  const PartitionPlan mp = plan(homogenized_profiles(profiles, cluster), cluster, bw);
  const PartitionPlan hete = plan(profiles, cluster, bw);

  std::vector<StrategyRow> rows;
  const std::vector<std::tuple<std::string, const PartitionPlan*, SimMode>> runs = {
      {"DP", &dp, SimMode::data_parallel},
      {"MP", &mp, SimMode::pipedream_1f1b},
      {"HETE-MP", &hete, SimMode::pipedream_1f1b}};
  for (const auto& [name, p, mode] : runs) {
    SimConfig c;
    c.plan = *p;
    c.profiles = profiles;
    c.cluster = cluster;
    c.bandwidth = bw;
    c.num_minibatches = options.num_minibatches;
    c.mode = mode;
    c.overlap_comm = options.overlap_comm;
    c.seed = options.seed;
    const SimReport r = simulate(c);
    StrategyRow row;
    row.name = name;
    row.plan = *p;
    row.total_time = r.total_time;
    row.steady_state_period = r.steady_state_period;
    row.throughput = r.total_time > 0 ? options.num_minibatches / r.total_time : 0.0;
    rows.push_back(std::move(row));
  }
  for (auto& row : rows) row.speedup = rows.front().total_time / row.total_time;
  return rows;
}

}  // namespace voxpipe
