// SPDX-License-Identifier: Apache-2.0
#include "voxpipe/partitioner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <tuple>

#include "partitioner_internal.hpp"
#include "voxpipe/errors.hpp"

namespace voxpipe {

namespace detail {

CostModel::CostModel(const ProfileSet& profiles, double bandwidth) : bandwidth_(bandwidth) {
  if (!(bandwidth > 0) || !std::isfinite(bandwidth)) {
    throw InputError("bandwidth must be positive and finite");
  }
  layers_ = profiles.num_layers();
  if (layers_ == 0) throw InputError("profile set has no layers");
  for (const auto& [type, layers] : profiles.all()) {
    auto& pre = time_prefix_[type];
    pre.assign(layers_ + 1, 0.0);
    for (std::size_t l = 0; l < layers_; ++l) {
      pre[l + 1] = pre[l] + layers[l].total_time_us() * 1e-6;
    }
  }
  const auto& any = profiles.all().begin()->second;
  param_prefix_.assign(layers_ + 1, 0);
  activation_.resize(layers_);
  for (std::size_t l = 0; l < layers_; ++l) {
    param_prefix_[l + 1] = param_prefix_[l] + any[l].param_bytes;
    activation_[l] = any[l].activation_bytes;
  }
}

const std::vector<double>& CostModel::prefix(const std::string& type) const {
  auto it = time_prefix_.find(type);
  if (it == time_prefix_.end()) {
    throw ConfigurationError("no profile for processor type '" + type + "'");
  }
  return it->second;
}

double CostModel::compute(int i, int j, const std::string& type) const {
  const auto& pre = prefix(type);
  return pre[static_cast<std::size_t>(j) + 1] - pre[static_cast<std::size_t>(i)];
}

double CostModel::q(int i, int j, std::span<const std::string> group) const {
  double slowest = 0.0;
  for (const auto& type : group) slowest = std::max(slowest, compute(i, j, type));
  const double m = static_cast<double>(group.size());
  const double params = static_cast<double>(param_prefix_[static_cast<std::size_t>(j) + 1] -
                                            param_prefix_[static_cast<std::size_t>(i)]);
  return (slowest + 2.0 * (m - 1.0) * params / bandwidth_) / m;
}

double CostModel::transfer(int k) const {
  return static_cast<double>(activation_[static_cast<std::size_t>(k)]) / bandwidth_;
}

}  // namespace detail

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_range(int i, int j, std::size_t group_size, const ProfileSet& profiles) {
  const auto n = static_cast<int>(profiles.num_layers());
  if (i < 0 || j < i || j >= n) {
    throw InputError("layer range " + std::to_string(i) + ".." + std::to_string(j) +
                     " is not within 0.." + std::to_string(n - 1));
  }
  if (group_size == 0) throw InputError("processor group must not be empty");
}

std::vector<std::string> types_of(std::span<const Processor> procs) {
  std::vector<std::string> out;
  out.reserve(procs.size());
  for (const auto& p : procs) out.push_back(p.type);
  return out;
}

struct Order {
  std::vector<Processor> procs;
  std::vector<std::string> types;
};

// How a cell of the table was reached.
struct Step {
  enum Kind { kNone, kIdle, kSingle, kSplit } kind = kNone;
  int k = 0;  // last layer of the prefix (split)
  int s = 0;  // first processor of the last segment
};

struct Rank {
  int stages = std::numeric_limits<int>::max();
  std::uint64_t traffic = std::numeric_limits<std::uint64_t>::max();

  bool feasible() const { return stages != std::numeric_limits<int>::max(); }
  friend bool operator<(const Rank& a, const Rank& b) {
    return a.stages != b.stages ? a.stages < b.stages : a.traffic < b.traffic;
  }
};

// Minimum over the table of the slowest stage or transfer. C[j][m] covers
// layers 0..j with the first m processors of the order, some possibly idle.
double min_objective(const detail::CostModel& cost, const Order& order) {
  const int L = static_cast<int>(cost.num_layers());
  const int M = static_cast<int>(order.types.size());
  std::vector<std::vector<double>> C(static_cast<std::size_t>(L),
                                     std::vector<double>(static_cast<std::size_t>(M) + 1, kInf));
  std::span<const std::string> types(order.types);
  for (int j = 0; j < L; ++j) {
    auto& row = C[static_cast<std::size_t>(j)];
    for (int m = 1; m <= M; ++m) {
      double best = row[static_cast<std::size_t>(m) - 1];
      for (int s = 0; s < m; ++s) {
        best = std::min(best, cost.q(0, j, types.subspan(static_cast<std::size_t>(s),
                                                         static_cast<std::size_t>(m - s))));
      }
      for (int k = 0; k < j; ++k) {
        const double boundary = cost.transfer(k);
        for (int s = 1; s < m; ++s) {
          const double head = C[static_cast<std::size_t>(k)][static_cast<std::size_t>(s)];
          if (head == kInf) continue;
          const double tail = cost.q(k + 1, j, types.subspan(static_cast<std::size_t>(s),
                                                             static_cast<std::size_t>(m - s)));
          best = std::min(best, std::max({head, boundary, tail}));
        }
      }
      row[static_cast<std::size_t>(m)] = best;
    }
  }
  return C[static_cast<std::size_t>(L) - 1][static_cast<std::size_t>(M)];
}

struct Choice {
  Rank rank;
  std::vector<Stage> stages;
};

// Among partitions whose every stage and transfer fits within `bound`,
// the one with fewest stages, then least boundary traffic.
Choice best_within(const detail::CostModel& cost, const Order& order, double bound) {
  const int L = static_cast<int>(cost.num_layers());
  const int M = static_cast<int>(order.types.size());
  const auto cols = static_cast<std::size_t>(M) + 1;
  std::vector<std::vector<Rank>> R(static_cast<std::size_t>(L), std::vector<Rank>(cols));
  std::vector<std::vector<Step>> B(static_cast<std::size_t>(L), std::vector<Step>(cols));
  std::span<const std::string> types(order.types);
  for (int j = 0; j < L; ++j) {
    for (int m = 1; m <= M; ++m) {
      Rank best = R[static_cast<std::size_t>(j)][static_cast<std::size_t>(m) - 1];
      Step step{best.feasible() ? Step::kIdle : Step::kNone, 0, 0};
      for (int s = 0; s < m; ++s) {
        const auto seg = types.subspan(static_cast<std::size_t>(s), static_cast<std::size_t>(m - s));
        if (cost.q(0, j, seg) > bound) continue;
        const Rank r{1, 0};
        if (r < best) {
          best = r;
          step = {Step::kSingle, 0, s};
        }
      }
      for (int k = 0; k < j; ++k) {
        if (cost.transfer(k) > bound) continue;
        for (int s = 1; s < m; ++s) {
          const Rank& head = R[static_cast<std::size_t>(k)][static_cast<std::size_t>(s)];
          if (!head.feasible()) continue;
          const auto seg = types.subspan(static_cast<std::size_t>(s), static_cast<std::size_t>(m - s));
          if (cost.q(k + 1, j, seg) > bound) continue;
          const Rank r{head.stages + 1, head.traffic + cost.activation(k)};
          if (r < best) {
            best = r;
            step = {Step::kSplit, k, s};
          }
        }
      }
      R[static_cast<std::size_t>(j)][static_cast<std::size_t>(m)] = best;
      B[static_cast<std::size_t>(j)][static_cast<std::size_t>(m)] = step;
    }
  }

  Choice choice;
  choice.rank = R[static_cast<std::size_t>(L) - 1][static_cast<std::size_t>(M)];
  if (!choice.rank.feasible()) return choice;
  int j = L - 1;
  int m = M;
  while (true) {
    const Step st = B[static_cast<std::size_t>(j)][static_cast<std::size_t>(m)];
    if (st.kind == Step::kIdle) {
      --m;
      continue;
    }
    if (st.kind == Step::kNone) throw InvariantError("partition backtrack reached an empty cell");
    Stage stage;
    stage.layer_start = st.kind == Step::kSingle ? 0 : st.k + 1;
    stage.layer_end = j;
    for (int p = st.s; p < m; ++p) stage.processors.push_back(order.procs[static_cast<std::size_t>(p)].id);
    stage.predicted_stage_time =
        cost.q(stage.layer_start, j, types.subspan(static_cast<std::size_t>(st.s),
                                                   static_cast<std::size_t>(m - st.s)));
    choice.stages.push_back(std::move(stage));
    if (st.kind == Step::kSingle) break;
    j = st.k;
    m = st.s;
  }
  std::reverse(choice.stages.begin(), choice.stages.end());
  return choice;
}

void check_cluster_types(const ClusterSpec& cluster, const ProfileSet& profiles) {
  cluster.validate();
  for (const auto& p : cluster.processors) {
    if (!profiles.has(p.type)) {
      throw ConfigurationError("processor '" + p.id + "' has type '" + p.type +
                               "' with no profile");
    }
  }
}

}  // namespace

double stage_time_q(int i, int j, std::span<const std::string> group, const ProfileSet& profiles,
                    double bandwidth) {
  check_range(i, j, group.size(), profiles);
  return detail::CostModel(profiles, bandwidth).q(i, j, group);
}

double get_comp_time(int i, int j, std::span<const std::string> group, const ProfileSet& profiles,
                     double bandwidth) {
  check_range(i, j, group.size(), profiles);
  if (!(bandwidth > 0) || !std::isfinite(bandwidth)) {
    throw InputError("bandwidth must be positive and finite");
  }
  double slowest_time = -1.0;
  for (const auto& type : group) {
    const auto& layers = profiles.layers(type);
    double t = 0.0;
    for (int l = i; l <= j; ++l) t += layers[static_cast<std::size_t>(l)].total_time_us() * 1e-6;
    if (t > slowest_time) slowest_time = t;
  }
  const auto& any = profiles.layers(group.front());
  double params = 0.0;
  for (int l = i; l <= j; ++l) params += static_cast<double>(any[static_cast<std::size_t>(l)].param_bytes);
  const double m = static_cast<double>(group.size());
  return (slowest_time + 2.0 * (m - 1.0) * params / bandwidth) / m;
}

std::vector<Processor> sort_processors(const ClusterSpec& cluster, const ProfileSet& profiles) {
  std::map<std::string, double> total;
  for (const auto& p : cluster.processors) {
    if (total.count(p.type)) continue;
    double t = 0.0;
    for (const auto& l : profiles.layers(p.type)) t += l.total_time_us();
    total[p.type] = t;
  }
  std::vector<Processor> out = cluster.processors;
  std::stable_sort(out.begin(), out.end(), [&](const Processor& a, const Processor& b) {
    const double ta = total[a.type];
    const double tb = total[b.type];
    if (ta != tb) return ta > tb;
    return a.id < b.id;
  });
  return out;
}

double transfer_time(int k, const ProfileSet& profiles, double bandwidth) {
  if (k < 0 || static_cast<std::size_t>(k) >= profiles.num_layers()) {
    throw InputError("layer index out of range");
  }
  return detail::CostModel(profiles, bandwidth).transfer(k);
}

std::vector<std::vector<Processor>> detail::candidate_orders(const ClusterSpec& cluster,
                                                             const ProfileSet& profiles) {
  auto slow_first = sort_processors(cluster, profiles);
  auto fast_first = slow_first;
  std::reverse(fast_first.begin(), fast_first.end());
  return {std::move(slow_first), std::move(fast_first)};
}

double detail::tie_bound(double objective) {
  return objective + 1e-12 * std::max(1.0, std::abs(objective));
}

PartitionPlan plan(const ProfileSet& profiles, const ClusterSpec& cluster, double bandwidth) {
  check_cluster_types(cluster, profiles);
  const detail::CostModel cost(profiles, bandwidth);

  std::vector<Order> orders;
  for (auto& procs : detail::candidate_orders(cluster, profiles)) {
    Order o;
    o.types = types_of(procs);
    o.procs = std::move(procs);
    orders.push_back(std::move(o));
  }

  double best = kInf;
  for (const auto& o : orders) best = std::min(best, min_objective(cost, o));
  if (!std::isfinite(best)) throw InvariantError("partition search produced no finite plan");

  const double bound = detail::tie_bound(best);
  Choice chosen;
  for (const auto& o : orders) {
    Choice c = best_within(cost, o, bound);
    if (c.rank.feasible() && (!chosen.rank.feasible() || c.rank < chosen.rank)) chosen = std::move(c);
  }
  if (!chosen.rank.feasible()) throw InvariantError("no partition attains the optimal objective");

  PartitionPlan p;
  p.stages = std::move(chosen.stages);
  // Replicas are listed fastest first. Round-robin routing hands the
  // remainder of a batch count to the leading replicas, so this keeps the
  // slowest processors off the extra minibatches.
  std::map<std::string, double> whole_model;
  for (const auto& proc : cluster.processors) {
    double t = 0.0;
    for (const auto& l : profiles.layers(proc.type)) t += l.total_time_us();
    whole_model[proc.id] = t;
  }
  for (auto& st : p.stages) {
    std::sort(st.processors.begin(), st.processors.end(), [&](const std::string& a, const std::string& b) {
      return std::tie(whole_model[a], a) < std::tie(whole_model[b], b);
    });
  }
  p.split_config = split_config_of(p.stages);
  p.objective = evaluate_plan(p, profiles, cluster, bandwidth);
  return p;
}

double evaluate_plan(const PartitionPlan& plan, const ProfileSet& profiles,
                     const ClusterSpec& cluster, double bandwidth) {
  validate_plan(plan, cluster, profiles.num_layers());
  const detail::CostModel cost(profiles, bandwidth);
  double worst = 0.0;
  for (std::size_t s = 0; s < plan.stages.size(); ++s) {
    const Stage& st = plan.stages[s];
    std::vector<std::string> types;
    for (const auto& id : st.processors) types.push_back(cluster.processor(id).type);
    worst = std::max(worst, cost.q(st.layer_start, st.layer_end, types));
    if (s + 1 < plan.stages.size()) worst = std::max(worst, cost.transfer(st.layer_end));
  }
  return worst;
}

void validate_plan(const PartitionPlan& plan, const ClusterSpec& cluster, std::size_t num_layers) {
  if (plan.stages.empty()) throw StructuralError("plan has no stages");
  std::set<std::string> used;
  int next = 0;
  for (std::size_t s = 0; s < plan.stages.size(); ++s) {
    const Stage& st = plan.stages[s];
    if (st.layer_start != next || st.layer_end < st.layer_start) {
      throw StructuralError("stage " + std::to_string(s) + " does not continue at layer " +
                            std::to_string(next));
    }
    if (st.processors.empty()) throw StructuralError("stage " + std::to_string(s) + " has no processors");
    for (const auto& id : st.processors) {
      cluster.processor(id);
      if (!used.insert(id).second) {
        throw StructuralError("processor '" + id + "' is assigned to more than one stage");
      }
    }
    next = st.layer_end + 1;
  }
  if (static_cast<std::size_t>(next) != num_layers) {
    throw StructuralError("plan covers " + std::to_string(next) + " layers but the profile has " +
                          std::to_string(num_layers));
  }
}

std::string split_config_of(const std::vector<Stage>& stages) {
  std::string out;
  for (std::size_t s = 0; s < stages.size(); ++s) {
    if (s) out += '-';
    out += std::to_string(stages[s].processors.size());
  }
  return out;
}

std::vector<int> parse_split_config(const std::string& s) {
  std::vector<int> out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t dash = s.find('-', pos);
    const std::string part = s.substr(pos, dash == std::string::npos ? std::string::npos : dash - pos);
    if (part.empty() || part.find_first_not_of("0123456789") != std::string::npos ||
        part.size() > 9) {
      throw InputError("malformed split config '" + s + "'");
    }
    const int v = std::stoi(part);
    if (v < 1) throw InputError("split config entries must be >= 1");
    out.push_back(v);
    if (dash == std::string::npos) break;
    pos = dash + 1;
  }
  return out;
}

}  // namespace voxpipe
