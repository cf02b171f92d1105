// SPDX-License-Identifier: Apache-2.0
#include "voxpipe/cli.hpp"

#include <spdlog/cfg/env.h>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <sstream>

#include "voxpipe/benchmark.hpp"
#include "voxpipe/errors.hpp"
#include "voxpipe/manifest.hpp"
#include "voxpipe/partitioner.hpp"
#include "voxpipe/pipeline_sim.hpp"
#include "voxpipe/profile.hpp"
#include "voxpipe/sparse_conv.hpp"
#include "voxpipe/units.hpp"

#ifndef VOXPIPE_VERSION
#define VOXPIPE_VERSION "0.0.0"
#endif

namespace voxpipe::cli {

namespace {

std::shared_ptr<spdlog::logger> logger() {
  auto log = spdlog::get("voxpipe");
  if (!log) {
    log = spdlog::stderr_logger_st("voxpipe");
    log->set_level(spdlog::level::warn);
    log->set_pattern("[%l] %v");
    spdlog::cfg::load_env_levels();
  }
  return log;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write '" + path + "'");
  out << contents;
  out.close();
  if (!out) throw InputError("failed writing '" + path + "'");
  logger()->info("wrote {}", path);
}

nlohmann::json parse_json(const std::string& text, const std::string& path) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError("'" + path + "' is not valid JSON: " + e.what());
  }
}

nlohmann::json load_input(RunManifest& m, const std::string& path) {
  const std::string text = read_file(path);
  m.add_input(path, text);
  return parse_json(text, path);
}

std::string now_iso8601() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string fixed(double v, int digits) {
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(digits) << v;
  return ss.str();
}

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? sep : "") + parts[i];
  return out;
}

/// Maps flat or nested JSON onto CLI11 config items: top-level keys are
/// options of the main command, nested objects are subcommands.
class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App*, bool, bool, std::string) const override { return "{}\n"; }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    std::ostringstream ss;
    ss << input.rdbuf();
    const auto j = parse_json(ss.str(), "--config");
    if (!j.is_object()) throw InputError("--config file must hold a JSON object");
    std::vector<CLI::ConfigItem> items;
    flatten(j, {}, items);
    return items;
  }

 private:
  static std::string scalar(const nlohmann::json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    return v.dump();
  }

  static void flatten(const nlohmann::json& j, const std::vector<std::string>& parents,
                      std::vector<CLI::ConfigItem>& items) {
    for (const auto& [key, value] : j.items()) {
      if (value.is_object()) {
        auto p = parents;
        p.push_back(key);
        flatten(value, p, items);
        continue;
      }
      CLI::ConfigItem item;
      item.parents = parents;
      item.name = key;
      if (value.is_array()) {
        for (const auto& v : value) item.inputs.push_back(scalar(v));
      } else {
        item.inputs.push_back(scalar(value));
      }
      items.push_back(std::move(item));
    }
  }
};

struct CommonIo {
  std::string out;
  std::string manifest_out;
};

void add_manifest_out(CLI::App* sub, CommonIo& io) {
  sub->add_option("--manifest-out", io.manifest_out,
                  "Also write the run manifest, with a timestamp, to this path");
}

void finish_manifest(const RunManifest& m, const CommonIo& io) {
  if (io.manifest_out.empty()) return;
  RunManifest stamped = m;
  stamped.timestamp = now_iso8601();
  write_file(io.manifest_out, stamped.sidecar().dump(2) + "\n");
}

/// Writes JSON and reads it back through `check`, so a zero exit status
/// means the file on disk is valid.
template <typename Check>
void write_json(const std::string& path, const nlohmann::json& j, Check check) {
  write_file(path, j.dump(2) + "\n");
  check(parse_json(read_file(path), path));
}

RunManifest base_manifest(const std::string& command, std::uint64_t seed) {
  RunManifest m;
  m.command = command;
  m.seed = seed;
  m.tool_version = VOXPIPE_VERSION;
  return m;
}

ProfileSet load_profiles(RunManifest& m, const std::vector<std::string>& paths) {
  std::vector<nlohmann::json> docs;
  for (const auto& p : paths) docs.push_back(load_input(m, p));
  return profile_set_from_json(std::span<const nlohmann::json>(docs));
}

std::string group_summary(const std::vector<std::string>& ids, const ClusterSpec& cluster) {
  std::vector<std::pair<std::string, int>> counts;
  for (const auto& id : ids) {
    const auto& type = cluster.processor(id).type;
    auto it = std::find_if(counts.begin(), counts.end(), [&](const auto& c) { return c.first == type; });
    if (it == counts.end()) {
      counts.emplace_back(type, 1);
    } else {
      ++it->second;
    }
  }
  std::vector<std::string> parts;
  for (const auto& [type, n] : counts) parts.push_back(std::to_string(n) + " " + type);
  return "(" + join(parts, " + ") + ")";
}

void print_plan(std::ostream& out, const PartitionPlan& p, const ClusterSpec& cluster) {
  out << "split config: " << p.split_config << "\n";
  out << "objective: " << fixed(p.objective, 6) << " s per minibatch\n";
  std::vector<std::string> assignment;
  for (const auto& s : p.stages) assignment.push_back(group_summary(s.processors, cluster));
  out << "stage assignment: " << join(assignment, " ") << "\n";
  out << std::left << std::setw(7) << "stage" << std::setw(12) << "layers" << std::setw(16)
      << "predicted (s)" << "processors\n";
  for (std::size_t i = 0; i < p.stages.size(); ++i) {
    const auto& s = p.stages[i];
    out << std::left << std::setw(7) << i << std::setw(12)
        << (std::to_string(s.layer_start) + "-" + std::to_string(s.layer_end)) << std::setw(16)
        << fixed(s.predicted_stage_time, 6) << join(s.processors, " ") << "\n";
  }
}

double resolve_bandwidth(const std::string& flag, const ClusterSpec& cluster) {
  return flag.empty() ? cluster.bandwidth_bytes_per_sec : parse_bandwidth(flag);
}

// ---- profile ---------------------------------------------------------------

struct ProfileOpts {
  std::string model;
  std::string label;
  int warmup = 50;
  int iters = 100;
  std::string clock = "steady";
  CommonIo io;
};

int cmd_profile(const ProfileOpts& o, std::ostream& out) {
  RunManifest m = base_manifest("profile", 0);
  m.parameters = {{"label", o.label},
                  {"warmup", std::to_string(o.warmup)},
                  {"iters", std::to_string(o.iters)},
                  {"clock", o.clock}};
  const ModelSpec spec = model_spec_from_json(load_input(m, o.model));
  m.seed = spec.seed;
  std::unique_ptr<ProfileClock> clock;
  if (o.clock == "steady") {
    clock = std::make_unique<SteadyProfileClock>();
  } else {
    clock = std::make_unique<ManualProfileClock>();
  }
  BenchmarkOptions bo{o.warmup, o.iters};
  auto layers = run_benchmark_profile(spec, o.label, bo, *clock);
  ProfileSet set(spec.model_name, spec.batch_size);
  set.add(o.label, std::move(layers));
  nlohmann::json j = profile_to_json(set, o.label);
  j["manifest"] = m.embedded();
  write_json(o.io.out, j, [](const nlohmann::json& back) { profile_set_from_json(back); });
  finish_manifest(m, o.io);
  out << "profiled " << set.num_layers() << " layers of " << spec.model_name << " as '"
      << o.label << "' -> " << o.io.out << "\n";
  return kExitOk;
}

// ---- plan ------------------------------------------------------------------

struct PlanOpts {
  std::vector<std::string> profiles;
  std::string cluster;
  std::string bw;
  bool oracle = false;
  CommonIo io;
};

int cmd_plan(const PlanOpts& o, std::ostream& out) {
  RunManifest m = base_manifest("plan", 0);
  m.parameters = {{"bw", o.bw}, {"oracle", o.oracle ? "true" : "false"}};
  const ProfileSet profiles = load_profiles(m, o.profiles);
  const ClusterSpec cluster = cluster_from_json(load_input(m, o.cluster));
  const double bw = resolve_bandwidth(o.bw, cluster);
  const PartitionPlan p = plan(profiles, cluster, bw);
  print_plan(out, p, cluster);
  if (o.oracle) {
    const PartitionPlan bf = brute_force_plan(profiles, cluster, bw, true);
    const bool agree = std::abs(bf.objective - p.objective) <= 1e-9 * std::max(1.0, bf.objective);
    out << "oracle: planner " << fixed(p.objective, 9) << " s, exhaustive "
        << fixed(bf.objective, 9) << " s -> " << (agree ? "agree" : "DISAGREE") << "\n";
    if (!agree) throw InvariantError("planner and exhaustive search disagree");
  }
  if (!o.io.out.empty()) {
    nlohmann::json j = to_json(p);
    j["manifest"] = m.embedded();
    write_json(o.io.out, j, [&](const nlohmann::json& back) {
      validate_plan(plan_from_json(back), cluster, profiles.num_layers());
    });
  }
  finish_manifest(m, o.io);
  return kExitOk;
}

// ---- simulate --------------------------------------------------------------

struct SimOpts {
  std::string plan;
  std::vector<std::string> profiles;
  std::string cluster;
  std::string mode = "pipedream_1f1b";
  int minibatches = 100;
  std::string timeline;
  std::string bw;
  bool no_stash = false;
  bool audit = false;
  bool no_overlap = false;
  std::uint64_t seed = 0;
  double noise = 0.0;
  double bwd_ratio = 0.0;
  CommonIo io;
};

int cmd_simulate(const SimOpts& o, std::ostream& out) {
  RunManifest m = base_manifest("simulate", o.seed);
  m.parameters = {{"mode", o.mode},
                  {"minibatches", std::to_string(o.minibatches)},
                  {"bw", o.bw},
                  {"stash", o.no_stash ? "false" : "true"},
                  {"overlap", o.no_overlap ? "false" : "true"},
                  {"audit", o.audit ? "true" : "false"},
                  {"noise", fixed(o.noise, 9)},
                  {"bwd_ratio", fixed(o.bwd_ratio, 9)}};
  SimConfig c;
  c.plan = plan_from_json(load_input(m, o.plan));
  c.profiles = load_profiles(m, o.profiles);
  c.cluster = cluster_from_json(load_input(m, o.cluster));
  c.bandwidth = resolve_bandwidth(o.bw, c.cluster);
  c.num_minibatches = o.minibatches;
  c.mode = sim_mode_from_string(o.mode);
  c.weight_stashing = !o.no_stash;
  c.overlap_comm = !o.no_overlap;
  c.seed = o.seed;
  c.noise = o.noise;
  if (o.bwd_ratio > 0) {
    c.use_profiled_bwd = false;
    c.bwd_fwd_ratio = o.bwd_ratio;
  }
  const SimReport r = simulate(c);

  out << "mode: " << to_string(r.mode) << ", stages: " << r.num_stages
      << ", minibatches: " << r.num_minibatches << "\n";
  out << "total time: " << fixed(r.total_time, 6) << " s (warm-up " << fixed(r.warmup_time, 6)
      << ", steady " << fixed(r.steady_time, 6) << ", drain " << fixed(r.drain_time, 6) << ")\n";
  out << "steady-state period: " << fixed(r.steady_state_period, 6)
      << " s, plan objective: " << fixed(c.plan.objective, 6) << " s\n";
  out << "bubble fraction: " << fixed(r.bubble_fraction, 4) << "\n";

  nlohmann::json j = to_json(r);
  if (o.audit) {
    const WeightAudit a = audit_weight_versions(r);
    out << "weight audit: " << (a.pass ? "PASS" : "FAIL") << " (" << a.violations.size()
        << " violations)\n";
    for (const auto& v : a.violations) {
      out << "  minibatch " << v.minibatch << " stage " << v.stage << " replica " << v.replica
          << ": fwd v" << v.fwd_version << ", bwd v" << v.bwd_version << "\n";
    }
    j["audit"] = to_json(a);
  }
  j["manifest"] = m.embedded();
  if (!o.io.out.empty()) {
    write_json(o.io.out, j, [](const nlohmann::json& back) {
      if (!back.contains("total_time") || !back.contains("timeline")) {
        throw InvariantError("report round trip lost fields");
      }
    });
  }
  if (!o.timeline.empty()) {
    write_file(o.timeline, "# manifest " + m.hash() + "\n" + timeline_csv(r));
  }
  finish_manifest(m, o.io);
  return kExitOk;
}

// ---- compare ---------------------------------------------------------------

struct CompareOpts {
  std::vector<std::string> profiles;
  std::string cluster;
  std::string bw;
  int minibatches = 100;
  std::string csv;
  bool no_overlap = false;
  std::uint64_t seed = 0;
  CommonIo io;
};

int cmd_compare(const CompareOpts& o, std::ostream& out) {
  RunManifest m = base_manifest("compare", o.seed);
  m.parameters = {{"bw", o.bw},
                  {"minibatches", std::to_string(o.minibatches)},
                  {"overlap", o.no_overlap ? "false" : "true"}};
  const ProfileSet profiles = load_profiles(m, o.profiles);
  const ClusterSpec cluster = cluster_from_json(load_input(m, o.cluster));
  CompareOptions co;
  co.num_minibatches = o.minibatches;
  co.overlap_comm = !o.no_overlap;
  co.seed = o.seed;
  const auto rows = compare_strategies(profiles, cluster, resolve_bandwidth(o.bw, cluster), co);
  out << std::left << std::setw(10) << "strategy" << std::setw(14) << "split" << std::setw(16)
      << "epoch time (s)" << std::setw(14) << "period (s)" << "speedup\n";
  for (const auto& r : rows) {
    out << std::left << std::setw(10) << r.name << std::setw(14) << r.plan.split_config
        << std::setw(16) << fixed(r.total_time, 4) << std::setw(14)
        << fixed(r.steady_state_period, 6) << fixed(r.speedup, 2) << "\n";
  }
  if (!o.csv.empty()) write_file(o.csv, "# manifest " + m.hash() + "\n" + strategies_csv(rows));
  if (!o.io.out.empty()) {
    nlohmann::json j = {{"format_version", 1}, {"rows", to_json(rows)}, {"manifest", m.embedded()}};
    write_json(o.io.out, j, [](const nlohmann::json& back) {
      if (back.at("rows").size() != 3) throw InvariantError("comparison round trip lost rows");
    });
  }
  finish_manifest(m, o.io);
  return kExitOk;
}

// ---- alcr ------------------------------------------------------------------

struct AlcrOpts {
  std::string profile;
  std::string type;
  CommonIo io;
};

int cmd_alcr(const AlcrOpts& o, std::ostream& out) {
  RunManifest m = base_manifest("alcr", 0);
  m.parameters = {{"type", o.type}};
  const ProfileSet profiles = profile_set_from_json(load_input(m, o.profile));
  const std::string type = o.type.empty() ? profiles.types().front() : o.type;
  const auto& layers = profiles.layers(type);
  const AlcrCurves c = compute_alcr(layers);
  auto cell = [](bool defined, const std::vector<double>& v, std::size_t i) {
    if (!defined) return std::string();
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v[i]);
    return std::string(buf);
  };
  std::string csv = "# manifest " + m.hash() + "\nlayer_id,compute,activation,params\n";
  for (std::size_t i = 0; i < layers.size(); ++i) {
    csv += std::to_string(layers[i].layer_id) + "," + cell(c.compute_defined, c.compute, i) + "," +
           cell(c.activation_defined, c.activation, i) + "," + cell(c.params_defined, c.params, i) +
           "\n";
  }
  for (const auto& [name, defined] : {std::pair<const char*, bool>{"compute", c.compute_defined},
                                      {"activation", c.activation_defined},
                                      {"params", c.params_defined}}) {
    if (!defined) logger()->warn("{} total is zero; curve left empty", name);
  }
  if (o.io.out.empty()) {
    out << csv;
  } else {
    write_file(o.io.out, csv);
    out << "wrote " << layers.size() << " rows for '" << type << "' -> " << o.io.out << "\n";
  }
  finish_manifest(m, o.io);
  return kExitOk;
}

// ---- synth -----------------------------------------------------------------

struct SynthOpts {
  std::string tmpl = "vgg16bn_like";
  int layers = 53;
  std::vector<std::string> types;
  std::string model_name = "synthetic";
  int batch_size = 64;
  double total_time_us = 200000.0;
  double input_sites = 284000.0;
  double layer_time_us = 1000.0;
  std::string activation_bytes = "1MiB";
  std::string param_bytes = "1MiB";
  std::string custom;
  CommonIo io;
};

int cmd_synth(const SynthOpts& o, std::ostream& out) {
  RunManifest m = base_manifest("synth", 0);
  std::map<std::string, double> factors;
  for (const auto& t : o.types) {
    const auto eq = t.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw InputError("--type expects name=factor, got '" + t + "'");
    }
    const std::string name = t.substr(0, eq);
    double f = 0.0;
    try {
      std::size_t used = 0;
      f = std::stod(t.substr(eq + 1), &used);
      if (used != t.size() - eq - 1) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw InputError("bad speed factor in '" + t + "'");
    }
    if (!factors.emplace(name, f).second) throw InputError("type '" + name + "' given twice");
  }
  SynthScale scale;
  scale.model_name = o.model_name;
  scale.batch_size = o.batch_size;
  scale.total_time_us = o.total_time_us;
  scale.input_sites = o.input_sites;
  scale.layer_time_us = o.layer_time_us;
  scale.activation_bytes = static_cast<std::uint64_t>(parse_bytes(o.activation_bytes));
  scale.param_bytes = static_cast<std::uint64_t>(parse_bytes(o.param_bytes));
  const SynthTemplate tmpl = synth_template_from_string(o.tmpl);
  if (tmpl == SynthTemplate::custom) {
    if (o.custom.empty()) throw InputError("custom template needs --custom <profile.json>");
    const ProfileSet base = profile_set_from_json(load_input(m, o.custom));
    scale.custom_layers = base.layers(base.types().front());
  }
  m.parameters = {{"template", o.tmpl},
                  {"layers", std::to_string(o.layers)},
                  {"types", join(o.types, ",")},
                  {"model_name", o.model_name},
                  {"batch_size", std::to_string(o.batch_size)},
                  {"total_time_us", fixed(o.total_time_us, 6)},
                  {"input_sites", fixed(o.input_sites, 6)},
                  {"layer_time_us", fixed(o.layer_time_us, 6)},
                  {"activation_bytes", o.activation_bytes},
                  {"param_bytes", o.param_bytes}};
  const ProfileSet set = synth_profile(tmpl, o.layers, scale, factors);
  nlohmann::json j = profile_bundle_to_json(set);
  j["manifest"] = m.embedded();
  write_json(o.io.out, j, [](const nlohmann::json& back) { profile_set_from_json(back); });
  finish_manifest(m, o.io);
  out << "wrote " << set.types().size() << " processor profiles of " << set.num_layers()
      << " layers -> " << o.io.out << "\n";
  return kExitOk;
}

// ---- bench-conv ------------------------------------------------------------

struct BenchOpts {
  std::vector<int> grid = {8, 8, 8};
  int in_channels = 4;
  int out_channels = 8;
  int kernel = 3;
  std::vector<int> stride;
  int warmup = 5;
  int iters = 20;
  std::uint64_t seed = 0;
  CommonIo io;
};

int cmd_bench_conv(const BenchOpts& o, std::ostream& out) {
  RunManifest m = base_manifest("bench-conv", o.seed);
  ModelSpec spec;
  spec.model_name = "bench";
  spec.seed = o.seed;
  spec.input.kind = "grid";
  spec.input.extents = o.grid;
  spec.input.channels = o.in_channels;
  spec.layers.push_back({"conv", "sparse_conv", o.out_channels, o.kernel, o.stride, std::nullopt});
  const SparseTensor input = make_model_input(spec);
  const KernelShape shape = KernelShape::hypercube(input.dim(), o.kernel);
  const ConvWeights w = ConvWeights::random(shape.volume(), o.in_channels, o.out_channels, o.seed + 1, 0.1);
  const std::vector<int> stride =
      o.stride.empty() ? std::vector<int>(static_cast<std::size_t>(input.dim()), 1) : o.stride;
  SteadyProfileClock clock;
  const ConvBenchmark b = benchmark_conv(input, w, shape, stride, {o.warmup, o.iters}, clock);
  nlohmann::json j = {{"layer_id", b.profile.layer_id},
                      {"fwd_time_us", b.profile.fwd_time_us},
                      {"bwd_time_us", b.profile.bwd_time_us},
                      {"activation_bytes", b.profile.activation_bytes},
                      {"param_bytes", b.profile.param_bytes},
                      {"input_rows", input.size()},
                      {"output_rows", b.output_rows},
                      {"kernel_map_pairs", b.kernel_map_pairs}};
  if (o.io.out.empty()) {
    out << j.dump(2) << "\n";
  } else {
    j["manifest"] = m.embedded();
    write_file(o.io.out, j.dump(2) + "\n");
  }
  return kExitOk;
}

void report_error(std::ostream& err, bool json, const std::string& kind, const std::string& msg,
                  int code) {
  if (json) {
    err << nlohmann::json{{"error", kind}, {"message", msg}, {"exit_code", code}}.dump() << "\n";
  } else {
    err << "error: " << msg << "\n";
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Pipeline partition planning and simulation for sparse convolutional networks",
               "voxpipe"};
  app.set_version_flag("--version", VOXPIPE_VERSION);
  app.config_formatter(std::make_shared<JsonConfig>());
  app.set_config("--config", "", "JSON file with option values; command-line flags win");
  bool json_errors = false;
  app.add_flag("--json-errors", json_errors, "Print errors to stderr as JSON");
  app.require_subcommand(1);

  ProfileOpts po;
  auto* profile = app.add_subcommand("profile", "Benchmark a model definition into a per-layer profile");
  profile->add_option("--model", po.model, "Model definition JSON")->required();
  profile->add_option("--label", po.label, "Processor type label to record")->required();
  profile->add_option("--out", po.io.out, "Output profile JSON")->required();
  profile->add_option("--warmup", po.warmup, "Discarded warm-up iterations")->capture_default_str();
  profile->add_option("--iters", po.iters, "Measured iterations")->capture_default_str();
  profile->add_option("--clock", po.clock, "steady (wall clock) or manual (stub layers exact)")
      ->check(CLI::IsMember({"steady", "manual"}))
      ->capture_default_str();
  add_manifest_out(profile, po.io);

  PlanOpts pl;
  auto* plan_cmd = app.add_subcommand("plan", "Partition a model across a heterogeneous cluster");
  plan_cmd->add_option("--profiles", pl.profiles, "Profile JSON files (one or more)")->required();
  plan_cmd->add_option("--cluster", pl.cluster, "Cluster JSON")->required();
  plan_cmd->add_option("--bw", pl.bw, "Bandwidth override, e.g. 10Gbit or 1.25GB/s");
  plan_cmd->add_option("--out", pl.io.out, "Output plan JSON");
  plan_cmd->add_flag("--oracle", pl.oracle, "Cross-check against exhaustive search");
  add_manifest_out(plan_cmd, pl.io);

  SimOpts so;
  auto* sim = app.add_subcommand("simulate", "Simulate a plan with a discrete-event pipeline model");
  sim->add_option("--plan", so.plan, "Plan JSON")->required();
  sim->add_option("--profiles", so.profiles, "Profile JSON files")->required();
  sim->add_option("--cluster", so.cluster, "Cluster JSON")->required();
  sim->add_option("--mode", so.mode, "naive_mp, pipedream_1f1b or data_parallel")
      ->check(CLI::IsMember({"naive_mp", "pipedream_1f1b", "data_parallel"}))
      ->capture_default_str();
  sim->add_option("--minibatches", so.minibatches, "Number of minibatches")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sim->add_option("--timeline", so.timeline, "Timeline CSV output");
  sim->add_option("--out", so.io.out, "Report JSON output");
  sim->add_option("--bw", so.bw, "Bandwidth override");
  sim->add_flag("--no-stash", so.no_stash, "Disable weight stashing");
  sim->add_flag("--audit", so.audit, "Audit weight versions and print violations");
  sim->add_flag("--no-overlap", so.no_overlap, "Block the sender until each transfer completes");
  sim->add_option("--seed", so.seed, "Seed for the noise option")->capture_default_str();
  sim->add_option("--noise", so.noise, "Relative duration jitter in [0, 1)")->capture_default_str();
  sim->add_option("--bwd-ratio", so.bwd_ratio,
                  "Use ratio * forward time for backward instead of profiled backward time");
  add_manifest_out(sim, so.io);

  CompareOpts co;
  auto* cmp = app.add_subcommand("compare", "Compare DP, MP and HETE-MP by simulation");
  cmp->add_option("--profiles", co.profiles, "Profile JSON files")->required();
  cmp->add_option("--cluster", co.cluster, "Cluster JSON")->required();
  cmp->add_option("--bw", co.bw, "Bandwidth override");
  cmp->add_option("--minibatches", co.minibatches, "Minibatches per epoch")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmp->add_option("--csv", co.csv, "CSV output");
  cmp->add_option("--out", co.io.out, "JSON output");
  cmp->add_flag("--no-overlap", co.no_overlap, "Block the sender until each transfer completes");
  cmp->add_option("--seed", co.seed, "Simulation seed")->capture_default_str();
  add_manifest_out(cmp, co.io);

  AlcrOpts ao;
  auto* alcr = app.add_subcommand("alcr", "Accumulated layer cost ratio curves as CSV");
  alcr->add_option("--profile", ao.profile, "Profile JSON")->required();
  alcr->add_option("--type", ao.type, "Processor type (default: first in file)");
  alcr->add_option("--out", ao.io.out, "CSV output (default: stdout)");
  add_manifest_out(alcr, ao.io);

  SynthOpts sy;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic profile set");
  synth->add_option("--template", sy.tmpl, "vgg16bn_like, uniform or custom")
      ->check(CLI::IsMember({"vgg16bn_like", "uniform", "custom"}))
      ->capture_default_str();
  synth->add_option("--layers", sy.layers, "Layer count")->capture_default_str();
  synth->add_option("--type", sy.types, "Processor type and time multiplier, name=factor")
      ->required();
  synth->add_option("--model-name", sy.model_name)->capture_default_str();
  synth->add_option("--batch-size", sy.batch_size)->capture_default_str();
  synth->add_option("--total-time-us", sy.total_time_us, "vgg16bn_like: whole-model time")
      ->capture_default_str();
  synth->add_option("--input-sites", sy.input_sites, "vgg16bn_like: occupied input sites per sample")
      ->capture_default_str();
  synth->add_option("--layer-time-us", sy.layer_time_us, "uniform: per-layer time")
      ->capture_default_str();
  synth->add_option("--activation-bytes", sy.activation_bytes, "uniform: per-layer activation size")
      ->capture_default_str();
  synth->add_option("--param-bytes", sy.param_bytes, "uniform: per-layer parameter size")
      ->capture_default_str();
  synth->add_option("--custom", sy.custom, "custom: base profile JSON");
  synth->add_option("--out", sy.io.out, "Output profile bundle JSON")->required();
  add_manifest_out(synth, sy.io);

  BenchOpts bo;
  auto* bench = app.add_subcommand("bench-conv", "Time one sparse convolution on a dense grid");
  bench->add_option("--grid", bo.grid, "Grid extents")->delimiter(',')->capture_default_str();
  bench->add_option("--in-channels", bo.in_channels)->capture_default_str();
  bench->add_option("--out-channels", bo.out_channels)->capture_default_str();
  bench->add_option("--kernel", bo.kernel, "Odd kernel size")->capture_default_str();
  bench->add_option("--stride", bo.stride, "Per-axis stride")->delimiter(',');
  bench->add_option("--warmup", bo.warmup)->capture_default_str();
  bench->add_option("--iters", bo.iters)->capture_default_str();
  bench->add_option("--seed", bo.seed)->capture_default_str();
  bench->add_option("--out", bo.io.out, "JSON output (default: stdout)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e, out, err);
    report_error(err, json_errors, "usage_error", e.what(), kExitInput);
    if (!json_errors) err << "run with --help for usage\n";
    return kExitInput;
  } catch (const InvariantError& e) {
    report_error(err, json_errors, e.kind(), e.what(), kExitInternal);
    return kExitInternal;
  } catch (const Error& e) {
    report_error(err, json_errors, e.kind(), e.what(), kExitInput);
    return kExitInput;
  }

  try {
    logger();
    if (profile->parsed()) return cmd_profile(po, out);
    if (plan_cmd->parsed()) return cmd_plan(pl, out);
    if (sim->parsed()) return cmd_simulate(so, out);
    if (cmp->parsed()) return cmd_compare(co, out);
    if (alcr->parsed()) return cmd_alcr(ao, out);
    if (synth->parsed()) return cmd_synth(sy, out);
    if (bench->parsed()) return cmd_bench_conv(bo, out);
    throw InvariantError("no subcommand dispatched");
  } catch (const InvariantError& e) {
    report_error(err, json_errors, e.kind(), e.what(), kExitInternal);
    return kExitInternal;
  } catch (const Error& e) {
    report_error(err, json_errors, e.kind(), e.what(), kExitInput);
    return kExitInput;
  } catch (const std::exception& e) {
    report_error(err, json_errors, "internal_error", e.what(), kExitInternal);
    return kExitInternal;
  }
}

}  // namespace voxpipe::cli
