// Copyright 2026 The poseopt Authors
// SPDX-License-Identifier: Apache-2.0
//
// poseopt: analyze / optimize / prune-plan / decode / synth / sensitivity /
// e2e over pose-network graph descriptions. JSON reports on stdout (or
// --out), human summary on stderr.
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "poseopt/common.hpp"
#include "poseopt/cost.hpp"
#include "poseopt/executor.hpp"
#include "poseopt/graph.hpp"
#include "poseopt/kernels.hpp"
#include "poseopt/paf.hpp"
#include "poseopt/prune.hpp"
#include "poseopt/rewrite.hpp"
#include "poseopt/synth.hpp"
#include "poseopt/tensor.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace poseopt;

namespace {

constexpr const char* kVersion = "0.1.0";

uint64_t fnv1a_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  uint64_t h = 0xcbf29ce484222325ULL;
  char buf[4096];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
    if (!in) break;
  }
  return h;
}

std::string hex64(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

class Report {
public:
  Report(const std::string& command, int argc, char** argv) {
    j_["tool_version"] = kVersion;
    std::ostringstream os;
    for (int i = 0; i < argc; ++i) os << (i ? " " : "") << argv[i];
    j_["command"] = os.str();
    j_["subcommand"] = command;
    j_["config"] = ordered_json::object();
    const char* threads = std::getenv("POSEOPT_THREADS");
    j_["config"]["threads"] = threads ? std::atoi(threads) : 0;
    j_["config"]["simd"] = kernels::to_string(kernels::active_level());
    j_["results"] = ordered_json::object();
    j_["requires_retraining"] = false;
    j_["files_written"] = ordered_json::array();
    j_["timings"] = ordered_json::object();
    start_ = std::chrono::steady_clock::now();
  }

  ordered_json& config() { return j_["config"]; }
  ordered_json& results() { return j_["results"]; }
  void set_requires_retraining(bool v) { j_["requires_retraining"] = v; }

  void wrote_file(const std::string& path) {
    j_["files_written"].push_back({{"path", path}, {"checksum", hex64(fnv1a_file(path))}});
  }

  void stage_time(const std::string& name) {
    auto now = std::chrono::steady_clock::now();
    j_["timings"][name] = std::chrono::duration<double>(now - start_).count();
    start_ = now;
  }

  void emit(const std::string& out_path) {
    std::string text = j_.dump(2) + "\n";
    if (out_path.empty()) {
      std::cout << text;
    } else {
      std::ofstream f(out_path);
      if (!f) throw data_error("FileError", "cannot write report to " + out_path);
      f << text;
    }
  }

private:
  ordered_json j_;
  std::chrono::steady_clock::time_point start_;
};

TensorShape parse_shape_flag(const std::string& s) {
  TensorShape shape;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, 'x')) shape.dims.push_back(std::stoll(tok));
  if (shape.dims.size() != 3)
    throw Error(ErrorKind::Usage, "UsageError", "--input expects CxHxW");
  return shape;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw data_error("FileError", "cannot write " + path);
  f << text;
}

Graph load_and_check(const std::string& path) {
  Graph g = load_graph(path);
  auto violations = validate(g);
  if (!violations.empty()) {
    std::ostringstream os;
    os << "graph '" << path << "' is invalid:";
    for (const auto& v : violations) os << " [" << v.kind << " at " << v.node_id << "] " << v.message;
    throw data_error("InvalidGraph", os.str());
  }
  return g;
}

ordered_json cost_json(const CostReport& c) {
  ordered_json j;
  j["totals"] = {{"params", c.totals.params}, {"macs", c.totals.macs}, {"flops", c.totals.flops}};
  j["per_node"] = ordered_json::object();
  for (const auto& [id, nc] : c.per_node)
    j["per_node"][id] = {{"params", nc.params}, {"macs", nc.macs}, {"flops", nc.flops}};
  return j;
}

ordered_json latency_json(const LatencyBreakdown& l) {
  ordered_json j;
  j["total_seconds"] = l.total;
  j["per_node"] = ordered_json::object();
  for (const auto& [id, t] : l.per_node) j["per_node"][id] = t;
  return j;
}

// Graph override: retarget input shape for analysis.
Graph with_input_shape(Graph g, const TensorShape& shape) {
  if (g.inputs.size() != 1)
    throw data_error("InvalidGraph", "--input override needs a single-input graph");
  g.inputs[0].shape = shape;
  return g;
}

// ---------------------------------------------------------------------------

int cmd_analyze(const std::string& graph_path, const std::string& input_flag,
                const std::string& calib, const std::string& out, Report& report) {
  Graph g = load_and_check(graph_path);
  if (!input_flag.empty()) g = with_input_shape(std::move(g), parse_shape_flag(input_flag));
  report.config()["graph"] = graph_path;
  CostReport costs = graph_cost(g);
  report.results()["cost"] = cost_json(costs);
  report.results()["conv_layers"] = conv_layer_count(g);
  if (!calib.empty()) {
    LatencyParams lp = load_latency_params(calib);
    report.config()["calib"] = calib;
    report.results()["latency"] = latency_json(graph_latency(g, nullptr, lp));
  }
  report.stage_time("analyze");
  std::cerr << "analyze: " << g.name << "  params=" << costs.totals.params
            << "  macs=" << costs.totals.macs << "  flops=" << costs.totals.flops << "\n";
  report.emit(out);
  return 0;
}

struct OptimizeFlags {
  bool large_kernels = false;
  bool dedil = false;
  std::string replace_act;  // "from:to"
  double depth_multiplier = 0.0;
  std::string stage_spec_path;
};

ordered_json rewrite_log_json(const RewriteLog& log) {
  return ordered_json::parse(serialize_rewrite_log(log));
}

int cmd_optimize(const std::string& graph_path, const OptimizeFlags& flags,
                 const std::string& graph_out, const std::string& out, Report& report) {
  Graph g = load_and_check(graph_path);
  report.config()["graph"] = graph_path;
  RewriteLog all;
  if (flags.large_kernels) {
    auto [g2, log] = replace_large_kernels(g);
    g = std::move(g2);
    all.append(log);
  }
  if (flags.dedil) {
    auto [g2, log] = dedilate(g);
    g = std::move(g2);
    all.append(log);
  }
  if (!flags.replace_act.empty()) {
    auto colon = flags.replace_act.find(':');
    if (colon == std::string::npos)
      throw Error(ErrorKind::Usage, "UsageError", "--replace-act expects from:to");
    auto [g2, log] = replace_activations(g, act_fn_from_string(flags.replace_act.substr(0, colon)),
                                         act_fn_from_string(flags.replace_act.substr(colon + 1)));
    g = std::move(g2);
    all.append(log);
  }
  if (flags.depth_multiplier > 0.0) {
    if (flags.stage_spec_path.empty())
      throw Error(ErrorKind::Usage, "UsageError", "--depth-rescale needs --stage-spec");
    StageSpec spec = load_stage_spec(flags.stage_spec_path);
    StageSpec rescaled = depth_rescale(spec, flags.depth_multiplier);
    report.results()["depth_rescale"] = {
        {"original", ordered_json::parse(serialize_stage_spec(spec))},
        {"rescaled", ordered_json::parse(serialize_stage_spec(rescaled))},
        {"conv_layers_before", conv_layer_count(build_backbone(spec, spec.stages[0].width))},
        {"conv_layers_after",
         conv_layer_count(build_backbone(rescaled, rescaled.stages[0].width))}};
  }
  report.results()["rewrite_log"] = rewrite_log_json(all);
  report.set_requires_retraining(all.replaced_count() > 0);
  if (!graph_out.empty()) {
    write_text(graph_out, serialize_graph(g));
    report.wrote_file(graph_out);
  }
  report.stage_time("optimize");
  std::cerr << "optimize: " << all.replaced_count() << " nodes rewritten\n";
  report.emit(out);
  return 0;
}

int cmd_prune_plan(const std::string& graph_path, const std::string& calib,
                   const std::string& policy_path, double target_speedup, double max_distortion,
                   const std::string& weights_dir, const std::string& out, Report& report) {
  Graph g = load_and_check(graph_path);
  LatencyParams lp = load_latency_params(calib);
  SensitivityPolicy policy;
  if (!policy_path.empty()) policy = load_policy(policy_path);
  report.config()["graph"] = graph_path;
  report.config()["calib"] = calib;
  std::optional<WeightStore> w;
  if (!weights_dir.empty()) w = load_weight_store(weights_dir);
  PlanTarget target;
  if (target_speedup > 0.0) target.speedup = target_speedup;
  if (max_distortion > 0.0) target.max_distortion = max_distortion;
  PrunePlan p = plan(g, w ? &*w : nullptr, lp, policy, target);
  report.results()["plan"] = ordered_json::parse(serialize_plan(p));
  report.stage_time("prune_plan");
  std::cerr << "prune-plan: " << p.decisions.size() << " layers, predicted speedup "
            << p.predicted_speedup << "\n";
  report.emit(out);
  return 0;
}

int cmd_decode(const std::string& heat_path, const std::string& paf_path,
               const std::string& skeleton_path, const std::string& config_path,
               const std::string& out, Report& report) {
  Tensor heat = load_tensor(heat_path);
  Tensor paf = load_tensor(paf_path);
  SkeletonSpec skel = load_skeleton(skeleton_path);
  DecodeConfig cfg;
  if (!config_path.empty()) cfg = load_decode_config(config_path);
  auto poses = decode(heat, paf, skel, cfg);
  report.results()["decode"] = ordered_json::parse(serialize_poses(poses));
  report.stage_time("decode");
  std::cerr << "decode: " << poses.size() << " pose(s)\n";
  report.emit(out);
  return 0;
}

int cmd_synth(int persons, uint64_t seed, const std::string& size, double noise,
              const std::string& skeleton_path, const std::string& out_dir,
              const std::string& out, Report& report) {
  SkeletonSpec skel = load_skeleton(skeleton_path);
  RenderConfig cfg;
  if (!size.empty()) {
    TensorShape s;
    std::stringstream ss(size);
    std::string tok;
    while (std::getline(ss, tok, 'x')) s.dims.push_back(std::stoll(tok));
    if (s.dims.size() != 2) throw Error(ErrorKind::Usage, "UsageError", "--size expects HxW");
    cfg.height = static_cast<int>(s.dims[0]);
    cfg.width = static_cast<int>(s.dims[1]);
  }
  cfg.noise_amplitude = noise;
  cfg.noise_seed = seed;
  auto poses = gen_poses(persons, skel, cfg, seed);
  auto [heat, paf] = render(poses, skel, cfg);
  fs::create_directories(out_dir);
  std::string scene = (fs::path(out_dir) / "scene.json").string();
  std::string heat_path = (fs::path(out_dir) / "heat.tnsr").string();
  std::string paf_path = (fs::path(out_dir) / "paf.tnsr").string();
  write_text(scene, serialize_scene(poses, cfg));
  save_tensor(heat_path, heat);
  save_tensor(paf_path, paf);
  report.wrote_file(scene);
  report.wrote_file(heat_path);
  report.wrote_file(paf_path);
  report.results()["synth"] = {{"persons", persons}, {"seed", seed}};
  report.stage_time("synth");
  std::cerr << "synth: wrote " << persons << " person scene to " << out_dir << "\n";
  report.emit(out);
  return 0;
}

int cmd_sensitivity(const std::string& graph_path, const std::string& weights_dir,
                    uint64_t rand_seed, bool use_random, const std::string& tag,
                    std::vector<double> ratios, int probes, uint64_t seed,
                    const std::string& out, Report& report) {
  Graph g = load_and_check(graph_path);
  WeightStore w = use_random ? random_weights(g, rand_seed) : load_weight_store(weights_dir);
  if (ratios.empty()) ratios = {0.1, 0.3, 0.5, 0.7, 0.9};
  auto curve = sensitivity_scan(g, w, block_tag_from_string(tag), ratios, probes, seed);
  ordered_json jc = ordered_json::array();
  for (const auto& pt : curve)
    jc.push_back({{"ratio", pt.ratio}, {"mean_distortion", pt.mean_distortion}});
  report.results()["sensitivity"] = {{"tag", tag}, {"curve", jc}};
  report.stage_time("sensitivity");
  std::cerr << "sensitivity: " << curve.size() << " points for tag " << tag << "\n";
  report.emit(out);
  return 0;
}

int cmd_e2e(const std::string& graph_path, const std::string& calib, double target_speedup,
            int persons, uint64_t seed, const std::string& skeleton_path,
            const std::string& policy_path, const std::string& out, Report& report) {
  // analyze
  Graph g = load_and_check(graph_path);
  LatencyParams lp = load_latency_params(calib);
  report.config()["graph"] = graph_path;
  report.config()["calib"] = calib;
  CostReport dense_costs = graph_cost(g);
  LatencyBreakdown dense_lat = graph_latency(g, nullptr, lp);
  report.results()["cost"] = cost_json(dense_costs);
  report.results()["dense_latency"] = latency_json(dense_lat);
  report.stage_time("analyze");

  // optimize: the full mobile-friendliness pass stack
  RewriteLog all;
  {
    auto [g2, log] = replace_large_kernels(g);
    g = std::move(g2);
    all.append(log);
  }
  {
    auto [g2, log] = dedilate(g);
    g = std::move(g2);
    all.append(log);
  }
  {
    auto [g2, log] = replace_activations(g, ActFn::Swish, ActFn::Hardtanh);
    g = std::move(g2);
    all.append(log);
  }
  report.results()["rewrite_log"] = rewrite_log_json(all);
  report.set_requires_retraining(all.replaced_count() > 0);
  LatencyBreakdown rewritten_lat = graph_latency(g, nullptr, lp);
  report.results()["rewritten_latency"] = latency_json(rewritten_lat);
  report.stage_time("optimize");

  // prune plan on the rewritten graph
  SensitivityPolicy policy;
  if (!policy_path.empty()) policy = load_policy(policy_path);
  PlanTarget target;
  target.speedup = target_speedup;
  PrunePlan p = plan(g, nullptr, lp, policy, target);
  report.results()["plan"] = ordered_json::parse(serialize_plan(p));
  report.results()["pipeline_speedup_vs_dense"] = dense_lat.total / p.predicted_planned_latency;
  report.stage_time("prune_plan");

  // synth + decode round trip
  SkeletonSpec skel = load_skeleton(skeleton_path);
  RenderConfig rc;
  auto poses = gen_poses(persons, skel, rc, seed);
  auto [heat, paf] = render(poses, skel, rc);
  DecodeConfig dc;
  auto decoded = decode(heat, paf, skel, dc);
  report.results()["synth"] = {{"persons", persons}, {"seed", seed}};
  report.results()["decode"] = ordered_json::parse(serialize_poses(decoded));
  report.results()["decode_person_count_match"] =
      static_cast<int>(decoded.size()) == persons;
  report.stage_time("decode");

  std::cerr << "e2e: speedup " << p.predicted_speedup << ", decoded " << decoded.size()
            << "/" << persons << " persons\n";
  report.emit(out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mobile pose-estimation graph optimization toolkit"};
  app.require_subcommand(1);
  std::string out;
  app.add_option("--out", out, "write the JSON report here instead of stdout");

  // analyze
  auto* analyze = app.add_subcommand("analyze", "params/FLOPs/latency accounting");
  std::string a_graph, a_input, a_calib;
  analyze->add_option("graph", a_graph)->required();
  analyze->add_option("--input", a_input, "override input shape CxHxW");
  analyze->add_option("--calib", a_calib, "latency calibration JSON");

  // optimize
  auto* optimize = app.add_subcommand("optimize", "mobile-aware rewrite passes");
  std::string o_graph, o_out;
  OptimizeFlags of;
  optimize->add_option("graph", o_graph)->required();
  optimize->add_flag("--replace-large-kernels", of.large_kernels);
  optimize->add_flag("--dedilate", of.dedil);
  optimize->add_option("--replace-act", of.replace_act, "from:to activation swap");
  optimize->add_option("--depth-rescale", of.depth_multiplier, "depth multiplier");
  optimize->add_option("--stage-spec", of.stage_spec_path, "stage spec JSON for depth rescale");
  optimize->add_option("-o,--graph-out", o_out, "write rewritten graph JSON");

  // prune-plan
  auto* pp = app.add_subcommand("prune-plan", "latency-model-assisted pruning plan");
  std::string p_graph, p_calib, p_policy, p_weights;
  double p_speedup = 0.0, p_distortion = 0.0;
  pp->add_option("graph", p_graph)->required();
  pp->add_option("--calib", p_calib)->required();
  pp->add_option("--policy", p_policy);
  pp->add_option("--target-speedup", p_speedup);
  pp->add_option("--max-distortion", p_distortion);
  pp->add_option("--weights", p_weights, "weight store directory");

  // decode
  auto* dec = app.add_subcommand("decode", "heatmaps + PAFs to pose instances");
  std::string d_heat, d_paf, d_skel, d_cfg;
  dec->add_option("--heat", d_heat)->required();
  dec->add_option("--paf", d_paf)->required();
  dec->add_option("--skeleton", d_skel)->required();
  dec->add_option("--config", d_cfg);

  // synth
  auto* synth = app.add_subcommand("synth", "render a ground-truth scene");
  int s_persons = 1;
  uint64_t s_seed = 0;
  std::string s_size, s_skel, s_dir;
  double s_noise = 0.0;
  synth->add_option("--persons", s_persons)->required();
  synth->add_option("--seed", s_seed)->required();
  synth->add_option("--size", s_size, "HxW (default 368x368)");
  synth->add_option("--noise", s_noise);
  synth->add_option("--skeleton", s_skel)->required();
  synth->add_option("-o,--dir", s_dir)->required();

  // sensitivity
  auto* sens = app.add_subcommand("sensitivity", "pruning distortion scan per block tag");
  std::string sc_graph, sc_weights, sc_tag = "Backbone";
  std::vector<double> sc_ratios;
  int sc_probes = 3;
  uint64_t sc_seed = 0, sc_rand = 0;
  bool sc_use_random = false;
  sens->add_option("graph", sc_graph)->required();
  sens->add_option("--weights", sc_weights);
  sens->add_flag("--random-weights", sc_use_random, "use seeded random weights");
  sens->add_option("--random-seed", sc_rand);
  sens->add_option("--tag", sc_tag);
  sens->add_option("--ratios", sc_ratios);
  sens->add_option("--probes", sc_probes);
  sens->add_option("--seed", sc_seed);

  // e2e
  auto* e2e = app.add_subcommand("e2e", "full pipeline: analyze, optimize, plan, synth, decode");
  std::string e_graph, e_calib, e_skel, e_policy;
  double e_speedup = 1.3;
  int e_persons = 2;
  uint64_t e_seed = 0;
  e2e->add_option("--graph", e_graph)->required();
  e2e->add_option("--calib", e_calib)->required();
  e2e->add_option("--target-speedup", e_speedup);
  e2e->add_option("--persons", e_persons);
  e2e->add_option("--seed", e_seed);
  e2e->add_option("--skeleton", e_skel)->required();
  e2e->add_option("--policy", e_policy);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    nlohmann::json err{{"error", {{"code", "UsageError"}, {"message", e.what()}}}};
    std::cerr << err.dump() << "\n";
    return 1;
  }

  try {
    auto* sub = app.get_subcommands().front();
    Report report(sub->get_name(), argc, argv);
    if (sub == analyze) return cmd_analyze(a_graph, a_input, a_calib, out, report);
    if (sub == optimize) return cmd_optimize(o_graph, of, o_out, out, report);
    if (sub == pp)
      return cmd_prune_plan(p_graph, p_calib, p_policy, p_speedup, p_distortion, p_weights, out,
                            report);
    if (sub == dec) return cmd_decode(d_heat, d_paf, d_skel, d_cfg, out, report);
    if (sub == synth)
      return cmd_synth(s_persons, s_seed, s_size, s_noise, s_skel, s_dir, out, report);
    if (sub == sens)
      return cmd_sensitivity(sc_graph, sc_weights, sc_rand, sc_use_random, sc_tag, sc_ratios,
                             sc_probes, sc_seed, out, report);
    if (sub == e2e)
      return cmd_e2e(e_graph, e_calib, e_speedup, e_persons, e_seed, e_skel, e_policy, out,
                     report);
    return 1;
  } catch (const Error& e) {
    nlohmann::json err{{"error", {{"code", e.code()}, {"message", e.what()}}}};
    std::cerr << err.dump() << "\n";
    switch (e.kind()) {
      case ErrorKind::Usage: return 1;
      case ErrorKind::Data: return 2;
      case ErrorKind::TargetUnreachable: return 3;
    }
    return 2;
  } catch (const std::exception& e) {
    nlohmann::json err{{"error", {{"code", "InternalError"}, {"message", e.what()}}}};
    std::cerr << err.dump() << "\n";
    return 2;
  }
}
