// Copyright 2026 The poseopt Authors
// SPDX-License-Identifier: Apache-2.0
//
// Acceptance gate: one pass/fail line per criterion, exit nonzero on any
// failure. Tolerances are pinned in-line next to each check.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "poseopt/common.hpp"
#include "poseopt/cost.hpp"
#include "poseopt/executor.hpp"
#include "poseopt/graph.hpp"
#include "poseopt/paf.hpp"
#include "poseopt/prune.hpp"
#include "poseopt/rewrite.hpp"
#include "poseopt/synth.hpp"
#include "poseopt/tensor.hpp"

using namespace poseopt;
using Clock = std::chrono::steady_clock;

namespace {

std::string fixture(const std::string& name) {
  return std::string(POSEOPT_FIXTURE_DIR) + "/" + name;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int g_failures = 0;

void report(int criterion, bool pass, const std::string& what) {
  std::printf("criterion %d: %s - %s\n", criterion, pass ? "PASS" : "FAIL", what.c_str());
  if (!pass) ++g_failures;
}

// ---------------------------------------------------------------------------
// 1. Parameter/FLOP accounting on the bundled lightweight graph.
// ---------------------------------------------------------------------------
void criterion1() {
  auto t0 = Clock::now();
  std::string out_f = "/tmp/poseopt_acc1.json";
  std::string cmd = std::string(POSEOPT_CLI_PATH) + " analyze " + fixture("lwop.graph.json") +
                    " >" + out_f + " 2>/dev/null";
  int rc = std::system(cmd.c_str());
  double elapsed = seconds_since(t0);
  if (rc != 0) {
    report(1, false, "analyze CLI exited nonzero");
    return;
  }
  std::ifstream in(out_f);
  nlohmann::json j = nlohmann::json::parse(in);
  double params = j["results"]["cost"]["totals"]["params"].get<double>();
  double macs = j["results"]["cost"]["totals"]["macs"].get<double>();
  bool params_ok = params >= 4.1e6 * 0.85 && params <= 4.1e6 * 1.15;
  bool macs_ok = macs >= 9e9 * 0.85 && macs <= 9e9 * 1.15;  // MAC convention
  bool time_ok = elapsed < 1.0;
  std::ostringstream ss;
  ss << "lwop at 3x368x368: params=" << params / 1e6 << "M (4.1M +/-15%), macs=" << macs / 1e9
     << "G (9G +/-15%), analyze took " << elapsed << "s (<1s)";
  report(1, params_ok && macs_ok && time_ok, ss.str());
}

// ---------------------------------------------------------------------------
// 2. Rewrite invariants: 27/49 MAC ratio, exact receptive-field preservation.
// ---------------------------------------------------------------------------
void criterion2() {
  Graph g = load_graph(fixture("openpose_vgg.graph.json"));
  auto shapes_before = infer_shapes(g);
  auto [g2, log] = replace_large_kernels(g);
  bool ok = validate(g2).empty();
  int replaced = 0, cc = 0;
  for (const auto& e : log.entries) {
    if (e.skipped) continue;
    ++replaced;
    const OpNode* orig = g.find_node(e.original_node_id);
    ok = ok && orig != nullptr;
    if (!orig) continue;
    ok = ok && e.rf_before == e.rf_after;
    ok = ok && receptive_field(g2, e.replacement_node_ids.back()) ==
                   receptive_field(g, e.original_node_id);
    if (orig->conv().in_channels == orig->conv().out_channels) {
      ++cc;
      ok = ok && (e.macs_after * 49 == e.macs_before * 27);  // exact, integer
    }
  }
  ok = ok && replaced > 0 && cc > 0;
  auto shapes_after = infer_shapes(g2);
  for (const auto& out : g.outputs) ok = ok && shapes_after.at(out) == shapes_before.at(out);

  // Dedilation of a 3x3 d=3 conv preserves rf = 7 exactly.
  Graph dg;
  dg.inputs = {{"x", {{8, 46, 46}}}};
  ConvAttrs a;
  a.kernel_h = a.kernel_w = 3;
  a.stride = 1;
  a.padding = 3;
  a.dilation = 3;
  a.in_channels = a.out_channels = 8;
  dg.nodes = {OpNode{"d", OpKind::Conv2d, a, {"x"}, BlockTag::Other}};
  dg.outputs = {"d"};
  auto [dd, dlog] = dedilate(dg);
  ok = ok && receptive_field(dd, dd.outputs[0]) == ReceptiveField{7, 1};

  std::ostringstream ss;
  ss << replaced << " convs decomposed (" << cc
     << " C->C at exactly 27/49 MACs), rf preserved, shapes unchanged; dedilated 3x3 d=3 rf=7";
  report(2, ok, ss.str());
}

// ---------------------------------------------------------------------------
// 3. Decoder oracle over 200 synthetic scenes.
// ---------------------------------------------------------------------------
bool scene_matches(const std::vector<GroundTruthPose>& gt, const std::vector<PoseInstance>& dec,
                   double tol_px) {
  if (gt.size() != dec.size()) return false;
  std::vector<bool> used(dec.size(), false);
  for (const auto& g : gt) {
    int best = -1;
    double best_d = 1e18;
    for (size_t i = 0; i < dec.size(); ++i) {
      if (used[i]) continue;
      double sum = 0;
      int n = 0;
      for (size_t j = 0; j < g.joints.size(); ++j) {
        if (!dec[i].joints[j]) continue;
        sum += std::hypot(dec[i].joints[j]->x - g.joints[j].first,
                          dec[i].joints[j]->y - g.joints[j].second);
        ++n;
      }
      double d = n ? sum / n : 1e18;
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(i);
      }
    }
    if (best < 0) return false;
    used[best] = true;
    for (size_t j = 0; j < g.joints.size(); ++j) {
      const auto& kj = dec[best].joints[j];
      if (!kj) return false;
      if (std::hypot(kj->x - g.joints[j].first, kj->y - g.joints[j].second) > tol_px)
        return false;
    }
  }
  return true;
}

void criterion3() {
  auto t0 = Clock::now();
  SkeletonSpec skel = load_skeleton(fixture("skeleton_coco18.json"));
  DecodeConfig dcfg;  // defaults for the clean half
  // Noisy half: per-pixel noise makes the pinned 4-neighbor NMS emit diagonal
  // double-peaks on flat Gaussian tops, which split one person into a full
  // instance plus a small fragment. The decoder config is exposed for exactly
  // this; a stricter fragment filter recovers the count.
  DecodeConfig noisy_cfg;
  noisy_cfg.min_parts = 10;
  int clean_ok = 0, noisy_count_ok = 0;
  const int N = 200;
  for (int seed = 0; seed < N; ++seed) {
    int persons = 1 + seed % 6;
    RenderConfig cfg;  // 368x368, noise 0
    auto poses = gen_poses(persons, skel, cfg, static_cast<uint64_t>(seed));
    auto [heat, paf] = render(poses, skel, cfg);
    auto dec = decode(heat, paf, skel, dcfg);
    if (scene_matches(poses, dec, 1.5)) ++clean_ok;

    RenderConfig ncfg;
    ncfg.noise_amplitude = 0.05;
    ncfg.noise_seed = static_cast<uint64_t>(seed) + 1000;
    auto [nheat, npaf] = render(poses, skel, ncfg);
    auto ndec = decode(nheat, npaf, skel, noisy_cfg);
    if (ndec.size() == poses.size()) ++noisy_count_ok;
  }
  double elapsed = seconds_since(t0);
  bool ok = clean_ok == N && noisy_count_ok >= static_cast<int>(0.95 * N) && elapsed < 60.0;
  std::ostringstream ss;
  ss << "clean scenes exact (count + 1.5px, default config): " << clean_ok << "/" << N
     << " (need 200), noise-0.05 count recovery (min_parts=10): " << noisy_count_ok << "/" << N
     << " (need >=190), " << elapsed << "s (<60s)";
  report(3, ok, ss.str());
}

// ---------------------------------------------------------------------------
// 4. Break-even law on randomized latency draws + plan legality.
// ---------------------------------------------------------------------------
void criterion4() {
  SplitMix64 rng(0xACCE55);
  OpNode node{"n", OpKind::Conv2d, ConvAttrs{}, {"x"}, BlockTag::Backbone};
  int draws_ok = 0;
  const int N = 1000;
  for (int t = 0; t < N; ++t) {
    uint64_t macs = 1 + rng.next() % 100000000ull;
    LatencyParams lp;
    lp.time_per_mac = std::pow(10.0, rng.next_double(-10.0, -6.0));
    lp.per_node_overhead = rng.next_double(0.0, 1e-3);
    lp.sparse_inefficiency = rng.next_double(1.0, 3.0);
    lp.sparse_overhead = rng.next_double(0.0, 1.5 * macs * lp.time_per_mac);
    auto pstar = breakeven_ratio(node, lp, macs);
    double dense = layer_latency(node, 0.0, lp, macs);
    bool law_holds = true;
    for (int i = 1; i <= 100; ++i) {
      double p = i / 100.0;
      double threshold = pstar ? *pstar : 1.0;
      if (std::abs(p - threshold) < 1e-9) continue;  // grid point on the knife edge
      bool faster = layer_latency(node, p, lp, macs) < dense;
      bool should = pstar.has_value() && p > *pstar;
      if (faster != should) law_holds = false;
    }
    if (law_holds) ++draws_ok;
  }

  // Plan legality: every emitted ratio sits strictly above break-even and at
  // or below the policy cap.
  Graph g = load_graph(fixture("lwop.graph.json"));
  LatencyParams lp = load_latency_params(fixture("calib_default.json"));
  SensitivityPolicy policy = load_policy(fixture("policy_default.json"));
  CostReport cost = graph_cost(g);
  int plans_checked = 0;
  bool legal = true;
  for (double target : {1.05, 1.1, 1.2, 1.3, 1.4}) {
    PlanTarget pt;
    pt.speedup = target;
    PrunePlan plan_result;
    try {
      plan_result = plan(g, nullptr, lp, policy, pt);
    } catch (const Error&) {
      continue;  // unreachable targets are legal outcomes
    }
    ++plans_checked;
    for (const auto& d : plan_result.decisions) {
      const OpNode* n = g.find_node(d.node_id);
      auto pstar = breakeven_ratio(*n, lp, cost.per_node.at(d.node_id).macs);
      if (!pstar || d.ratio <= *pstar || d.ratio > policy.cap_for(n->block_tag) + 1e-12)
        legal = false;
    }
  }
  bool ok = draws_ok == N && legal && plans_checked > 0;
  std::ostringstream ss;
  ss << "latency-vs-breakeven law held for " << draws_ok << "/" << N
     << " random draws on a 100-point grid; " << plans_checked
     << " emitted plans all respect (p*, cap]";
  report(4, ok, ss.str());
}

// ---------------------------------------------------------------------------
// 5. Mask laws: exact counts, nestedness, determinism.
// ---------------------------------------------------------------------------
void criterion5() {
  SplitMix64 rng(0x5EED);
  const int N = 500;
  int tensors_ok = 0;
  std::vector<double> ratios = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  for (int t = 0; t < N; ++t) {
    uint32_t out_ch = 2 * (1 + static_cast<uint32_t>(rng.next() % 4));
    uint32_t icg = 2 * (1 + static_cast<uint32_t>(rng.next() % 2));
    uint32_t k = (rng.next() % 2) ? 3u : 1u;
    Tensor w({out_ch, icg, k, k});
    w.data.resize(w.size());
    for (auto& v : w.data) v = static_cast<float>(rng.next_double(-1.0, 1.0));
    bool ok = true;
    for (auto scheme : {PruneScheme::unstructured(), PruneScheme::block(2, 2),
                        PruneScheme::channel()}) {
      size_t units;
      switch (scheme.kind) {
        case PruneScheme::Kind::Unstructured:
          units = w.size();
          break;
        case PruneScheme::Kind::Block:
          units = w.size() / 4;
          break;
        default:
          units = out_ch;
      }
      std::vector<uint8_t> prev;
      for (size_t ri = 0; ri < ratios.size(); ++ri) {
        PruneMask m = magnitude_mask(w, ratios[ri], scheme);
        PruneMask m2 = magnitude_mask(w, ratios[ri], scheme);
        if (m.keep != m2.keep) ok = false;  // determinism
        size_t pruned_units =
            static_cast<size_t>(std::floor(ratios[ri] * static_cast<double>(units) + 1e-9));
        size_t unit_elems = w.size() / units;
        if (m.kept_count() != (units - pruned_units) * unit_elems) ok = false;  // exact count
        if (ri > 0)
          for (size_t i = 0; i < m.keep.size(); ++i)
            if (m.keep[i] && !prev[i]) ok = false;  // nestedness
        prev = m.keep;
      }
    }
    if (ok) ++tensors_ok;
  }
  std::ostringstream ss;
  ss << tensors_ok << "/" << N
     << " random tensors passed exact-count, nestedness and determinism for all 3 schemes x 9 "
        "ratios";
  report(5, tensors_ok == N, ss.str());
}

// ---------------------------------------------------------------------------
// 6. Executor vs an independent brute-force convolution.
// ---------------------------------------------------------------------------
void criterion6() {
  SplitMix64 rng(0x0DDBA11);
  int cases = 0, passed = 0;
  while (cases < 200) {
    ConvAttrs a;
    int kernels[] = {1, 3, 5, 7};
    a.kernel_h = a.kernel_w = kernels[rng.next() % 4];
    a.stride = 1 + static_cast<int>(rng.next() % 2);
    a.dilation = 1 + static_cast<int>(rng.next() % 3);
    a.padding = static_cast<int>(rng.next() % 4);
    a.groups = 1 + static_cast<int>(rng.next() % 2);
    a.in_channels = a.groups * (1 + static_cast<int>(rng.next() % (8 / a.groups)));
    a.out_channels = a.groups * (1 + static_cast<int>(rng.next() % (8 / a.groups)));
    a.has_bias = (rng.next() % 2) == 0;
    int h = 4 + static_cast<int>(rng.next() % 13);   // <= 16
    int wd = 4 + static_cast<int>(rng.next() % 13);  // <= 16
    int eff = a.dilation * (a.kernel_h - 1) + 1;
    if (h + 2 * a.padding - eff < 0 || wd + 2 * a.padding - eff < 0) continue;
    ++cases;

    Graph g;
    g.inputs = {{"x", {{a.in_channels, h, wd}}}};
    g.nodes = {OpNode{"c", OpKind::Conv2d, a, {"x"}, BlockTag::Backbone}};
    g.outputs = {"c"};
    Tensor in({static_cast<uint32_t>(a.in_channels), static_cast<uint32_t>(h),
               static_cast<uint32_t>(wd)});
    in.data.resize(in.size());
    for (auto& v : in.data) v = static_cast<float>(rng.next_double(-1.0, 1.0));
    WeightStore w = random_weights(g, rng.next());
    Tensor got = run(g, w, {{"x", in}}).at("c");

    // Brute force, written against the op definition, shares no executor code.
    const Tensor& kw = w.entries.at("c").weight;
    const Tensor* bias = w.entries.at("c").bias ? &*w.entries.at("c").bias : nullptr;
    int out_h = (h + 2 * a.padding - eff) / a.stride + 1;
    int out_w = (wd + 2 * a.padding - eff) / a.stride + 1;
    int icg = a.in_channels / a.groups;
    int ocg = a.out_channels / a.groups;
    double max_diff = 0.0;
    for (int oc = 0; oc < a.out_channels; ++oc)
      for (int oy = 0; oy < out_h; ++oy)
        for (int ox = 0; ox < out_w; ++ox) {
          double acc = bias ? bias->data[oc] : 0.0;
          for (int ic = 0; ic < icg; ++ic)
            for (int ky = 0; ky < a.kernel_h; ++ky)
              for (int kx = 0; kx < a.kernel_w; ++kx) {
                int iy = oy * a.stride - a.padding + ky * a.dilation;
                int ix = ox * a.stride - a.padding + kx * a.dilation;
                if (iy < 0 || iy >= h || ix < 0 || ix >= wd) continue;
                double wv =
                    kw.data[((static_cast<size_t>(oc) * icg + ic) * a.kernel_h + ky) *
                                a.kernel_w +
                            kx];
                acc += wv * in.at3(static_cast<uint32_t>((oc / ocg) * icg + ic), iy, ix);
              }
          max_diff = std::max(
              max_diff, std::abs(static_cast<double>(got.at3(oc, oy, ox)) - acc));
        }
    if (max_diff < 1e-5) ++passed;
  }
  std::ostringstream ss;
  ss << passed << "/200 randomized convs matched the brute-force oracle to <1e-5";
  report(6, passed == 200, ss.str());
}

// ---------------------------------------------------------------------------
// 7. Speedup estimation: rewritten+pruned beats dense; e2e is self-consistent.
// ---------------------------------------------------------------------------
void criterion7() {
  LatencyParams lp = load_latency_params(fixture("calib_default.json"));
  SensitivityPolicy policy = load_policy(fixture("policy_default.json"));
  bool ok = true;
  std::ostringstream ss;
  for (const char* name : {"lwop.graph.json", "openpose_vgg.graph.json"}) {
    Graph g = load_graph(fixture(name));
    double dense = graph_latency(g, nullptr, lp).total;
    auto [g1, l1] = replace_large_kernels(g);
    auto [g2, l2] = dedilate(g1);
    auto [g3, l3] = replace_activations(g2, ActFn::Swish, ActFn::Hardtanh);
    PlanTarget target;
    target.speedup = 1.2;
    PrunePlan p = plan(g3, nullptr, lp, policy, target);
    double planned = graph_latency(g3, &p, lp).total;
    bool strictly_lower = planned < dense;
    bool consistent = p.predicted_planned_latency == planned &&
                      p.predicted_speedup == p.predicted_dense_latency / planned;
    ok = ok && strictly_lower && consistent;
    ss << name << ": dense " << dense << "s -> rewritten+pruned " << planned << "s; ";
  }

  // The e2e CLI's reported speedup must be reproducible from graph_latency.
  std::string out_f = "/tmp/poseopt_acc7.json";
  std::string cmd = std::string(POSEOPT_CLI_PATH) + " e2e --graph " +
                    fixture("lwop.graph.json") + " --calib " + fixture("calib_default.json") +
                    " --target-speedup 1.3 --persons 2 --seed 1 --skeleton " +
                    fixture("skeleton_coco18.json") + " >" + out_f + " 2>/dev/null";
  if (std::system(cmd.c_str()) != 0) {
    ok = false;
    ss << "e2e CLI failed";
  } else {
    std::ifstream in(out_f);
    nlohmann::json j = nlohmann::json::parse(in);
    double reported = j["results"]["pipeline_speedup_vs_dense"].get<double>();
    PrunePlan p = parse_plan(j["results"]["plan"].dump());
    Graph g = load_graph(fixture("lwop.graph.json"));
    auto [g1, l1] = replace_large_kernels(g);
    auto [g2, l2] = dedilate(g1);
    auto [g3, l3] = replace_activations(g2, ActFn::Swish, ActFn::Hardtanh);
    double dense = graph_latency(g, nullptr, lp).total;
    double planned = graph_latency(g3, &p, lp).total;
    if (std::abs(reported - dense / planned) > 1e-12 * reported) {
      ok = false;
      ss << "e2e speedup " << reported << " != recomputed " << dense / planned << "; ";
    } else {
      ss << "e2e speedup " << reported << " reproduced from graph_latency";
    }
  }
  report(7, ok, ss.str());
}

// ---------------------------------------------------------------------------
// 8. depth_rescale over random StageSpecs.
// ---------------------------------------------------------------------------
void criterion8() {
  SplitMix64 rng(0xD3375);
  int specs_ok = 0, successes = 0;
  const int N = 100;
  for (int t = 0; t < N; ++t) {
    StageSpec spec;
    int stages = 1 + static_cast<int>(rng.next() % 3);
    for (int s = 0; s < stages; ++s) {
      Stage st;
      st.num_blocks = 1 + static_cast<int>(rng.next() % 6);
      st.width = 8 * (2 + static_cast<int>(rng.next() % 15));  // 16..128
      st.block_kind = (rng.next() % 2) ? BlockKind::Bottleneck : BlockKind::Plain3x3;
      st.stride_first = 1 + static_cast<int>(rng.next() % 2);
      spec.stages.push_back(st);
    }
    bool ok = true;
    for (double m : {0.5, 1.0, 2.0, 3.0}) {
      StageSpec out;
      try {
        out = depth_rescale(spec, m);
      } catch (const Error& e) {
        if (e.code() != "ToleranceExceeded") ok = false;
        continue;
      }
      ++successes;
      if (m == 1.0 && !(out == spec)) ok = false;
      if (out.stages.size() != spec.stages.size()) ok = false;
      for (size_t s = 0; s < spec.stages.size() && ok; ++s) {
        // Exact round-half-up block counts, floored at 1.
        int want =
            std::max<int>(1, static_cast<int>(std::floor(spec.stages[s].num_blocks * m + 0.5)));
        if (out.stages[s].num_blocks != want) ok = false;
      }
      // FLOPs tolerance, recomputed via the cost model on rebuilt backbones.
      Graph before = build_backbone(spec, spec.stages[0].width);
      Graph after = build_backbone(out, out.stages[0].width);
      double ratio = static_cast<double>(graph_cost(after).totals.flops) /
                     static_cast<double>(graph_cost(before).totals.flops);
      if (ratio < 1.0 - 0.15 - 1e-12 || ratio > 1.0 + 0.15 + 1e-12) ok = false;
    }
    if (ok) ++specs_ok;
  }
  std::ostringstream ss;
  ss << specs_ok << "/" << N << " random StageSpecs x multipliers {0.5,1,2,3} ("
     << successes << " successful rescales, all within the 0.15 FLOPs tolerance; m=1 identity)";
  report(8, specs_ok == N && successes > 0, ss.str());
}

}  // namespace

int main() {
  criterion1();
  criterion2();
  criterion3();
  criterion4();
  criterion5();
  criterion6();
  criterion7();
  criterion8();
  if (g_failures) std::printf("acceptance: %d criterion(s) FAILED\n", g_failures);
  else std::printf("acceptance: all 8 criteria passed\n");
  return g_failures ? 1 : 0;
}
