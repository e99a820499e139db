// Copyright 2026 The poseopt Authors
// SPDX-License-Identifier: Apache-2.0
#include "poseopt/prune.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "poseopt/common.hpp"
#include "poseopt/executor.hpp"

namespace poseopt {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Schemes and masks

std::string PruneScheme::str() const {
  switch (kind) {
    case Kind::Unstructured: return "unstructured";
    case Kind::Channel: return "channel";
    case Kind::Block:
      return "block(" + std::to_string(block_rows) + "," + std::to_string(block_cols) + ")";
  }
  return "?";
}

PruneScheme PruneScheme::parse(const std::string& s) {
  if (s == "unstructured") return unstructured();
  if (s == "channel") return channel();
  int r = 0, c = 0;
  if (std::sscanf(s.c_str(), "block(%d,%d)", &r, &c) == 2 && r >= 1 && c >= 1)
    return block(r, c);
  throw data_error("SchemaError", "bad prune scheme '" + s + "'");
}

size_t PruneMask::kept_count() const {
  return static_cast<size_t>(std::count(keep.begin(), keep.end(), uint8_t{1}));
}

Tensor PruneMask::as_tensor(const Tensor& like) const {
  Tensor t(like.dims);
  for (size_t i = 0; i < keep.size(); ++i) t.data[i] = keep[i] ? 1.0f : 0.0f;
  return t;
}

namespace {

size_t pruned_count(double ratio, size_t units) {
  return static_cast<size_t>(std::floor(ratio * static_cast<double>(units) + 1e-9));
}

// Indices of the `kept` highest-norm units; ties break to the lower index.
// The ordering is total, so keep-sets nest across ratios.
std::vector<size_t> top_units(const std::vector<double>& norms, size_t kept) {
  std::vector<size_t> idx(norms.size());
  std::iota(idx.begin(), idx.end(), size_t{0});
  std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) {
    if (norms[a] != norms[b]) return norms[a] > norms[b];
    return a < b;
  });
  idx.resize(kept);
  return idx;
}

}  // namespace

PruneMask magnitude_mask(const Tensor& weights, double ratio, const PruneScheme& scheme) {
  if (ratio < 0.0 || ratio > 1.0) throw data_error("InvalidRatio", "prune ratio must lie in [0,1]");
  size_t n = weights.data.size();
  PruneMask m;
  m.scheme = scheme;
  m.keep.assign(n, 0);

  switch (scheme.kind) {
    case PruneScheme::Kind::Unstructured: {
      std::vector<double> norms(n);
      for (size_t i = 0; i < n; ++i) norms[i] = std::fabs(static_cast<double>(weights.data[i]));
      for (size_t i : top_units(norms, n - pruned_count(ratio, n))) m.keep[i] = 1;
      break;
    }
    case PruneScheme::Kind::Channel: {
      size_t ch = weights.dims[0];
      size_t per = n / ch;
      std::vector<double> norms(ch, 0.0);
      for (size_t c = 0; c < ch; ++c)
        for (size_t i = 0; i < per; ++i)
          norms[c] += std::fabs(static_cast<double>(weights.data[c * per + i]));
      for (size_t c : top_units(norms, ch - pruned_count(ratio, ch)))
        std::fill(m.keep.begin() + c * per, m.keep.begin() + (c + 1) * per, uint8_t{1});
      break;
    }
    case PruneScheme::Kind::Block: {
      // Blocks tile the flattened [out_ch, rest] matrix.
      size_t rows = weights.dims[0];
      size_t cols = n / rows;
      size_t br = static_cast<size_t>(scheme.block_rows);
      size_t bc = static_cast<size_t>(scheme.block_cols);
      if (rows % br != 0 || cols % bc != 0)
        throw data_error("ShapeIncompatibleWithBlock",
                         "matrix " + std::to_string(rows) + "x" + std::to_string(cols) +
                             " not tileable by " + std::to_string(br) + "x" + std::to_string(bc));
      size_t grid_r = rows / br, grid_c = cols / bc;
      std::vector<double> norms(grid_r * grid_c, 0.0);
      for (size_t r = 0; r < rows; ++r)
        for (size_t c = 0; c < cols; ++c)
          norms[(r / br) * grid_c + c / bc] +=
              std::fabs(static_cast<double>(weights.data[r * cols + c]));
      size_t nblocks = norms.size();
      for (size_t b : top_units(norms, nblocks - pruned_count(ratio, nblocks))) {
        size_t r0 = (b / grid_c) * br, c0 = (b % grid_c) * bc;
        for (size_t r = r0; r < r0 + br; ++r)
          for (size_t c = c0; c < c0 + bc; ++c) m.keep[r * cols + c] = 1;
      }
      break;
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// Weight store

static uint64_t fnv1a64(const std::string& s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

WeightStore load_weight_store(const std::string& dir) {
  std::ifstream mf(fs::path(dir) / "manifest.json");
  if (!mf) throw data_error("FileError", "cannot open weight manifest in " + dir);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(mf);
  } catch (const nlohmann::json::exception& e) {
    throw data_error("SchemaError", std::string("malformed weight manifest: ") + e.what());
  }
  WeightStore w;
  for (const auto& id_json : j.at("nodes")) {
    std::string id = id_json.get<std::string>();
    NodeWeights nw;
    nw.weight = load_tensor((fs::path(dir) / (id + ".w.tnsr")).string());
    fs::path bias = fs::path(dir) / (id + ".b.tnsr");
    if (fs::exists(bias)) nw.bias = load_tensor(bias.string());
    w.entries[id] = std::move(nw);
  }
  return w;
}

void save_weight_store(const std::string& dir, const WeightStore& w) {
  fs::create_directories(dir);
  nlohmann::ordered_json j;
  j["nodes"] = nlohmann::ordered_json::array();
  for (const auto& [id, nw] : w.entries) {
    j["nodes"].push_back(id);
    save_tensor((fs::path(dir) / (id + ".w.tnsr")).string(), nw.weight);
    if (nw.bias) save_tensor((fs::path(dir) / (id + ".b.tnsr")).string(), *nw.bias);
  }
  std::ofstream mf(fs::path(dir) / "manifest.json");
  mf << j.dump(2) << "\n";
}

WeightStore random_weights(const Graph& g, uint64_t seed) {
  WeightStore w;
  for (const auto& n : g.nodes) {
    if (n.kind == OpKind::Conv2d) {
      const auto& a = n.conv();
      int icg = a.in_channels / a.groups;
      NodeWeights nw;
      nw.weight = Tensor({static_cast<uint32_t>(a.out_channels), static_cast<uint32_t>(icg),
                          static_cast<uint32_t>(a.kernel_h), static_cast<uint32_t>(a.kernel_w)});
      double fan_in = static_cast<double>(icg) * a.kernel_h * a.kernel_w;
      double bound = std::sqrt(3.0 / fan_in);
      SplitMix64 rng(seed ^ fnv1a64(n.id));
      for (float& v : nw.weight.data)
        v = static_cast<float>(rng.next_double(-bound, bound));
      if (a.has_bias) {
        nw.bias = Tensor({static_cast<uint32_t>(a.out_channels)});
        for (float& v : nw.bias->data) v = static_cast<float>(rng.next_double(-0.1, 0.1));
      }
      w.entries[n.id] = std::move(nw);
    } else if (n.kind == OpKind::Activation && n.act().fn == ActFn::Prelu) {
      // slope shape = channel count of the node's input
      // resolved lazily by the caller when shapes matter; default 0.25
      NodeWeights nw;
      // channel count from shape inference
      auto shapes = infer_shapes(g);
      auto it = shapes.find(n.inputs[0]);
      uint32_t c = it != shapes.end() ? static_cast<uint32_t>(it->second.dims[0]) : 1;
      nw.weight = Tensor({c});
      std::fill(nw.weight.data.begin(), nw.weight.data.end(), 0.25f);
      w.entries[n.id] = std::move(nw);
    }
  }
  return w;
}

// ---------------------------------------------------------------------------
// Sensitivity scan

double PrunePlan::ratio_for(const std::string& node_id) const {
  for (const auto& d : decisions)
    if (d.node_id == node_id) return d.ratio;
  return 0.0;
}

double SensitivityPolicy::cap_for(BlockTag tag) const {
  auto it = max_ratio.find(tag);
  return it == max_ratio.end() ? 0.0 : it->second;
}

SensitivityPolicy load_policy(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw data_error("FileError", "cannot open policy file: " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw data_error("SchemaError", std::string("malformed policy JSON: ") + e.what());
  }
  SensitivityPolicy p;
  if (j.contains("max_ratio"))
    for (auto it = j.at("max_ratio").begin(); it != j.at("max_ratio").end(); ++it) {
      double v = it.value().get<double>();
      if (v < 0.0 || v > 1.0) throw data_error("SchemaError", "policy cap out of [0,1]");
      p.max_ratio[block_tag_from_string(it.key())] = v;
    }
  if (j.contains("candidate_ratios")) {
    p.candidate_ratios = j.at("candidate_ratios").get<std::vector<double>>();
    if (p.candidate_ratios.empty() ||
        !std::is_sorted(p.candidate_ratios.begin(), p.candidate_ratios.end()))
      throw data_error("SchemaError", "candidate_ratios must be nonempty and ascending");
  }
  return p;
}

namespace {

std::map<std::string, Tensor> probe_inputs(const Graph& g, uint64_t seed, int probe) {
  std::map<std::string, Tensor> ins;
  for (const auto& gin : g.inputs) {
    std::vector<uint32_t> dims;
    for (int64_t d : gin.shape.dims) dims.push_back(static_cast<uint32_t>(d));
    Tensor t(dims);
    SplitMix64 rng(seed ^ fnv1a64(gin.name) ^ (0x9E3779B97F4A7C15ULL * (probe + 1)));
    for (float& v : t.data) v = static_cast<float>(rng.next_double(-1.0, 1.0));
    ins[gin.name] = std::move(t);
  }
  return ins;
}

double relative_distortion(const std::map<std::string, Tensor>& ref,
                           const std::map<std::string, Tensor>& got) {
  double num = 0.0, den = 0.0;
  for (const auto& [name, rt] : ref) {
    const Tensor& gt = got.at(name);
    for (size_t i = 0; i < rt.data.size(); ++i) {
      double d = static_cast<double>(gt.data[i]) - static_cast<double>(rt.data[i]);
      num += d * d;
      den += static_cast<double>(rt.data[i]) * static_cast<double>(rt.data[i]);
    }
  }
  if (den == 0.0) return num == 0.0 ? 0.0 : 1.0;
  return std::sqrt(num) / std::sqrt(den);
}

WeightStore masked_store(const Graph& g, const WeightStore& w, BlockTag tag, double ratio) {
  WeightStore out = w;
  for (const auto& n : g.nodes) {
    if (n.kind != OpKind::Conv2d || n.block_tag != tag) continue;
    auto it = out.entries.find(n.id);
    if (it == out.entries.end()) continue;
    PruneMask m = magnitude_mask(it->second.weight, ratio, PruneScheme::unstructured());
    for (size_t i = 0; i < m.keep.size(); ++i)
      if (!m.keep[i]) it->second.weight.data[i] = 0.0f;
  }
  return out;
}

}  // namespace

std::vector<SensitivityPoint> sensitivity_scan(const Graph& g, const WeightStore& w,
                                               BlockTag tag, const std::vector<double>& ratios,
                                               int probes, uint64_t seed) {
  if (probes < 1) throw data_error("InvalidArgument", "probes must be >= 1");
  std::vector<std::map<std::string, Tensor>> inputs;
  std::vector<std::map<std::string, Tensor>> dense_outputs;
  for (int p = 0; p < probes; ++p) {
    inputs.push_back(probe_inputs(g, seed, p));
    dense_outputs.push_back(run(g, w, inputs.back()));
  }
  std::vector<SensitivityPoint> curve;
  for (double r : ratios) {
    WeightStore masked = masked_store(g, w, tag, r);
    double sum = 0.0;
    for (int p = 0; p < probes; ++p)
      sum += relative_distortion(dense_outputs[p], run(g, masked, inputs[p]));
    curve.push_back({r, sum / probes});
  }
  return curve;
}

// ---------------------------------------------------------------------------
// Plan search

PrunePlan plan(const Graph& g, const WeightStore* w, const LatencyParams& lp,
               const SensitivityPolicy& policy, const PlanTarget& target) {
  if (target.max_distortion && !w)
    throw data_error("InvalidArgument", "distortion-budget planning requires weights");
  if (!target.speedup && !target.max_distortion)
    throw data_error("InvalidArgument", "plan target is empty");

  CostReport costs = graph_cost(g);
  double dense_total = 0.0;
  std::map<std::string, double> dense_lat;
  for (const auto& n : g.nodes) {
    dense_lat[n.id] = layer_latency(n, 0.0, lp, costs.per_node.at(n.id).macs);
    dense_total += dense_lat[n.id];
  }

  // Distortion budget tightens the per-tag caps using the scan as proxy.
  std::map<BlockTag, double> caps;
  for (const auto& [tag, cap] : policy.max_ratio) caps[tag] = cap;
  if (target.max_distortion) {
    for (auto& [tag, cap] : caps) {
      bool tag_present = false;
      for (const auto& n : g.nodes)
        if (n.kind == OpKind::Conv2d && n.block_tag == tag) tag_present = true;
      if (!tag_present) continue;
      auto curve = sensitivity_scan(g, *w, tag, policy.candidate_ratios, 3, 7);
      double allowed = 0.0;
      for (const auto& pt : curve)
        if (pt.mean_distortion <= *target.max_distortion) allowed = std::max(allowed, pt.ratio);
      cap = std::min(cap, allowed);
    }
  }

  // Layers by descending dense-latency share; stable on graph order.
  std::vector<const OpNode*> layers;
  for (const auto& n : g.nodes)
    if (n.kind == OpKind::Conv2d && costs.per_node.at(n.id).macs > 0) layers.push_back(&n);
  std::stable_sort(layers.begin(), layers.end(), [&](const OpNode* a, const OpNode* b) {
    return dense_lat.at(a->id) > dense_lat.at(b->id);
  });

  PrunePlan result;
  result.predicted_dense_latency = dense_total;
  double current_total = dense_total;
  bool want_speedup = target.speedup.has_value();
  bool met = false;

  for (const OpNode* n : layers) {
    uint64_t macs = costs.per_node.at(n->id).macs;
    auto p_star = breakeven_ratio(*n, lp, macs);
    if (!p_star) continue;  // not prunable profitably at any ratio
    double cap = caps.count(n->block_tag) ? caps.at(n->block_tag) : 0.0;
    std::vector<double> admissible;
    for (double r : policy.candidate_ratios)
      if (r > *p_star + 1e-12 && r <= cap + 1e-12) admissible.push_back(r);
    if (admissible.empty()) continue;

    double chosen = -1.0;
    if (want_speedup) {
      for (double r : admissible) {  // ascending: smallest ratio reaching the target
        double t = current_total - dense_lat.at(n->id) + layer_latency(*n, r, lp, macs);
        if (dense_total / t >= *target.speedup) { chosen = r; met = true; break; }
      }
    }
    if (chosen < 0.0) chosen = admissible.back();  // accumulate as much as possible
    current_total = current_total - dense_lat.at(n->id) + layer_latency(*n, chosen, lp, macs);
    result.decisions.push_back({n->id, PruneScheme::unstructured(), chosen});
    if (met) break;
  }

  if (want_speedup && !met) {
    std::ostringstream os;
    os << "target speedup " << *target.speedup << " unreachable; best achievable "
       << dense_total / current_total;
    throw Error(ErrorKind::TargetUnreachable, "TargetUnreachable", os.str());
  }

  result.predicted_planned_latency = graph_latency(g, &result, lp).total;
  result.predicted_speedup = result.predicted_dense_latency / result.predicted_planned_latency;
  return result;
}

WeightStore apply_plan(const WeightStore& w, const Graph& g, const PrunePlan& p) {
  WeightStore out = w;
  for (const auto& d : p.decisions) {
    if (!g.find_node(d.node_id))
      throw data_error("UnknownNodeInPlan", "plan references unknown node '" + d.node_id + "'");
    auto it = out.entries.find(d.node_id);
    if (it == out.entries.end())
      throw data_error("MissingWeights", "no weights for planned node '" + d.node_id + "'");
    PruneMask m = magnitude_mask(it->second.weight, d.ratio, d.scheme);
    for (size_t i = 0; i < m.keep.size(); ++i)
      if (!m.keep[i]) it->second.weight.data[i] = 0.0f;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Plan JSON

std::string serialize_plan(const PrunePlan& p) {
  nlohmann::ordered_json j;
  j["decisions"] = nlohmann::ordered_json::array();
  for (const auto& d : p.decisions)
    j["decisions"].push_back({{"node", d.node_id}, {"scheme", d.scheme.str()}, {"ratio", d.ratio}});
  j["predicted_dense_latency"] = p.predicted_dense_latency;
  j["predicted_planned_latency"] = p.predicted_planned_latency;
  j["predicted_speedup"] = p.predicted_speedup;
  return j.dump(2) + "\n";
}

PrunePlan parse_plan(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw data_error("SchemaError", std::string("malformed plan JSON: ") + e.what());
  }
  PrunePlan p;
  for (const auto& jd : j.at("decisions"))
    p.decisions.push_back({jd.at("node").get<std::string>(),
                           PruneScheme::parse(jd.at("scheme").get<std::string>()),
                           jd.at("ratio").get<double>()});
  p.predicted_dense_latency = j.value("predicted_dense_latency", 0.0);
  p.predicted_planned_latency = j.value("predicted_planned_latency", 0.0);
  p.predicted_speedup = j.value("predicted_speedup", 1.0);
  return p;
}

}  // namespace poseopt
