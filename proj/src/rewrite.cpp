// Copyright 2026 The poseopt Authors
// SPDX-License-Identifier: Apache-2.0
#include "poseopt/rewrite.hpp"

#include <cmath>
#include <functional>
#include <unordered_map>

#include <json.hpp>

#include "poseopt/common.hpp"

namespace poseopt {

size_t RewriteLog::replaced_count() const {
  size_t n = 0;
  for (const auto& e : entries)
    if (!e.skipped) ++n;
  return n;
}

std::string serialize_rewrite_log(const RewriteLog& log) {
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  for (const auto& e : log.entries) {
    nlohmann::ordered_json je;
    je["pass"] = e.pass_name;
    je["original"] = e.original_node_id;
    je["replacements"] = e.replacement_node_ids;
    je["rf_before"] = {{"size", e.rf_before.size}, {"jump", e.rf_before.jump}};
    je["rf_after"] = {{"size", e.rf_after.size}, {"jump", e.rf_after.jump}};
    je["macs_before"] = e.macs_before;
    je["macs_after"] = e.macs_after;
    je["skipped"] = e.skipped;
    if (e.skipped) je["skip_reason"] = e.skip_reason;
    j.push_back(std::move(je));
  }
  return j.dump(2) + "\n";
}

namespace {

struct ChainResult {
  Graph graph;
  // original id -> chain ids (only for replaced nodes)
  std::vector<std::pair<std::string, std::vector<std::string>>> replaced;
  std::vector<std::pair<std::string, std::string>> skipped;  // id, reason
};

// Rebuild the graph, expanding each conv accepted by `eligible` into a chain
// of (k_eff-1)/2 plain 3x3 convs. Chain width = original out_channels; bias
// only on the final conv; no activations inserted inside the chain.
ChainResult expand_convs(const Graph& g,
                         const std::function<bool(const ConvAttrs&, std::string&)>& eligible) {
  ChainResult res;
  res.graph.name = g.name;
  res.graph.inputs = g.inputs;
  std::unordered_map<std::string, std::string> rename;  // orig id -> tail id

  auto resolve = [&](const std::string& ref) {
    auto it = rename.find(ref);
    return it == rename.end() ? ref : it->second;
  };

  for (const OpNode& n : g.nodes) {
    OpNode copy = n;
    for (auto& ref : copy.inputs) ref = resolve(ref);
    if (n.kind != OpKind::Conv2d) {
      res.graph.nodes.push_back(std::move(copy));
      continue;
    }
    std::string reason;
    if (!eligible(n.conv(), reason)) {
      if (!reason.empty()) res.skipped.emplace_back(n.id, reason);
      res.graph.nodes.push_back(std::move(copy));
      continue;
    }
    const ConvAttrs& a = n.conv();
    int k_eff = a.dilation * (a.kernel_h - 1) + 1;
    int chain_len = (k_eff - 1) / 2;
    std::vector<std::string> ids;
    std::string prev = copy.inputs[0];
    for (int i = 1; i <= chain_len; ++i) {
      OpNode link;
      link.id = n.id + "#" + std::to_string(i);
      link.kind = OpKind::Conv2d;
      ConvAttrs la;
      la.kernel_h = la.kernel_w = 3;
      la.stride = 1;
      la.padding = 1;
      la.dilation = 1;
      la.groups = 1;
      la.in_channels = (i == 1) ? a.in_channels : a.out_channels;
      la.out_channels = a.out_channels;
      la.has_bias = (i == chain_len) && a.has_bias;
      link.attrs = la;
      link.inputs = {prev};
      link.block_tag = n.block_tag;
      prev = link.id;
      ids.push_back(link.id);
      res.graph.nodes.push_back(std::move(link));
    }
    rename[n.id] = prev;
    res.replaced.emplace_back(n.id, std::move(ids));
  }
  res.graph.outputs = g.outputs;
  for (auto& o : res.graph.outputs) o = resolve(o);
  return res;
}

RewriteLog log_chain(const std::string& pass, const Graph& before, const Graph& after,
                     const ChainResult& res) {
  RewriteLog log;
  if (res.replaced.empty() && res.skipped.empty()) return log;
  auto shapes_before = infer_shapes(before);
  auto shapes_after = infer_shapes(after);
  for (const auto& [orig, ids] : res.replaced) {
    RewriteEntry e;
    e.pass_name = pass;
    e.original_node_id = orig;
    e.replacement_node_ids = ids;
    e.rf_before = receptive_field(before, orig);
    e.rf_after = receptive_field(after, ids.back());
    e.macs_before = conv_cost(*before.find_node(orig), shapes_before.at(orig)).macs;
    for (const auto& id : ids)
      e.macs_after += conv_cost(*after.find_node(id), shapes_after.at(id)).macs;
    log.entries.push_back(std::move(e));
  }
  for (const auto& [id, reason] : res.skipped) {
    RewriteEntry e;
    e.pass_name = pass;
    e.original_node_id = id;
    e.rf_before = e.rf_after = receptive_field(before, id);
    e.macs_before = e.macs_after = conv_cost(*before.find_node(id), shapes_before.at(id)).macs;
    e.skipped = true;
    e.skip_reason = reason;
    log.entries.push_back(std::move(e));
  }
  return log;
}

}  // namespace

std::pair<Graph, RewriteLog> replace_large_kernels(const Graph& g, int max_kernel) {
  auto eligible = [max_kernel](const ConvAttrs& a, std::string& reason) {
    if (std::max(a.kernel_h, a.kernel_w) <= max_kernel) return false;
    if (a.kernel_h != a.kernel_w) { reason = "non-square kernel"; return false; }
    if (a.stride != 1) { reason = "stride != 1"; return false; }
    if (a.groups != 1) { reason = "grouped conv"; return false; }
    return true;
  };
  ChainResult res = expand_convs(g, eligible);
  RewriteLog log = log_chain("replace_large_kernels", g, res.graph, res);
  return {std::move(res.graph), std::move(log)};
}

std::pair<Graph, RewriteLog> dedilate(const Graph& g) {
  auto eligible = [](const ConvAttrs& a, std::string& reason) {
    if (a.dilation <= 1) return false;
    if (a.kernel_h != a.kernel_w) { reason = "non-square kernel"; return false; }
    if (a.stride != 1) { reason = "stride != 1"; return false; }
    if (a.groups != 1) { reason = "grouped conv"; return false; }
    return true;
  };
  ChainResult res = expand_convs(g, eligible);
  RewriteLog log = log_chain("dedilate", g, res.graph, res);
  return {std::move(res.graph), std::move(log)};
}

std::pair<Graph, RewriteLog> replace_activations(const Graph& g, ActFn from_fn, ActFn to_fn) {
  Graph out = g;
  RewriteLog log;
  auto shapes = infer_shapes(g);
  for (auto& n : out.nodes) {
    if (n.kind != OpKind::Activation || n.act().fn != from_fn) continue;
    n.attrs = ActAttrs{to_fn};
    RewriteEntry e;
    e.pass_name = "replace_activations";
    e.original_node_id = n.id;
    e.replacement_node_ids = {n.id};
    e.rf_before = e.rf_after = receptive_field(g, n.id);
    log.entries.push_back(std::move(e));
  }
  return {std::move(out), std::move(log)};
}

namespace {

int round_half_up(double x) { return static_cast<int>(std::floor(x + 0.5)); }

int round_to_multiple(double x, int multiple) {
  int r = multiple * round_half_up(x / multiple);
  return std::max(r, multiple);
}

}  // namespace

StageSpec depth_rescale(const StageSpec& spec, double depth_multiplier, int rounding_multiple,
                        double flops_tolerance) {
  if (depth_multiplier <= 0.0) throw data_error("InvalidSpec", "depth multiplier must be > 0");
  if (rounding_multiple < 1) throw data_error("InvalidSpec", "rounding multiple must be >= 1");
  StageSpec out = spec;
  for (auto& st : out.stages) {
    int nb = round_half_up(st.num_blocks * depth_multiplier);
    if (nb < 1)
      throw data_error("InvalidSpec", "depth multiplier collapses a stage to zero blocks");
    if (nb != st.num_blocks) {
      double w = st.width * std::sqrt(static_cast<double>(st.num_blocks) / nb);
      st.width = round_to_multiple(w, rounding_multiple);
      st.num_blocks = nb;
    }
  }
  // Ratio judged on the stage bodies: each backbone is built with its own
  // first-stage width as input channels.
  uint64_t before = graph_cost(build_backbone(spec, spec.stages[0].width)).totals.macs;
  uint64_t after = graph_cost(build_backbone(out, out.stages[0].width)).totals.macs;
  double ratio = static_cast<double>(after) / static_cast<double>(before);
  if (ratio < 1.0 - flops_tolerance || ratio > 1.0 + flops_tolerance) {
    throw Error(ErrorKind::Data, "ToleranceExceeded",
                "rescaled backbone FLOPs ratio " + std::to_string(ratio) +
                    " outside tolerance " + std::to_string(flops_tolerance));
  }
  return out;
}

}  // namespace poseopt
