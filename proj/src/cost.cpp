// Copyright 2026 The poseopt Authors
// SPDX-License-Identifier: Apache-2.0
#include "poseopt/cost.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "poseopt/common.hpp"
#include "poseopt/prune.hpp"

namespace poseopt {

NodeCost conv_cost(const OpNode& node, const TensorShape& out_shape) {
  const ConvAttrs& a = node.conv();
  uint64_t weight_params = static_cast<uint64_t>(a.kernel_h) * a.kernel_w *
                           (a.in_channels / a.groups) * a.out_channels;
  uint64_t spatial = static_cast<uint64_t>(out_shape.dims[1]) * out_shape.dims[2];
  NodeCost c;
  c.params = weight_params + (a.has_bias ? static_cast<uint64_t>(a.out_channels) : 0);
  c.macs = weight_params * spatial;
  uint64_t bias_adds = a.has_bias ? static_cast<uint64_t>(a.out_channels) * spatial : 0;
  c.flops = 2 * c.macs + bias_adds;
  return c;
}

CostReport graph_cost(const Graph& g) {
  CostReport r;
  auto shapes = infer_shapes(g);
  for (const auto& in : g.inputs) r.input_shapes[in.name] = in.shape;
  for (const auto& n : g.nodes) {
    NodeCost c;
    if (n.kind == OpKind::Conv2d) c = conv_cost(n, shapes.at(n.id));
    r.per_node[n.id] = c;
    r.totals.params += c.params;
    r.totals.macs += c.macs;
    r.totals.flops += c.flops;
  }
  return r;
}

ReceptiveField receptive_field(const Graph& g, const std::string& node_id) {
  if (!g.find_node(node_id))
    throw data_error("UnreachableNode", "no node '" + node_id + "' in graph");
  std::map<std::string, ReceptiveField> rf;
  for (const auto& in : g.inputs) rf[in.name] = ReceptiveField{1, 1};
  for (size_t idx : topo_order(g)) {
    const OpNode& n = g.nodes[idx];
    ReceptiveField acc{0, 0};
    bool any = false;
    for (const auto& ref : n.inputs) {
      auto it = rf.find(ref);
      if (it == rf.end()) continue;
      // max over paths
      acc.size = std::max(acc.size, it->second.size);
      acc.jump = std::max(acc.jump, it->second.jump);
      any = true;
    }
    if (!any) continue;
    switch (n.kind) {
      case OpKind::Conv2d: {
        const auto& a = n.conv();
        int64_t k_eff = static_cast<int64_t>(a.dilation) * (std::max(a.kernel_h, a.kernel_w) - 1) + 1;
        acc.size += (k_eff - 1) * acc.jump;
        acc.jump *= a.stride;
        break;
      }
      case OpKind::MaxPool: {
        const auto& a = n.pool();
        acc.size += (static_cast<int64_t>(a.kernel) - 1) * acc.jump;
        acc.jump *= a.stride;
        break;
      }
      default:
        break;  // elementwise/concat/upsample leave the field unchanged
    }
    rf[n.id] = acc;
  }
  auto it = rf.find(node_id);
  if (it == rf.end())
    throw data_error("UnreachableNode", "node '" + node_id + "' unreachable from any input");
  return it->second;
}

std::string penalty_key(const OpNode& node) {
  if (node.kind == OpKind::Activation) return to_string(node.act().fn);
  if (node.kind == OpKind::Conv2d && node.conv().dilation > 1) return "dilated_conv";
  std::string s = to_string(node.kind);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

static double penalty_for(const OpNode& node, const LatencyParams& lp) {
  auto it = lp.unfriendly_op_penalty.find(penalty_key(node));
  return it == lp.unfriendly_op_penalty.end() ? 0.0 : it->second;
}

double layer_latency(const OpNode& node, double prune_ratio, const LatencyParams& lp,
                     uint64_t macs) {
  if (prune_ratio < 0.0 || prune_ratio > 1.0)
    throw data_error("InvalidRatio", "prune ratio must lie in [0,1]");
  double work = static_cast<double>(macs) * lp.time_per_mac;
  double t = lp.per_node_overhead + penalty_for(node, lp);
  if (prune_ratio == 0.0) return t + work;
  return t + work * (1.0 - prune_ratio) * lp.sparse_inefficiency + lp.sparse_overhead;
}

std::optional<double> breakeven_ratio(const OpNode& node, const LatencyParams& lp,
                                      uint64_t macs) {
  (void)node;  // penalty and overhead cancel between dense and sparse forms
  double work = static_cast<double>(macs) * lp.time_per_mac;
  if (work <= 0.0) return std::nullopt;
  double p = 1.0 - (work - lp.sparse_overhead) / (work * lp.sparse_inefficiency);
  if (p >= 1.0) return std::nullopt;
  return std::max(0.0, p);
}

LatencyBreakdown graph_latency(const Graph& g, const PrunePlan* plan, const LatencyParams& lp) {
  CostReport costs = graph_cost(g);
  if (plan) {
    for (const auto& d : plan->decisions)
      if (!g.find_node(d.node_id))
        throw data_error("UnknownNodeInPlan", "plan references unknown node '" + d.node_id + "'");
  }
  LatencyBreakdown out;
  for (const auto& n : g.nodes) {
    double ratio = plan ? plan->ratio_for(n.id) : 0.0;
    double t = layer_latency(n, ratio, lp, costs.per_node.at(n.id).macs);
    out.per_node[n.id] = t;
    out.total += t;
  }
  return out;
}

// ---------------------------------------------------------------------------
// LatencyParams JSON

LatencyParams load_latency_params(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw data_error("FileError", "cannot open calibration file: " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw data_error("SchemaError", std::string("malformed calibration JSON: ") + e.what());
  }
  LatencyParams lp;
  lp.time_per_mac = j.at("time_per_mac").get<double>();
  lp.per_node_overhead = j.at("per_node_overhead").get<double>();
  lp.sparse_inefficiency = j.at("sparse_inefficiency").get<double>();
  lp.sparse_overhead = j.at("sparse_overhead").get<double>();
  if (j.contains("unfriendly_op_penalty"))
    for (auto it = j.at("unfriendly_op_penalty").begin(); it != j.at("unfriendly_op_penalty").end(); ++it)
      lp.unfriendly_op_penalty[it.key()] = it.value().get<double>();
  if (lp.time_per_mac < 0 || lp.per_node_overhead < 0 || lp.sparse_overhead < 0 ||
      lp.sparse_inefficiency < 1.0)
    throw data_error("SchemaError", "calibration constants out of range");
  for (const auto& [k, v] : lp.unfriendly_op_penalty)
    if (v < 0) throw data_error("SchemaError", "negative penalty for '" + k + "'");
  return lp;
}

std::string serialize_latency_params(const LatencyParams& lp) {
  nlohmann::ordered_json j;
  j["time_per_mac"] = lp.time_per_mac;
  j["per_node_overhead"] = lp.per_node_overhead;
  j["sparse_inefficiency"] = lp.sparse_inefficiency;
  j["sparse_overhead"] = lp.sparse_overhead;
  j["unfriendly_op_penalty"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : lp.unfriendly_op_penalty) j["unfriendly_op_penalty"][k] = v;
  return j.dump(2) + "\n";
}

}  // namespace poseopt
