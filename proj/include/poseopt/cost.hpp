// Copyright 2026 The poseopt Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>

#include "poseopt/graph.hpp"

namespace poseopt {

struct NodeCost {
  uint64_t params = 0;
  uint64_t macs = 0;
  uint64_t flops = 0;  // 2*macs + bias adds
};

struct CostReport {
  std::map<std::string, NodeCost> per_node;
  NodeCost totals;
  std::map<std::string, TensorShape> input_shapes;
};

struct ReceptiveField {
  int64_t size = 1;
  int64_t jump = 1;
  bool operator==(const ReceptiveField&) const = default;
};

// Analytical latency model. Illustrative defaults only; calibrate from
// measurements via the CLI.
struct LatencyParams {
  double time_per_mac = 1e-9;        // seconds per dense MAC
  double per_node_overhead = 0.0;    // seconds per op launch
  double sparse_inefficiency = 1.0;  // e >= 1: sparse MACs retire slower
  double sparse_overhead = 0.0;      // seconds added to any pruned layer
  std::map<std::string, double> unfriendly_op_penalty;  // op/activation kind -> s
};

LatencyParams load_latency_params(const std::string& path);
std::string serialize_latency_params(const LatencyParams& lp);

struct LatencyBreakdown {
  double total = 0.0;
  std::map<std::string, double> per_node;
};

// Forward decl; full definition in prune.hpp.
struct PrunePlan;

NodeCost conv_cost(const OpNode& node, const TensorShape& out_shape);
CostReport graph_cost(const Graph& g);

// Receptive field at the node's output; multi-path graphs take the max over
// paths. Throws Error("UnreachableNode") when no input reaches the node.
ReceptiveField receptive_field(const Graph& g, const std::string& node_id);

// Penalty lookup key for a node: activation fn name, "dilated_conv" for
// dilation > 1, otherwise the lowercase op kind.
std::string penalty_key(const OpNode& node);

// Dense (p=0):  macs*t + overhead + penalty
// Sparse (p>0): macs*(1-p)*t*e + overhead + penalty + sparse_overhead
double layer_latency(const OpNode& node, double prune_ratio, const LatencyParams& lp,
                     uint64_t macs);

// Closed-form break-even ratio; nullopt = NotPrunableProfitably (p* >= 1).
std::optional<double> breakeven_ratio(const OpNode& node, const LatencyParams& lp,
                                      uint64_t macs);

LatencyBreakdown graph_latency(const Graph& g, const PrunePlan* plan, const LatencyParams& lp);

}  // namespace poseopt
