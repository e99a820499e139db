// Copyright 2026 The poseopt Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "poseopt/cost.hpp"
#include "poseopt/graph.hpp"
#include "poseopt/tensor.hpp"

namespace poseopt {

// Conv weights laid out [out_ch, in_ch/groups, k_h, k_w]; prelu slopes [C].
struct NodeWeights {
  Tensor weight;
  std::optional<Tensor> bias;
};

struct WeightStore {
  std::map<std::string, NodeWeights> entries;

  bool has(const std::string& id) const { return entries.count(id) != 0; }
};

// On-disk layout: directory of {node_id}.w.tnsr / {node_id}.b.tnsr plus
// manifest.json listing the node ids.
WeightStore load_weight_store(const std::string& dir);
void save_weight_store(const std::string& dir, const WeightStore& w);

// Deterministic random weights for every Conv2d (and prelu) node; used by the
// sensitivity scan when no trained weights are supplied, and by tests.
WeightStore random_weights(const Graph& g, uint64_t seed);

struct PruneScheme {
  enum class Kind { Unstructured, Block, Channel };
  Kind kind = Kind::Unstructured;
  int block_rows = 1;
  int block_cols = 1;

  bool operator==(const PruneScheme&) const = default;

  static PruneScheme unstructured() { return {}; }
  static PruneScheme block(int r, int c) { return {Kind::Block, r, c}; }
  static PruneScheme channel() { return {Kind::Channel, 1, 1}; }

  std::string str() const;             // "unstructured" | "block(r,c)" | "channel"
  static PruneScheme parse(const std::string& s);
};

// Boolean keep-map congruent to the weight tensor.
struct PruneMask {
  std::string node_id;
  PruneScheme scheme;
  std::vector<uint8_t> keep;  // flattened, weight layout

  size_t kept_count() const;
  Tensor as_tensor(const Tensor& like) const;  // 0/1 floats, same dims
};

struct PruneDecision {
  std::string node_id;
  PruneScheme scheme;
  double ratio = 0.0;
};

struct PrunePlan {
  std::vector<PruneDecision> decisions;
  double predicted_dense_latency = 0.0;
  double predicted_planned_latency = 0.0;
  double predicted_speedup = 1.0;

  double ratio_for(const std::string& node_id) const;
};

struct SensitivityPolicy {
  std::map<BlockTag, double> max_ratio = {
      {BlockTag::Backbone, 0.9},      {BlockTag::InitialStage, 0.7},
      {BlockTag::HeatmapBranch, 0.7}, {BlockTag::PafBranch, 0.4},
      {BlockTag::Other, 0.5}};
  std::vector<double> candidate_ratios = {0.5, 0.6, 0.7, 0.8, 0.9};  // ascending

  double cap_for(BlockTag tag) const;
};

SensitivityPolicy load_policy(const std::string& path);

struct SensitivityPoint {
  double ratio = 0.0;
  double mean_distortion = 0.0;  // mean over probes of |y_m - y_d| / |y_d|
};

// Magnitude keep-mask at the requested ratio. Ties break to the lower flat
// index. Throws Error("InvalidRatio") / Error("ShapeIncompatibleWithBlock").
PruneMask magnitude_mask(const Tensor& weights, double ratio, const PruneScheme& scheme);

// Masks every conv tagged `tag` (unstructured) at each ratio and measures the
// relative output distortion on `probes` seeded random inputs.
std::vector<SensitivityPoint> sensitivity_scan(const Graph& g, const WeightStore& w,
                                               BlockTag tag, const std::vector<double>& ratios,
                                               int probes, uint64_t seed);

struct PlanTarget {
  std::optional<double> speedup;         // dense/planned latency factor
  std::optional<double> max_distortion;  // per-block budget, needs weights
};

// Greedy latency-share-ordered search. Throws Error("TargetUnreachable")
// carrying the best achievable speedup in its message.
PrunePlan plan(const Graph& g, const WeightStore* w, const LatencyParams& lp,
               const SensitivityPolicy& policy, const PlanTarget& target);

// Zeroes masked weights; unmasked values and biases bit-identical.
WeightStore apply_plan(const WeightStore& w, const Graph& g, const PrunePlan& p);

std::string serialize_plan(const PrunePlan& p);
PrunePlan parse_plan(const std::string& json_text);

}  // namespace poseopt
