// Copyright 2026 The poseopt Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace poseopt {

// Per-sample shape, channels-first. Spatial tensors are (C,H,W), 1-D is (C).
struct TensorShape {
  std::vector<int64_t> dims;

  bool operator==(const TensorShape&) const = default;
  int64_t numel() const;
  std::string str() const;
};

enum class OpKind { Conv2d, Activation, Add, Concat, Upsample, MaxPool };
enum class ActFn { Relu, Prelu, Swish, Hardtanh, Sigmoid };
enum class UpsampleMode { Nearest, Bilinear };
enum class BlockTag { Backbone, InitialStage, HeatmapBranch, PafBranch, Other };

const char* to_string(OpKind k);
const char* to_string(ActFn f);
const char* to_string(UpsampleMode m);
const char* to_string(BlockTag t);
OpKind op_kind_from_string(const std::string& s);
ActFn act_fn_from_string(const std::string& s);
UpsampleMode upsample_mode_from_string(const std::string& s);
BlockTag block_tag_from_string(const std::string& s);

struct ConvAttrs {
  int kernel_h = 1;
  int kernel_w = 1;
  int stride = 1;
  int padding = 0;
  int dilation = 1;
  int in_channels = 0;
  int out_channels = 0;
  int groups = 1;
  bool has_bias = false;

  bool operator==(const ConvAttrs&) const = default;
};

struct ActAttrs {
  ActFn fn = ActFn::Relu;
  bool operator==(const ActAttrs&) const = default;
};

struct UpsampleAttrs {
  int scale = 2;
  UpsampleMode mode = UpsampleMode::Nearest;
  bool operator==(const UpsampleAttrs&) const = default;
};

struct PoolAttrs {
  int kernel = 2;
  int stride = 2;
  int padding = 0;
  bool operator==(const PoolAttrs&) const = default;
};

struct NoAttrs {
  bool operator==(const NoAttrs&) const = default;
};

struct OpNode {
  std::string id;
  OpKind kind = OpKind::Conv2d;
  std::variant<NoAttrs, ConvAttrs, ActAttrs, UpsampleAttrs, PoolAttrs> attrs;
  std::vector<std::string> inputs;  // node ids or graph input names
  BlockTag block_tag = BlockTag::Other;

  bool operator==(const OpNode&) const = default;

  const ConvAttrs& conv() const { return std::get<ConvAttrs>(attrs); }
  const ActAttrs& act() const { return std::get<ActAttrs>(attrs); }
  const UpsampleAttrs& upsample() const { return std::get<UpsampleAttrs>(attrs); }
  const PoolAttrs& pool() const { return std::get<PoolAttrs>(attrs); }
};

struct GraphInput {
  std::string name;
  TensorShape shape;
  bool operator==(const GraphInput&) const = default;
};

struct Graph {
  std::string name;
  std::vector<GraphInput> inputs;
  std::vector<OpNode> nodes;
  std::vector<std::string> outputs;

  bool operator==(const Graph&) const = default;

  const OpNode* find_node(const std::string& id) const;
  const GraphInput* find_input(const std::string& name) const;
};

struct Violation {
  std::string kind;  // CycleDetected, ShapeMismatch, DuplicateId, ...
  std::string node_id;
  std::string message;
};

// Backbone builder stage description.
enum class BlockKind { Plain3x3, Bottleneck };

struct Stage {
  int num_blocks = 1;
  int width = 1;
  BlockKind block_kind = BlockKind::Plain3x3;
  int stride_first = 1;
  bool operator==(const Stage&) const = default;
};

struct StageSpec {
  std::vector<Stage> stages;
  bool operator==(const StageSpec&) const = default;
};

// Throws Error("SchemaError"|"DuplicateId"|"DanglingEdge", ...).
Graph parse_graph(const std::string& json_text);
Graph load_graph(const std::string& path);
std::string serialize_graph(const Graph& g);

// Every invariant violation as a value; empty = valid.
std::vector<Violation> validate(const Graph& g);

// Topological order of node indices; throws on cycle / dangling edge.
std::vector<size_t> topo_order(const Graph& g);

// Deterministic shape per node id (also includes graph inputs by name).
// Throws Error("ShapeMismatch", ...) with the offending node id.
std::map<std::string, TensorShape> infer_shapes(const Graph& g);

// Chain of stages; plain3x3 block = 3x3 conv + relu, bottleneck =
// 1x1 reduce / 3x3 / 1x1 expand with residual Add. All nodes tagged Backbone.
// Throws Error("InvalidSpec", ...).
Graph build_backbone(const StageSpec& spec, int in_channels);

// Number of Conv2d nodes, the depth figure the backbone builder reports.
int conv_layer_count(const Graph& g);

StageSpec parse_stage_spec(const std::string& json_text);
StageSpec load_stage_spec(const std::string& path);
std::string serialize_stage_spec(const StageSpec& spec);

}  // namespace poseopt
