// Copyright 2026 The poseopt Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "poseopt/graph.hpp"

namespace poseopt::testing {

inline std::string fixture(const std::string& name) {
  return std::string(POSEOPT_FIXTURE_DIR) + "/" + name;
}

inline OpNode conv_node(const std::string& id, const std::string& input, int cin, int cout,
                        int k = 3, int stride = 1, int pad = -1, int dil = 1, int groups = 1,
                        bool bias = false, BlockTag tag = BlockTag::Backbone) {
  if (pad < 0) pad = dil * (k - 1) / 2;
  ConvAttrs a;
  a.kernel_h = k;
  a.kernel_w = k;
  a.stride = stride;
  a.padding = pad;
  a.dilation = dil;
  a.in_channels = cin;
  a.out_channels = cout;
  a.groups = groups;
  a.has_bias = bias;
  return OpNode{id, OpKind::Conv2d, a, {input}, tag};
}

inline OpNode act_node(const std::string& id, const std::string& input, ActFn fn = ActFn::Relu,
                       BlockTag tag = BlockTag::Backbone) {
  return OpNode{id, OpKind::Activation, ActAttrs{fn}, {input}, tag};
}

// Linear chain of convs fed by a single input "x".
inline Graph chain_graph(std::vector<OpNode> nodes, TensorShape in_shape) {
  Graph g;
  g.name = "test";
  g.inputs = {{"x", std::move(in_shape)}};
  g.outputs = {nodes.back().id};
  g.nodes = std::move(nodes);
  return g;
}

}  // namespace poseopt::testing
