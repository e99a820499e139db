// Copyright 2026 The poseopt Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <string>

#include "poseopt/graph.hpp"
#include "poseopt/prune.hpp"
#include "poseopt/tensor.hpp"

namespace poseopt {

// Reference interpreter. Direct convolution with zero padding, double
// accumulation, float storage; deterministic bit-exact across runs.
// Throws Error("MissingWeights") / Error("ShapeMismatch").
std::map<std::string, Tensor> run(const Graph& g, const WeightStore& w,
                                  const std::map<std::string, Tensor>& inputs);

}  // namespace poseopt
