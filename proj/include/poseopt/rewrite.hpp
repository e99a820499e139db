// Copyright 2026 The poseopt Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "poseopt/cost.hpp"
#include "poseopt/graph.hpp"

namespace poseopt {

struct RewriteEntry {
  std::string pass_name;
  std::string original_node_id;
  std::vector<std::string> replacement_node_ids;  // empty when skipped
  ReceptiveField rf_before;
  ReceptiveField rf_after;
  uint64_t macs_before = 0;
  uint64_t macs_after = 0;
  bool skipped = false;
  std::string skip_reason;
};

struct RewriteLog {
  std::vector<RewriteEntry> entries;

  void append(const RewriteLog& other) {
    entries.insert(entries.end(), other.entries.begin(), other.entries.end());
  }
  size_t replaced_count() const;
};

std::string serialize_rewrite_log(const RewriteLog& log);

// Each eligible kxk conv (stride 1, groups 1, odd k > max_kernel) becomes a
// chain of (k_eff-1)/2 3x3 convs at the original out_channels width.
// Ineligible large-kernel convs are skipped and logged.
std::pair<Graph, RewriteLog> replace_large_kernels(const Graph& g, int max_kernel = 3);

// Swap every Activation node's fn from -> to; everything else untouched.
std::pair<Graph, RewriteLog> replace_activations(const Graph& g, ActFn from_fn, ActFn to_fn);

// Replace dilated stride-1 convs by chains of standard 3x3 convs with the
// same receptive field.
std::pair<Graph, RewriteLog> dedilate(const Graph& g);

// num_blocks' = round(num_blocks*m); width' rounded to a multiple so the
// rebuilt backbone FLOPs stay within flops_tolerance of the original.
// Throws Error("ToleranceExceeded") carrying the achieved ratio.
StageSpec depth_rescale(const StageSpec& spec, double depth_multiplier,
                        int rounding_multiple = 8, double flops_tolerance = 0.15);

}  // namespace poseopt
