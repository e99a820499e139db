// Copyright 2026 The poseopt Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "poseopt/tensor.hpp"

namespace poseopt {

// Limb i reads PAF channels (2i, 2i+1) = (x, y).
struct SkeletonSpec {
  std::vector<std::string> joint_names;
  std::vector<std::pair<int, int>> limbs;

  int num_joints() const { return static_cast<int>(joint_names.size()); }
  int num_limbs() const { return static_cast<int>(limbs.size()); }
};

SkeletonSpec load_skeleton(const std::string& path);
std::string serialize_skeleton(const SkeletonSpec& s);

struct Keypoint {
  int joint_id = 0;
  double x = 0.0, y = 0.0;  // heatmap coordinates, sub-pixel
  double score = 0.0;
};

struct Connection {
  int limb_id = 0;
  int keypoint_a = 0;  // candidate index within joint a's peak list
  int keypoint_b = 0;
  double score = 0.0;  // mean alignment, [-1,1] for unit fields
};

struct PoseInstance {
  std::vector<std::optional<Keypoint>> joints;  // J entries
  int num_parts = 0;
  double total_score = 0.0;
};

struct DecodeConfig {
  double peak_threshold = 0.1;
  int num_integral_samples = 10;
  double sample_alignment_threshold = 0.05;
  double min_aligned_fraction = 0.8;
  bool use_distance_prior = true;
  int min_parts = 4;
  double min_avg_score = 0.4;
  bool subpixel_refine = true;
};

DecodeConfig load_decode_config(const std::string& path);

// Peaks per joint channel: value > threshold and >= all 4-neighbors; equal
// plateaus keep only the lowest row-major pixel. Optional clamped quadratic
// sub-pixel refinement.
std::vector<std::vector<Keypoint>> extract_peaks(const Tensor& heatmaps,
                                                 const DecodeConfig& cfg);

struct ConnectionScore {
  double score = 0.0;
  bool valid = false;
};

// Line integral of the field along a->b, sampled uniformly with inclusive
// endpoints, bilinear interpolation. Throws Error("DegenerateSegment").
ConnectionScore connection_score(const Tensor& pafs, int limb_id, const Keypoint& a,
                                 const Keypoint& b, const DecodeConfig& cfg);

// Greedy maximum matching, score descending, ties by (a, b) index.
std::vector<Connection> match_limb(std::vector<Connection> valid_connections);

std::vector<PoseInstance> decode(const Tensor& heatmaps, const Tensor& pafs,
                                 const SkeletonSpec& skel, const DecodeConfig& cfg);

std::string serialize_poses(const std::vector<PoseInstance>& poses);

}  // namespace poseopt
