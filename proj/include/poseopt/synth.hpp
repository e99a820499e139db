// Copyright 2026 The poseopt Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "poseopt/paf.hpp"
#include "poseopt/tensor.hpp"

namespace poseopt {

struct GroundTruthPose {
  int person_id = 0;
  std::vector<std::pair<double, double>> joints;  // (x, y), all J present
};

struct RenderConfig {
  int height = 368;
  int width = 368;
  double gaussian_sigma = 2.0;
  double limb_width = 4.0;
  double noise_amplitude = 0.0;
  double min_person_separation = 24.0;  // pairwise over all joints across persons
  double margin = 8.0;
  uint64_t noise_seed = 0;
};

// k poses from a fixed upright template with per-person translation/scale
// jitter; rejection-resamples each person until the separation constraint
// holds. Deterministic bit-for-bit given (k, skel, cfg, seed).
// Throws Error("PlacementFailed") after 1000 rejections.
std::vector<GroundTruthPose> gen_poses(int k, const SkeletonSpec& skel, const RenderConfig& cfg,
                                       uint64_t seed);

// Heatmaps: per-joint max-over-persons Gaussian; PAFs: unit limb vectors in a
// limb_width corridor, averaged where limbs overlap. Additive uniform noise
// applied last, heatmaps clamped to [0,1].
std::pair<Tensor, Tensor> render(const std::vector<GroundTruthPose>& poses,
                                 const SkeletonSpec& skel, const RenderConfig& cfg);

std::string serialize_scene(const std::vector<GroundTruthPose>& poses, const RenderConfig& cfg);
std::vector<GroundTruthPose> parse_scene(const std::string& json_text, RenderConfig* cfg_out);

}  // namespace poseopt
