// Copyright 2026 The poseopt Authors
// SPDX-License-Identifier: Apache-2.0
#include "poseopt/synth.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <json.hpp>

#include "poseopt/common.hpp"

namespace poseopt {

namespace {

// Canonical upright template, origin at body center, y grows downward.
const std::map<std::string, std::pair<double, double>>& coco_template() {
  static const std::map<std::string, std::pair<double, double>> t = {
      {"nose", {0, -82}},     {"neck", {0, -55}},
      {"r_shoulder", {-26, -55}}, {"r_elbow", {-36, -22}}, {"r_wrist", {-44, 10}},
      {"l_shoulder", {26, -55}},  {"l_elbow", {36, -22}},  {"l_wrist", {44, 10}},
      {"r_hip", {-16, 2}},    {"r_knee", {-20, 42}},   {"r_ankle", {-24, 82}},
      {"l_hip", {16, 2}},     {"l_knee", {20, 42}},    {"l_ankle", {24, 82}},
      {"r_eye", {-7, -89}},   {"l_eye", {7, -89}},
      {"r_ear", {-16, -84}},  {"l_ear", {16, -84}}};
  return t;
}

std::vector<std::pair<double, double>> template_for(const SkeletonSpec& skel) {
  std::vector<std::pair<double, double>> pts;
  const auto& named = coco_template();
  bool all_known = !skel.joint_names.empty();
  for (const auto& name : skel.joint_names)
    if (!named.count(name)) { all_known = false; break; }
  if (all_known) {
    for (const auto& name : skel.joint_names) pts.push_back(named.at(name));
    return pts;
  }
  // Fallback for unknown skeletons: alternating zigzag down the body axis.
  int j_count = skel.num_joints();
  for (int j = 0; j < j_count; ++j) {
    double x = (j % 2 ? 1.0 : -1.0) * (20.0 + 10.0 * (j / 2));
    double y = j_count > 1 ? -80.0 + 160.0 * j / (j_count - 1) : 0.0;
    pts.emplace_back(x, y);
  }
  return pts;
}

}  // namespace

std::vector<GroundTruthPose> gen_poses(int k, const SkeletonSpec& skel, const RenderConfig& cfg,
                                       uint64_t seed) {
  if (k < 0) throw data_error("InvalidArgument", "person count must be >= 0");
  auto tmpl = template_for(skel);
  double ext_x = 0.0, ext_y = 0.0;
  for (auto [x, y] : tmpl) {
    ext_x = std::max(ext_x, std::fabs(x));
    ext_y = std::max(ext_y, std::fabs(y));
  }

  SplitMix64 rng(seed);
  std::vector<GroundTruthPose> poses;
  for (int p = 0; p < k; ++p) {
    bool placed = false;
    for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
      double scale = 0.5 + 0.3 * rng.next_double();
      double lo_x = cfg.margin + ext_x * scale;
      double hi_x = cfg.width - 1 - cfg.margin - ext_x * scale;
      double lo_y = cfg.margin + ext_y * scale;
      double hi_y = cfg.height - 1 - cfg.margin - ext_y * scale;
      if (hi_x < lo_x || hi_y < lo_y) continue;
      double cx = rng.next_double(lo_x, hi_x);
      double cy = rng.next_double(lo_y, hi_y);
      GroundTruthPose pose;
      pose.person_id = p;
      for (auto [tx, ty] : tmpl) pose.joints.emplace_back(cx + tx * scale, cy + ty * scale);
      bool clear = true;
      for (const auto& other : poses) {
        for (auto [x1, y1] : pose.joints) {
          for (auto [x2, y2] : other.joints) {
            double dx = x1 - x2, dy = y1 - y2;
            if (dx * dx + dy * dy < cfg.min_person_separation * cfg.min_person_separation) {
              clear = false;
              break;
            }
          }
          if (!clear) break;
        }
        if (!clear) break;
      }
      if (clear) {
        poses.push_back(std::move(pose));
        placed = true;
      }
    }
    if (!placed)
      throw data_error("PlacementFailed",
                       "could not place person " + std::to_string(p) + " after 1000 rejections");
  }
  return poses;
}

std::pair<Tensor, Tensor> render(const std::vector<GroundTruthPose>& poses,
                                 const SkeletonSpec& skel, const RenderConfig& cfg) {
  int j_count = skel.num_joints();
  int l_count = skel.num_limbs();
  int h = cfg.height, w = cfg.width;
  Tensor heat({static_cast<uint32_t>(j_count), static_cast<uint32_t>(h), static_cast<uint32_t>(w)});
  Tensor paf({static_cast<uint32_t>(2 * l_count), static_cast<uint32_t>(h),
              static_cast<uint32_t>(w)});

  // Gaussians are evaluated in a 6-sigma window; the tail beyond is below
  // float resolution of the stored values.
  int win = static_cast<int>(std::ceil(6.0 * cfg.gaussian_sigma));
  double inv2s2 = 1.0 / (2.0 * cfg.gaussian_sigma * cfg.gaussian_sigma);
  for (int j = 0; j < j_count; ++j) {
    for (const auto& pose : poses) {
      auto [px, py] = pose.joints[j];
      int x0 = std::max(0, static_cast<int>(std::floor(px)) - win);
      int x1 = std::min(w - 1, static_cast<int>(std::ceil(px)) + win);
      int y0 = std::max(0, static_cast<int>(std::floor(py)) - win);
      int y1 = std::min(h - 1, static_cast<int>(std::ceil(py)) + win);
      for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
          double d2 = (x - px) * (x - px) + (y - py) * (y - py);
          float v = static_cast<float>(std::exp(-d2 * inv2s2));
          float& cell = heat.at3(j, y, x);
          cell = std::max(cell, v);
        }
      }
    }
  }

  // PAFs: sum unit vectors plus a hit count per pixel, divide at the end.
  std::vector<std::vector<double>> sum_x(l_count, std::vector<double>(static_cast<size_t>(h) * w));
  std::vector<std::vector<double>> sum_y(l_count, std::vector<double>(static_cast<size_t>(h) * w));
  std::vector<std::vector<int>> cnt(l_count, std::vector<int>(static_cast<size_t>(h) * w));
  for (int l = 0; l < l_count; ++l) {
    auto [ja, jb] = skel.limbs[l];
    for (const auto& pose : poses) {
      auto [ax, ay] = pose.joints[ja];
      auto [bx, by] = pose.joints[jb];
      double dx = bx - ax, dy = by - ay;
      double len = std::sqrt(dx * dx + dy * dy);
      if (len < 1e-9) continue;
      double ex = dx / len, ey = dy / len;
      int x0 = std::max(0, static_cast<int>(std::floor(std::min(ax, bx) - cfg.limb_width)));
      int x1 = std::min(w - 1, static_cast<int>(std::ceil(std::max(ax, bx) + cfg.limb_width)));
      int y0 = std::max(0, static_cast<int>(std::floor(std::min(ay, by) - cfg.limb_width)));
      int y1 = std::min(h - 1, static_cast<int>(std::ceil(std::max(ay, by) + cfg.limb_width)));
      for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
          // distance from pixel center to the segment
          double t = ((x - ax) * dx + (y - ay) * dy) / (len * len);
          t = std::min(std::max(t, 0.0), 1.0);
          double qx = ax + t * dx - x, qy = ay + t * dy - y;
          if (qx * qx + qy * qy > cfg.limb_width * cfg.limb_width) continue;
          size_t idx = static_cast<size_t>(y) * w + x;
          sum_x[l][idx] += ex;
          sum_y[l][idx] += ey;
          cnt[l][idx] += 1;
        }
      }
    }
  }
  for (int l = 0; l < l_count; ++l) {
    for (size_t idx = 0; idx < static_cast<size_t>(h) * w; ++idx) {
      if (cnt[l][idx] == 0) continue;
      paf.data[static_cast<size_t>(2 * l) * h * w + idx] =
          static_cast<float>(sum_x[l][idx] / cnt[l][idx]);
      paf.data[static_cast<size_t>(2 * l + 1) * h * w + idx] =
          static_cast<float>(sum_y[l][idx] / cnt[l][idx]);
    }
  }

  if (cfg.noise_amplitude > 0.0) {
    SplitMix64 rng(cfg.noise_seed);
    for (float& v : heat.data) {
      double noisy = v + rng.next_double(-cfg.noise_amplitude, cfg.noise_amplitude);
      v = static_cast<float>(std::min(std::max(noisy, 0.0), 1.0));
    }
    for (float& v : paf.data)
      v = static_cast<float>(v + rng.next_double(-cfg.noise_amplitude, cfg.noise_amplitude));
  }
  return {std::move(heat), std::move(paf)};
}

std::string serialize_scene(const std::vector<GroundTruthPose>& poses, const RenderConfig& cfg) {
  nlohmann::ordered_json j;
  j["config"] = {{"height", cfg.height},
                 {"width", cfg.width},
                 {"gaussian_sigma", cfg.gaussian_sigma},
                 {"limb_width", cfg.limb_width},
                 {"noise_amplitude", cfg.noise_amplitude},
                 {"min_person_separation", cfg.min_person_separation},
                 {"margin", cfg.margin},
                 {"noise_seed", cfg.noise_seed}};
  j["persons"] = nlohmann::ordered_json::array();
  for (const auto& p : poses) {
    nlohmann::ordered_json jp;
    jp["id"] = p.person_id;
    jp["joints"] = nlohmann::ordered_json::array();
    for (auto [x, y] : p.joints) jp["joints"].push_back({x, y});
    j["persons"].push_back(std::move(jp));
  }
  return j.dump(2) + "\n";
}

std::vector<GroundTruthPose> parse_scene(const std::string& json_text, RenderConfig* cfg_out) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw data_error("SchemaError", std::string("malformed scene JSON: ") + e.what());
  }
  if (cfg_out && j.contains("config")) {
    const auto& jc = j.at("config");
    cfg_out->height = jc.value("height", cfg_out->height);
    cfg_out->width = jc.value("width", cfg_out->width);
    cfg_out->gaussian_sigma = jc.value("gaussian_sigma", cfg_out->gaussian_sigma);
    cfg_out->limb_width = jc.value("limb_width", cfg_out->limb_width);
    cfg_out->noise_amplitude = jc.value("noise_amplitude", cfg_out->noise_amplitude);
    cfg_out->min_person_separation =
        jc.value("min_person_separation", cfg_out->min_person_separation);
    cfg_out->margin = jc.value("margin", cfg_out->margin);
    cfg_out->noise_seed = jc.value("noise_seed", cfg_out->noise_seed);
  }
  std::vector<GroundTruthPose> poses;
  for (const auto& jp : j.at("persons")) {
    GroundTruthPose p;
    p.person_id = jp.at("id").get<int>();
    for (const auto& jj : jp.at("joints"))
      p.joints.emplace_back(jj.at(0).get<double>(), jj.at(1).get<double>());
    poses.push_back(std::move(p));
  }
  return poses;
}

}  // namespace poseopt
