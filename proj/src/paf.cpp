// Copyright 2026 The poseopt Authors
// SPDX-License-Identifier: Apache-2.0
#include "poseopt/paf.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "poseopt/common.hpp"

namespace poseopt {

SkeletonSpec load_skeleton(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw data_error("FileError", "cannot open skeleton file: " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw data_error("SchemaError", std::string("malformed skeleton JSON: ") + e.what());
  }
  SkeletonSpec s;
  for (const auto& n : j.at("joints")) s.joint_names.push_back(n.get<std::string>());
  for (const auto& l : j.at("limbs")) {
    int a = l.at(0).get<int>(), b = l.at(1).get<int>();
    if (a < 0 || b < 0 || a >= s.num_joints() || b >= s.num_joints() || a == b)
      throw data_error("SchemaError", "limb joint index out of range");
    s.limbs.emplace_back(a, b);
  }
  return s;
}

std::string serialize_skeleton(const SkeletonSpec& s) {
  nlohmann::ordered_json j;
  j["joints"] = s.joint_names;
  j["limbs"] = nlohmann::ordered_json::array();
  for (auto [a, b] : s.limbs) j["limbs"].push_back({a, b});
  return j.dump(2) + "\n";
}

DecodeConfig load_decode_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw data_error("FileError", "cannot open decode config: " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw data_error("SchemaError", std::string("malformed decode config: ") + e.what());
  }
  DecodeConfig c;
  c.peak_threshold = j.value("peak_threshold", c.peak_threshold);
  c.num_integral_samples = j.value("num_integral_samples", c.num_integral_samples);
  c.sample_alignment_threshold = j.value("sample_alignment_threshold", c.sample_alignment_threshold);
  c.min_aligned_fraction = j.value("min_aligned_fraction", c.min_aligned_fraction);
  c.use_distance_prior = j.value("use_distance_prior", c.use_distance_prior);
  c.min_parts = j.value("min_parts", c.min_parts);
  c.min_avg_score = j.value("min_avg_score", c.min_avg_score);
  c.subpixel_refine = j.value("subpixel_refine", c.subpixel_refine);
  if (c.num_integral_samples < 2)
    throw data_error("SchemaError", "num_integral_samples must be >= 2");
  return c;
}

// ---------------------------------------------------------------------------
// Peaks

std::vector<std::vector<Keypoint>> extract_peaks(const Tensor& heatmaps,
                                                 const DecodeConfig& cfg) {
  int j_count = static_cast<int>(heatmaps.dims[0]);
  int h = static_cast<int>(heatmaps.dims[1]);
  int w = static_cast<int>(heatmaps.dims[2]);
  std::vector<std::vector<Keypoint>> out(j_count);

  std::vector<uint8_t> cand(static_cast<size_t>(h) * w);
  std::vector<uint8_t> visited(static_cast<size_t>(h) * w);
  for (int j = 0; j < j_count; ++j) {
    const float* ch = heatmaps.data.data() + static_cast<size_t>(j) * h * w;
    std::fill(cand.begin(), cand.end(), uint8_t{0});
    std::fill(visited.begin(), visited.end(), uint8_t{0});
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        float v = ch[y * w + x];
        if (!(v > cfg.peak_threshold)) continue;
        if (x > 0 && ch[y * w + x - 1] > v) continue;
        if (x + 1 < w && ch[y * w + x + 1] > v) continue;
        if (y > 0 && ch[(y - 1) * w + x] > v) continue;
        if (y + 1 < h && ch[(y + 1) * w + x] > v) continue;
        cand[static_cast<size_t>(y) * w + x] = 1;
      }
    }
    // Equal-valued plateaus collapse to their lowest row-major pixel.
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        size_t idx = static_cast<size_t>(y) * w + x;
        if (!cand[idx] || visited[idx]) continue;
        float v = ch[idx];
        std::deque<std::pair<int, int>> queue{{y, x}};
        visited[idx] = 1;
        while (!queue.empty()) {
          auto [cy, cx] = queue.front();
          queue.pop_front();
          const int dy[4] = {0, 0, -1, 1};
          const int dx[4] = {-1, 1, 0, 0};
          for (int d = 0; d < 4; ++d) {
            int ny = cy + dy[d], nx = cx + dx[d];
            if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
            size_t nidx = static_cast<size_t>(ny) * w + nx;
            if (cand[nidx] && !visited[nidx] && ch[nidx] == v) {
              visited[nidx] = 1;
              queue.emplace_back(ny, nx);
            }
          }
        }
        // (y, x) is the lowest row-major member of its plateau by scan order
        Keypoint kp;
        kp.joint_id = j;
        kp.x = x;
        kp.y = y;
        kp.score = v;
        if (cfg.subpixel_refine) {
          auto refine = [&](double l, double c, double r) {
            double den = l - 2.0 * c + r;
            if (den >= 0.0) return 0.0;  // not a strict local quadratic max
            return std::min(std::max(0.5 * (l - r) / den, -0.5), 0.5);
          };
          if (x > 0 && x + 1 < w)
            kp.x += refine(ch[y * w + x - 1], v, ch[y * w + x + 1]);
          if (y > 0 && y + 1 < h)
            kp.y += refine(ch[(y - 1) * w + x], v, ch[(y + 1) * w + x]);
        }
        out[j].push_back(kp);
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Connections

namespace {

double bilinear(const float* ch, int h, int w, double x, double y) {
  x = std::min(std::max(x, 0.0), static_cast<double>(w - 1));
  y = std::min(std::max(y, 0.0), static_cast<double>(h - 1));
  int x0 = std::min(static_cast<int>(std::floor(x)), w - 2 >= 0 ? w - 2 : 0);
  int y0 = std::min(static_cast<int>(std::floor(y)), h - 2 >= 0 ? h - 2 : 0);
  double fx = x - x0, fy = y - y0;
  double v00 = ch[y0 * w + x0];
  double v01 = ch[y0 * w + std::min(x0 + 1, w - 1)];
  double v10 = ch[std::min(y0 + 1, h - 1) * w + x0];
  double v11 = ch[std::min(y0 + 1, h - 1) * w + std::min(x0 + 1, w - 1)];
  return (1 - fy) * ((1 - fx) * v00 + fx * v01) + fy * ((1 - fx) * v10 + fx * v11);
}

}  // namespace

ConnectionScore connection_score(const Tensor& pafs, int limb_id, const Keypoint& a,
                                 const Keypoint& b, const DecodeConfig& cfg) {
  int h = static_cast<int>(pafs.dims[1]);
  int w = static_cast<int>(pafs.dims[2]);
  const float* px = pafs.data.data() + static_cast<size_t>(2 * limb_id) * h * w;
  const float* py = pafs.data.data() + static_cast<size_t>(2 * limb_id + 1) * h * w;

  double dx = b.x - a.x, dy = b.y - a.y;
  double dist = std::sqrt(dx * dx + dy * dy);
  if (dist < 1e-6) throw data_error("DegenerateSegment", "limb endpoints coincide");
  double ex = dx / dist, ey = dy / dist;

  int n = cfg.num_integral_samples;
  int aligned = 0;
  double sum = 0.0;
  for (int s = 0; s < n; ++s) {
    double t = static_cast<double>(s) / (n - 1);  // inclusive endpoints
    double sx = a.x + t * dx, sy = a.y + t * dy;
    double dot = bilinear(px, h, w, sx, sy) * ex + bilinear(py, h, w, sx, sy) * ey;
    sum += dot;
    if (dot > cfg.sample_alignment_threshold) ++aligned;
  }
  double prior = cfg.use_distance_prior ? std::min(0.5 * h / dist - 1.0, 0.0) : 0.0;
  ConnectionScore cs;
  cs.score = sum / n + prior;
  cs.valid = (static_cast<double>(aligned) / n >= cfg.min_aligned_fraction) && (cs.score > 0.0);
  return cs;
}

std::vector<Connection> match_limb(std::vector<Connection> valid_connections) {
  std::sort(valid_connections.begin(), valid_connections.end(),
            [](const Connection& a, const Connection& b) {
              if (a.score != b.score) return a.score > b.score;
              if (a.keypoint_a != b.keypoint_a) return a.keypoint_a < b.keypoint_a;
              return a.keypoint_b < b.keypoint_b;
            });
  std::vector<Connection> accepted;
  std::vector<int> used_a, used_b;
  for (const Connection& c : valid_connections) {
    if (std::count(used_a.begin(), used_a.end(), c.keypoint_a)) continue;
    if (std::count(used_b.begin(), used_b.end(), c.keypoint_b)) continue;
    accepted.push_back(c);
    used_a.push_back(c.keypoint_a);
    used_b.push_back(c.keypoint_b);
  }
  return accepted;
}

// ---------------------------------------------------------------------------
// Assembly

std::vector<PoseInstance> decode(const Tensor& heatmaps, const Tensor& pafs,
                                 const SkeletonSpec& skel, const DecodeConfig& cfg) {
  if (static_cast<int>(heatmaps.dims[0]) != skel.num_joints())
    throw data_error("ShapeMismatch", "heatmap channel count does not match skeleton");
  if (static_cast<int>(pafs.dims[0]) != 2 * skel.num_limbs())
    throw data_error("ShapeMismatch", "PAF channel count does not match skeleton");

  auto peaks = extract_peaks(heatmaps, cfg);

  // Working instances hold candidate indices per joint (-1 = empty).
  struct Subset {
    std::vector<int> joint_cand;
    int parts = 0;
    double score = 0.0;
  };
  std::vector<Subset> subsets;
  int j_count = skel.num_joints();

  auto find_subset = [&](int joint, int cand) {
    for (size_t i = 0; i < subsets.size(); ++i)
      if (subsets[i].joint_cand[joint] == cand) return static_cast<int>(i);
    return -1;
  };

  for (int l = 0; l < skel.num_limbs(); ++l) {
    auto [ja, jb] = skel.limbs[l];
    std::vector<Connection> valid;
    for (size_t ia = 0; ia < peaks[ja].size(); ++ia) {
      for (size_t ib = 0; ib < peaks[jb].size(); ++ib) {
        const Keypoint& ka = peaks[ja][ia];
        const Keypoint& kb = peaks[jb][ib];
        if (std::fabs(ka.x - kb.x) < 1e-6 && std::fabs(ka.y - kb.y) < 1e-6) continue;
        ConnectionScore cs = connection_score(pafs, l, ka, kb, cfg);
        if (cs.valid) valid.push_back({l, static_cast<int>(ia), static_cast<int>(ib), cs.score});
      }
    }
    for (const Connection& c : match_limb(std::move(valid))) {
      int sa = find_subset(ja, c.keypoint_a);
      int sb = find_subset(jb, c.keypoint_b);
      if (sa < 0 && sb < 0) {
        Subset s;
        s.joint_cand.assign(j_count, -1);
        s.joint_cand[ja] = c.keypoint_a;
        s.joint_cand[jb] = c.keypoint_b;
        s.parts = 2;
        s.score = peaks[ja][c.keypoint_a].score + peaks[jb][c.keypoint_b].score + c.score;
        subsets.push_back(std::move(s));
      } else if (sa >= 0 && sb >= 0) {
        if (sa == sb) {
          subsets[sa].score += c.score;  // redundant limb inside one instance
          continue;
        }
        // merge only when the joint sets are disjoint
        bool disjoint = true;
        for (int j = 0; j < j_count; ++j)
          if (subsets[sa].joint_cand[j] >= 0 && subsets[sb].joint_cand[j] >= 0) {
            disjoint = false;
            break;
          }
        if (!disjoint) continue;
        Subset& dst = subsets[sa];
        Subset& src = subsets[sb];
        for (int j = 0; j < j_count; ++j)
          if (src.joint_cand[j] >= 0) dst.joint_cand[j] = src.joint_cand[j];
        dst.parts += src.parts;
        dst.score += src.score + c.score;
        subsets.erase(subsets.begin() + sb);
      } else {
        int si = sa >= 0 ? sa : sb;
        int joint = sa >= 0 ? jb : ja;
        int cand = sa >= 0 ? c.keypoint_b : c.keypoint_a;
        Subset& s = subsets[si];
        if (s.joint_cand[joint] >= 0) continue;  // slot taken by another candidate
        s.joint_cand[joint] = cand;
        s.parts += 1;
        s.score += peaks[joint][cand].score + c.score;
      }
    }
  }

  std::vector<PoseInstance> out;
  for (const Subset& s : subsets) {
    if (s.parts < cfg.min_parts) continue;
    if (s.score / s.parts < cfg.min_avg_score) continue;
    PoseInstance inst;
    inst.joints.assign(j_count, std::nullopt);
    for (int j = 0; j < j_count; ++j)
      if (s.joint_cand[j] >= 0) inst.joints[j] = peaks[j][s.joint_cand[j]];
    inst.num_parts = s.parts;
    inst.total_score = s.score;
    out.push_back(std::move(inst));
  }
  return out;
}

std::string serialize_poses(const std::vector<PoseInstance>& poses) {
  nlohmann::ordered_json j;
  j["poses"] = nlohmann::ordered_json::array();
  for (const auto& p : poses) {
    nlohmann::ordered_json jp;
    jp["joints"] = nlohmann::ordered_json::array();
    for (const auto& kp : p.joints) {
      if (kp)
        jp["joints"].push_back({{"id", kp->joint_id}, {"x", kp->x}, {"y", kp->y},
                                {"score", kp->score}});
      else
        jp["joints"].push_back(nullptr);
    }
    jp["num_parts"] = p.num_parts;
    jp["score"] = p.total_score;
    j["poses"].push_back(std::move(jp));
  }
  return j.dump(2) + "\n";
}

}  // namespace poseopt
