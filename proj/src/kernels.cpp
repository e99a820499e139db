// Copyright 2026 The poseopt Authors
// SPDX-License-Identifier: Apache-2.0
#include "poseopt/kernels.hpp"

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <optional>

namespace poseopt::kernels {

const char* to_string(SimdLevel l) { return l == SimdLevel::Scalar ? "scalar" : "avx2"; }

bool cpu_has_avx2() {
#if defined(POSEOPT_HAVE_AVX2)
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

namespace {

std::optional<SimdLevel>& forced() {
  static std::optional<SimdLevel> f;
  return f;
}

SimdLevel resolve_from_env() {
  const char* env = std::getenv("POSEOPT_SIMD");
  if (env && std::strcmp(env, "scalar") == 0) return SimdLevel::Scalar;
  if (env && std::strcmp(env, "avx2") == 0)
    return cpu_has_avx2() ? SimdLevel::Avx2 : SimdLevel::Scalar;
  return cpu_has_avx2() ? SimdLevel::Avx2 : SimdLevel::Scalar;  // auto
}

}  // namespace

SimdLevel active_level() {
  if (forced()) return *forced();
  static SimdLevel resolved = resolve_from_env();
  return resolved;
}

SimdLevel force_level(SimdLevel l) {
  if (l == SimdLevel::Avx2 && !cpu_has_avx2()) l = SimdLevel::Scalar;
  forced() = l;
  return l;
}

void clear_forced_level() { forced().reset(); }

void conv2d_row_scalar(const ConvRowArgs& a) {
  for (int ox = 0; ox < a.out_w; ++ox) {
    double acc = a.acc[ox];
    for (int ic = 0; ic < a.icg; ++ic) {
      const float* in_c = a.in + static_cast<size_t>(a.in_c_offset + ic) * a.in_h * a.in_w;
      const float* w_c = a.w + static_cast<size_t>(ic) * a.kh * a.kw;
      for (int ky = 0; ky < a.kh; ++ky) {
        int iy = a.oy * a.stride - a.pad + ky * a.dil;
        if (iy < 0 || iy >= a.in_h) continue;
        const float* in_row = in_c + static_cast<size_t>(iy) * a.in_w;
        const float* w_row = w_c + static_cast<size_t>(ky) * a.kw;
        for (int kx = 0; kx < a.kw; ++kx) {
          int ix = ox * a.stride - a.pad + kx * a.dil;
          if (ix < 0 || ix >= a.in_w) continue;
          acc += static_cast<double>(w_row[kx]) * static_cast<double>(in_row[ix]);
        }
      }
    }
    a.acc[ox] = acc;
  }
}

void relu_scalar(float* x, size_t n) {
  // max(0, x), not max(x, 0): matches maxps, which returns its second operand
  // for equal inputs, so relu(-0.0f) is +0.0f in both variants.
  for (size_t i = 0; i < n; ++i) x[i] = std::max(0.0f, x[i]);
}

void hardtanh_scalar(float* x, size_t n) {
  for (size_t i = 0; i < n; ++i) x[i] = std::min(std::max(x[i], -1.0f), 1.0f);
}

void conv2d_row(const ConvRowArgs& a) {
#ifdef POSEOPT_HAVE_AVX2
  if (active_level() == SimdLevel::Avx2) {
    conv2d_row_avx2(a);
    return;
  }
#endif
  conv2d_row_scalar(a);
}

void relu(float* x, size_t n) {
#ifdef POSEOPT_HAVE_AVX2
  if (active_level() == SimdLevel::Avx2) {
    relu_avx2(x, n);
    return;
  }
#endif
  relu_scalar(x, n);
}

void hardtanh(float* x, size_t n) {
#ifdef POSEOPT_HAVE_AVX2
  if (active_level() == SimdLevel::Avx2) {
    hardtanh_avx2(x, n);
    return;
  }
#endif
  hardtanh_scalar(x, n);
}

}  // namespace poseopt::kernels
