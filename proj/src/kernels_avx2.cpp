// Copyright 2026 The poseopt Authors
// SPDX-License-Identifier: Apache-2.0
//
// AVX2 variants. Bit-exact with the scalar reference: conv lanes are four
// consecutive output columns, each performing the same (ic, ky, kx)
// mul-then-add double sequence as the scalar loop (no FMA contraction).
#ifdef POSEOPT_HAVE_AVX2

#include <algorithm>
#include <immintrin.h>

#include "poseopt/kernels.hpp"

namespace poseopt::kernels {

void conv2d_row_avx2(const ConvRowArgs& a) {
  // Vector path covers unit stride/dilation; interior columns only, so every
  // kx tap of a quad is a plain contiguous 4-float load.
  if (a.stride != 1 || a.dil != 1 || a.out_w < 8) {
    conv2d_row_scalar(a);
    return;
  }
  int lo = a.pad;                                  // first ox with ox - pad >= 0
  int hi = a.in_w - (a.kw - 1) + a.pad - 4;        // last quad start, inclusive
  hi = std::min(hi, a.out_w - 4);
  if (hi < lo) {
    conv2d_row_scalar(a);
    return;
  }

  auto scalar_span = [&](int x0, int x1) {  // [x0, x1), same order as the scalar kernel
    for (int sx = x0; sx < x1; ++sx) {
      double acc = a.acc[sx];
      for (int ic = 0; ic < a.icg; ++ic) {
        const float* in_c = a.in + static_cast<size_t>(a.in_c_offset + ic) * a.in_h * a.in_w;
        const float* w_c = a.w + static_cast<size_t>(ic) * a.kh * a.kw;
        for (int ky = 0; ky < a.kh; ++ky) {
          int iy = a.oy - a.pad + ky;
          if (iy < 0 || iy >= a.in_h) continue;
          const float* in_row = in_c + static_cast<size_t>(iy) * a.in_w;
          const float* w_row = w_c + static_cast<size_t>(ky) * a.kw;
          for (int kx = 0; kx < a.kw; ++kx) {
            int ix = sx - a.pad + kx;
            if (ix < 0 || ix >= a.in_w) continue;
            acc += static_cast<double>(w_row[kx]) * static_cast<double>(in_row[ix]);
          }
        }
      }
      a.acc[sx] = acc;
    }
  };

  scalar_span(0, lo);
  int ox = lo;
  for (; ox + 4 <= hi + 4; ox += 4) {
    __m256d acc = _mm256_loadu_pd(a.acc + ox);
    for (int ic = 0; ic < a.icg; ++ic) {
      const float* in_c = a.in + static_cast<size_t>(a.in_c_offset + ic) * a.in_h * a.in_w;
      const float* w_c = a.w + static_cast<size_t>(ic) * a.kh * a.kw;
      for (int ky = 0; ky < a.kh; ++ky) {
        int iy = a.oy - a.pad + ky;
        if (iy < 0 || iy >= a.in_h) continue;
        const float* in_row = in_c + static_cast<size_t>(iy) * a.in_w;
        const float* w_row = w_c + static_cast<size_t>(ky) * a.kw;
        for (int kx = 0; kx < a.kw; ++kx) {
          __m256d wv = _mm256_set1_pd(static_cast<double>(w_row[kx]));
          __m256d xv = _mm256_cvtps_pd(_mm_loadu_ps(in_row + ox - a.pad + kx));
          acc = _mm256_add_pd(acc, _mm256_mul_pd(wv, xv));
        }
      }
    }
    _mm256_storeu_pd(a.acc + ox, acc);
  }
  scalar_span(ox, a.out_w);
}

void relu_avx2(float* x, size_t n) {
  __m256 zero = _mm256_setzero_ps();
  size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(x + i, _mm256_max_ps(_mm256_loadu_ps(x + i), zero));
  relu_scalar(x + i, n - i);
}

void hardtanh_avx2(float* x, size_t n) {
  __m256 lo = _mm256_set1_ps(-1.0f);
  __m256 hi = _mm256_set1_ps(1.0f);
  size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(x + i, _mm256_min_ps(_mm256_max_ps(_mm256_loadu_ps(x + i), lo), hi));
  hardtanh_scalar(x + i, n - i);
}

}  // namespace poseopt::kernels

#endif  // POSEOPT_HAVE_AVX2
