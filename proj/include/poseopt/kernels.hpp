// Copyright 2026 The poseopt Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>

namespace poseopt::kernels {

enum class SimdLevel { Scalar, Avx2 };

const char* to_string(SimdLevel l);

// Level resolution: POSEOPT_SIMD env (scalar|avx2|auto, default auto) then
// CPU capability. force_level overrides both (tests use it for the
// scalar-vs-SIMD equivalence checks); pass-through of the resolved level.
SimdLevel active_level();
SimdLevel force_level(SimdLevel l);
void clear_forced_level();
bool cpu_has_avx2();

// One output row of a direct 2-D convolution for a single output channel.
// Accumulates w*x products in double into acc[0..out_w), strictly in
// (ic, ky, kx) order per output element; zero padding contributes nothing.
struct ConvRowArgs {
  const float* in = nullptr;  // (C,H,W) base pointer
  int in_h = 0, in_w = 0;
  const float* w = nullptr;   // [icg][kh][kw] slice for this output channel
  int icg = 0;                // input channels in this group slice
  int in_c_offset = 0;        // first input channel of the group
  int kh = 0, kw = 0;
  int stride = 1, pad = 0, dil = 1;
  int oy = 0;
  int out_w = 0;
  double* acc = nullptr;      // caller-initialized (bias or zero)
};

void conv2d_row_scalar(const ConvRowArgs& a);
#ifdef POSEOPT_HAVE_AVX2
void conv2d_row_avx2(const ConvRowArgs& a);
#endif
void conv2d_row(const ConvRowArgs& a);  // dispatched

// Elementwise activation kernels (bit-exact across variants: pure min/max).
void relu_scalar(float* x, size_t n);
void hardtanh_scalar(float* x, size_t n);
#ifdef POSEOPT_HAVE_AVX2
void relu_avx2(float* x, size_t n);
void hardtanh_avx2(float* x, size_t n);
#endif
void relu(float* x, size_t n);
void hardtanh(float* x, size_t n);

}  // namespace poseopt::kernels
