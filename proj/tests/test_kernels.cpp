// Copyright 2026 The poseopt Authors
// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cstring>
#include <vector>

#include "poseopt/common.hpp"
#include "poseopt/kernels.hpp"

using namespace poseopt;
namespace k = poseopt::kernels;

namespace {

struct Case {
  int in_h, in_w, icg, kh, kw, stride, pad, dil, oy, out_w;
};

void fill(std::vector<float>& v, SplitMix64& rng) {
  for (auto& x : v) x = static_cast<float>(rng.next_double(-1.0, 1.0));
}

}  // namespace

#ifdef POSEOPT_HAVE_AVX2
TEST_CASE("conv2d_row: AVX2 variant is bit-identical to scalar") {
  if (!k::cpu_has_avx2()) return;
  SplitMix64 rng(42);
  std::vector<Case> cases;
  // Deliberately include tiny rows, non-multiple-of-4 widths, and all the
  // fallback triggers (stride, dilation).
  for (int t = 0; t < 200; ++t) {
    Case c;
    c.icg = 1 + static_cast<int>(rng.next() % 4);
    c.kh = 1 + 2 * static_cast<int>(rng.next() % 3);
    c.kw = 1 + 2 * static_cast<int>(rng.next() % 3);
    c.stride = 1 + static_cast<int>(rng.next() % 2);
    c.dil = 1 + static_cast<int>(rng.next() % 3);
    c.pad = static_cast<int>(rng.next() % 4);
    c.in_h = 6 + static_cast<int>(rng.next() % 20);
    c.in_w = 6 + static_cast<int>(rng.next() % 20);
    int eff_h = c.dil * (c.kh - 1) + 1;
    int eff_w = c.dil * (c.kw - 1) + 1;
    int out_h = (c.in_h + 2 * c.pad - eff_h) / c.stride + 1;
    c.out_w = (c.in_w + 2 * c.pad - eff_w) / c.stride + 1;
    if (out_h < 1 || c.out_w < 1) continue;
    c.oy = static_cast<int>(rng.next() % static_cast<uint64_t>(out_h));
    cases.push_back(c);
  }
  REQUIRE(cases.size() > 100);

  for (const auto& c : cases) {
    std::vector<float> in(static_cast<size_t>(c.icg) * c.in_h * c.in_w);
    std::vector<float> w(static_cast<size_t>(c.icg) * c.kh * c.kw);
    fill(in, rng);
    fill(w, rng);
    std::vector<double> acc_s(c.out_w), acc_v(c.out_w);
    for (int i = 0; i < c.out_w; ++i) acc_s[i] = acc_v[i] = 0.25 * i;  // nonzero bias init

    k::ConvRowArgs a;
    a.in = in.data();
    a.in_h = c.in_h;
    a.in_w = c.in_w;
    a.w = w.data();
    a.icg = c.icg;
    a.in_c_offset = 0;
    a.kh = c.kh;
    a.kw = c.kw;
    a.stride = c.stride;
    a.pad = c.pad;
    a.dil = c.dil;
    a.oy = c.oy;
    a.out_w = c.out_w;

    a.acc = acc_s.data();
    k::conv2d_row_scalar(a);
    a.acc = acc_v.data();
    k::conv2d_row_avx2(a);

    CAPTURE(c.in_w);
    CAPTURE(c.kw);
    CAPTURE(c.stride);
    CAPTURE(c.dil);
    CHECK(std::memcmp(acc_s.data(), acc_v.data(), acc_s.size() * sizeof(double)) == 0);
  }
}

TEST_CASE("elementwise kernels: AVX2 matches scalar bit-for-bit") {
  if (!k::cpu_has_avx2()) return;
  SplitMix64 rng(7);
  for (size_t n : {0ul, 1ul, 7ul, 8ul, 9ul, 255ul, 1024ul}) {
    std::vector<float> a(n), b;
    fill(a, rng);
    if (n) {
      a[0] = 0.0f;
      a[n - 1] = -0.0f;
    }
    b = a;
    k::relu_scalar(a.data(), n);
    k::relu_avx2(b.data(), n);
    CHECK(std::memcmp(a.data(), b.data(), n * sizeof(float)) == 0);

    fill(a, rng);
    for (auto& x : a) x *= 3.0f;  // exercise both clamp sides
    b = a;
    k::hardtanh_scalar(a.data(), n);
    k::hardtanh_avx2(b.data(), n);
    CHECK(std::memcmp(a.data(), b.data(), n * sizeof(float)) == 0);
  }
}
#endif  // POSEOPT_HAVE_AVX2

TEST_CASE("force_level overrides dispatch and can be cleared") {
  k::SimdLevel before = k::active_level();
  k::force_level(k::SimdLevel::Scalar);
  CHECK(k::active_level() == k::SimdLevel::Scalar);
  k::clear_forced_level();
  CHECK(k::active_level() == before);
}

TEST_CASE("scalar relu/hardtanh semantics") {
  float v[3] = {2.0f, -3.0f, 0.5f};
  k::hardtanh_scalar(v, 3);
  CHECK(v[0] == 1.0f);
  CHECK(v[1] == -1.0f);
  CHECK(v[2] == 0.5f);
  float r[3] = {2.0f, -3.0f, 0.5f};
  k::relu_scalar(r, 3);
  CHECK(r[0] == 2.0f);
  CHECK(r[1] == 0.0f);
  CHECK(r[2] == 0.5f);
}
