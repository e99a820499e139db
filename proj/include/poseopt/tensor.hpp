// Copyright 2026 The poseopt Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace poseopt {

// Dense row-major float tensor, last dim fastest.
struct Tensor {
  std::vector<uint32_t> dims;
  std::vector<float> data;

  Tensor() = default;
  explicit Tensor(std::vector<uint32_t> d);

  size_t size() const;

  // 3-D (C,H,W) accessors.
  float at3(uint32_t c, uint32_t y, uint32_t x) const {
    return data[(static_cast<size_t>(c) * dims[1] + y) * dims[2] + x];
  }
  float& at3(uint32_t c, uint32_t y, uint32_t x) {
    return data[(static_cast<size_t>(c) * dims[1] + y) * dims[2] + x];
  }

  bool same_shape(const Tensor& o) const { return dims == o.dims; }
};

// Binary tensor file format shared repo-wide:
// magic "TNSR", u32 LE ndim, ndim x u32 LE dims, raw f32 LE row-major.
Tensor load_tensor(const std::string& path);
void save_tensor(const std::string& path, const Tensor& t);

}  // namespace poseopt
