// Copyright 2026 The poseopt Authors
// SPDX-License-Identifier: Apache-2.0
#include "poseopt/tensor.hpp"

#include <cstring>
#include <fstream>

#include "poseopt/common.hpp"

namespace poseopt {

Tensor::Tensor(std::vector<uint32_t> d) : dims(std::move(d)) {
  size_t n = 1;
  for (uint32_t e : dims) n *= e;
  data.assign(n, 0.0f);
}

size_t Tensor::size() const {
  size_t n = 1;
  for (uint32_t e : dims) n *= e;
  return n;
}

namespace {

constexpr char kMagic[4] = {'T', 'N', 'S', 'R'};

uint32_t read_u32le(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

void write_u32le(std::ostream& out, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  out.write(reinterpret_cast<char*>(b), 4);
}

}  // namespace

Tensor load_tensor(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("FileError", "cannot open tensor file: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw data_error("FormatError", "bad tensor magic in " + path);
  uint32_t ndim = read_u32le(in);
  if (ndim == 0 || ndim > 8)
    throw data_error("FormatError", "bad tensor rank in " + path);
  Tensor t;
  t.dims.resize(ndim);
  size_t n = 1;
  for (uint32_t i = 0; i < ndim; ++i) {
    t.dims[i] = read_u32le(in);
    n *= t.dims[i];
  }
  t.data.resize(n);
  for (size_t i = 0; i < n; ++i) {
    uint32_t bits = read_u32le(in);
    float f;
    std::memcpy(&f, &bits, 4);
    t.data[i] = f;
  }
  if (!in) throw data_error("FormatError", "truncated tensor file: " + path);
  return t;
}

void save_tensor(const std::string& path, const Tensor& t) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw data_error("FileError", "cannot write tensor file: " + path);
  out.write(kMagic, 4);
  write_u32le(out, static_cast<uint32_t>(t.dims.size()));
  for (uint32_t d : t.dims) write_u32le(out, d);
  for (float f : t.data) {
    uint32_t bits;
    std::memcpy(&bits, &f, 4);
    write_u32le(out, bits);
  }
}

}  // namespace poseopt
