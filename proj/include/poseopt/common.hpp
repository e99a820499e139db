// Copyright 2026 The poseopt Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace poseopt {

// Error category drives the CLI exit code.
enum class ErrorKind {
  Usage,             // exit 1
  Data,              // exit 2: schema/validation/shape problems
  TargetUnreachable, // exit 3
};

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, std::string code, const std::string& msg)
      : std::runtime_error(msg), kind_(kind), code_(std::move(code)) {}

  ErrorKind kind() const { return kind_; }
  const std::string& code() const { return code_; }

private:
  ErrorKind kind_;
  std::string code_;
};

inline Error data_error(std::string code, const std::string& msg) {
  return Error(ErrorKind::Data, std::move(code), msg);
}

// SplitMix64. Fully specified so seeded outputs are portable bit-for-bit.
class SplitMix64 {
public:
  explicit SplitMix64(uint64_t seed) : state_(seed) {}

  uint64_t next() {
    state_ += 0x9E3779B97F4A7C15ULL;
    uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1), 53-bit mantissa.
  double next_double() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Uniform in [lo, hi).
  double next_double(double lo, double hi) { return lo + (hi - lo) * next_double(); }

private:
  uint64_t state_;
};

}  // namespace poseopt
