#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>

#include "panoos/numerics/tensor.hpp"

namespace panoos::testutil {

struct Checksum {
  double sum = 0.0;
  double sum_sq = 0.0;
  // sum of v_i * (i mod 7 + 1); sensitive to where values sit.
  double weighted = 0.0;
};

inline Checksum checksum(std::span<const double> values) {
  Checksum c;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double v = values[i];
    c.sum += v;
    c.sum_sq += v * v;
    c.weighted += v * static_cast<double>(i % 7 + 1);
  }
  return c;
}

inline Checksum checksum(const Tensor& t) { return checksum(t.values()); }

// FNV-1a over raw bytes; used for integer rasters where bit equality is expected.
inline std::uint64_t fnv1a(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline bool close_rel(double a, double b, double rel) {
  const double scale = std::max({1.0, std::abs(a), std::abs(b)});
  return std::abs(a - b) <= rel * scale;
}

}  // namespace panoos::testutil
