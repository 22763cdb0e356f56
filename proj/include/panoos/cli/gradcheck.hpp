#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace panoos::cli {

inline constexpr double kGradTolerance = 1e-4;

struct GradRow {
  std::string loss;
  double max_rel_error = 0.0;
  std::size_t coordinates = 0;
};

/// Central finite differences (h = 1e-5) against reverse-mode gradients on a
/// random instance with N=4 queries, K=3 classes and size x size pixels.
/// Leaf losses are checked on free embedding, prompt, mask and class
/// inputs; total_loss_oe is checked end to end through a small model.
std::vector<GradRow> gradient_suite(std::uint64_t seed, std::size_t size);

}  // namespace panoos::cli
