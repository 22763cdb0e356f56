#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "panoos/numerics/tape.hpp"

// Prompt-distribution losses over projected prompt rows
// [T_0 (void), T_1..T_K, P_in, P_out] of shape [K+3, C_m] and per-pixel
// embeddings of the same width. Every loss is a scalar Var on the tape of its
// inputs.
namespace panoos::bpdl {

inline constexpr double kNormGuard = 1e-12;

/// Labelled inlier embeddings and outlier embeddings. An empty set is an
/// invalid Var (count 0).
struct PixelPartition {
  Var inliers;                       // [N_i, C_m]
  std::vector<std::size_t> labels;   // k_i in 1..K, one per inlier row
  Var outliers;                      // [N_o, C_m]

  std::size_t inlier_count() const { return inliers.valid() ? inliers.shape()[0] : 0; }
  std::size_t outlier_count() const { return outliers.valid() ? outliers.shape()[0] : 0; }
};

struct BpdlConfig {
  double s = 1.0;
  double d = 1.0;
  double alpha = 0.1;
  double lambda = 0.01;

  void validate() const;
};

/// Number of known classes K for a prompt block [K+3, C_m].
std::size_t class_count(Var prompts);

Var loss_intra(const PixelPartition& part, Var prompts);
Var loss_sep(Var prompts, double s);
Var loss_ori(Var prompts);
Var loss_inter(Var prompts, double s);
Var loss_pixel(const PixelPartition& part, Var prompts, double s);
Var loss_ind(Var prompts);
Var loss_in_dir(Var prompts);
Var loss_inlier(Var prompts, double alpha);
Var loss_outlier(const PixelPartition& part, Var prompts, double d);
Var loss_distri(const PixelPartition& part, Var prompts, const BpdlConfig& cfg);
Var loss_bpdl(const PixelPartition& part, Var prompts, const BpdlConfig& cfg);

/// Index of the nearest other class prototype (squared distance, first
/// index on ties) for each of T_0..T_K.
std::vector<std::size_t> nearest_negatives(const Tensor& prompts);

/// Splits the columns of fm [C_m, h, w] by a label map of the same h x w:
/// scene class c becomes prototype label c+1, 254 goes to the outliers,
/// 255 is skipped. Each set keeps at most `max_pixels` uniformly drawn rows.
PixelPartition build_partition(Var fm, std::span<const std::uint8_t> labels, std::size_t classes,
                               std::size_t max_pixels, std::uint64_t seed);

}  // namespace panoos::bpdl
