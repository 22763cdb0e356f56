#pragma once

#include <cstddef>
#include <limits>
#include <vector>

#include "panoos/numerics/tensor.hpp"
#include "panoos/training/losses.hpp"

namespace panoos::train {

inline constexpr std::size_t kNoObject = std::numeric_limits<std::size_t>::max();

struct MatchAssignment {
  std::vector<std::size_t> query_of_segment;  // one per ground-truth segment
  std::vector<std::size_t> segment_of_query;  // kNoObject for unmatched queries
};

/// Minimum-cost assignment of every row to a distinct column of a
/// rows x cols cost matrix (rows <= cols). Returns the column of each row.
std::vector<std::size_t> hungarian(const std::vector<std::vector<double>>& cost);

/// Segment-by-query cost lambda_cls * (-P[n,k]) + lambda_bce * BCE + lambda_dice * Dice
/// over the valid pixels. probs [N, K], masks [N, h, w] at the ground-truth grid.
std::vector<std::vector<double>> match_cost(const Tensor& probs, const Tensor& masks, const GroundTruth& gt,
                                            const LossWeights& w);

MatchAssignment hungarian_match(const Tensor& probs, const Tensor& masks, const GroundTruth& gt,
                                const LossWeights& w);

}  // namespace panoos::train
