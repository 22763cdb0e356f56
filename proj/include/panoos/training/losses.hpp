#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "panoos/bpdl/bpdl.hpp"
#include "panoos/decoder/model.hpp"
#include "panoos/numerics/tape.hpp"
#include "panoos/synthdata/raster.hpp"

namespace panoos::train {

struct MatchAssignment;

struct LossWeights {
  double bce = 5.0;
  double dice = 5.0;
  double cls = 2.0;
};

inline constexpr double kProbClamp = 1e-7;
inline constexpr double kLogClamp = 1e-12;

/// Ground truth on the mask grid: one binary segment per inlier class present,
/// in ascending class order.
struct GroundTruth {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> labels;         // h*w label codes on the mask grid
  std::vector<std::size_t> classes;         // class (0..K-1) of each segment
  Tensor masks;                             // [G, h*w] in {0,1}; empty when G = 0
  std::vector<std::size_t> valid_pixels;    // non-ignore pixels
  std::vector<std::size_t> outlier_pixels;  // pixels labelled 254

  std::size_t segments() const { return classes.size(); }
};

/// Samples the label at the centre of every stride x stride block.
GroundTruth make_ground_truth(const data::LabelMap& labels, std::size_t stride, std::size_t classes);

struct LossTerms {
  Var total;
  double mask = 0.0;
  double cls = 0.0;
  double rba = 0.0;
  double bpdl = 0.0;
};

/// w.bce * mean BCE + w.dice * mean Dice over matched (query, segment) pairs,
/// restricted to valid pixels. Zero when there are no segments.
Var loss_mask(Var masks, const MatchAssignment& match, const GroundTruth& gt, const LossWeights& w);

/// Mean -log P[q, k] over matched queries; unmatched queries do not contribute.
Var loss_cls(Var probs, const MatchAssignment& match, const GroundTruth& gt);

/// Mean over outlier pixels of sum_k max(S_k, 0)^2; zero without outliers.
Var loss_rba_oe(Var logits, const std::vector<std::size_t>& outlier_pixels);

LossTerms total_loss_closed(const model::ForwardVars& fwd, const MatchAssignment& match, const GroundTruth& gt,
                            const LossWeights& w);

/// Closed-set loss + RbA outlier loss + lambda * BPDL.
LossTerms total_loss_oe(const model::ForwardVars& fwd, const MatchAssignment& match, const GroundTruth& gt,
                        const bpdl::PixelPartition& partition, const bpdl::BpdlConfig& cfg, const LossWeights& w);

}  // namespace panoos::train
