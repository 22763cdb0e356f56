#include "panoos/training/losses.hpp"

#include <string>

#include "panoos/numerics/errors.hpp"
#include "panoos/numerics/ops.hpp"
#include "panoos/synthdata/scene.hpp"
#include "panoos/training/matching.hpp"

namespace panoos::train {

namespace {

Var zero_on(Var like) { return like.tape()->constant(Tensor::scalar(0.0)); }

Var one_minus(Var x) { return ops::add_scalar(ops::scale(x, -1.0), 1.0); }

}  // namespace

GroundTruth make_ground_truth(const data::LabelMap& labels, std::size_t stride, std::size_t classes) {
  if (stride == 0 || labels.height % stride != 0 || labels.width % stride != 0) {
    throw DimensionError("label map " + std::to_string(labels.height) + "x" + std::to_string(labels.width) +
                         " is not divisible by stride " + std::to_string(stride));
  }
  GroundTruth gt;
  gt.height = labels.height / stride;
  gt.width = labels.width / stride;
  const std::size_t pixels = gt.height * gt.width;
  gt.labels.resize(pixels);
  std::vector<bool> present(classes, false);
  for (std::size_t y = 0; y < gt.height; ++y) {
    for (std::size_t x = 0; x < gt.width; ++x) {
      const std::uint8_t l = labels.at(y * stride + stride / 2, x * stride + stride / 2);
      const std::size_t p = y * gt.width + x;
      gt.labels[p] = l;
      if (l == data::kIgnoreLabel) continue;
      gt.valid_pixels.push_back(p);
      if (l == data::kOutlierLabel) {
        gt.outlier_pixels.push_back(p);
      } else if (l < classes) {
        present[l] = true;
      } else {
        throw ContractError("label " + std::to_string(l) + " is not a known class");
      }
    }
  }
  for (std::size_t c = 0; c < classes; ++c) {
    if (present[c]) gt.classes.push_back(c);
  }
  if (!gt.classes.empty()) {
    gt.masks = Tensor({gt.classes.size(), pixels}, 0.0);
    for (std::size_t g = 0; g < gt.classes.size(); ++g) {
      for (std::size_t p = 0; p < pixels; ++p) {
        if (gt.labels[p] == gt.classes[g]) gt.masks[g * pixels + p] = 1.0;
      }
    }
  }
  return gt;
}

Var loss_mask(Var masks, const MatchAssignment& match, const GroundTruth& gt, const LossWeights& w) {
  const std::size_t G = gt.segments();
  if (G == 0 || gt.valid_pixels.empty()) return zero_on(masks);
  const Shape& s = masks.shape();
  const std::size_t pixels = gt.height * gt.width;
  if (s.size() != 3 || s[1] * s[2] != pixels) {
    throw DimensionError("masks " + shape_str(s) + " do not match the ground-truth grid");
  }
  Var m = ops::gather_cols(ops::gather_rows(ops::reshape(masks, {s[0], pixels}), match.query_of_segment),
                           gt.valid_pixels);
  const std::size_t V = gt.valid_pixels.size();
  Tensor target({G, V});
  for (std::size_t g = 0; g < G; ++g) {
    for (std::size_t i = 0; i < V; ++i) target[g * V + i] = gt.masks[g * pixels + gt.valid_pixels[i]];
  }
  Var t = masks.tape()->constant(target);

  Var mc = ops::clamp(m, kProbClamp, 1.0 - kProbClamp);
  Var ll = ops::add(ops::mul(t, ops::log(mc)), ops::mul(one_minus(t), ops::log(one_minus(mc))));
  Var bce = ops::scale(ops::mean(ll), -1.0);

  Var inter = ops::sum_lastdim(ops::mul(m, t));
  Var denom = ops::add_scalar(ops::add(ops::sum_lastdim(m), ops::sum_lastdim(t)), 1.0);
  Var dice = ops::mean(one_minus(ops::div(ops::add_scalar(ops::scale(inter, 2.0), 1.0), denom)));
  return ops::add(ops::scale(bce, w.bce), ops::scale(dice, w.dice));
}

Var loss_cls(Var probs, const MatchAssignment& match, const GroundTruth& gt) {
  const std::size_t G = gt.segments();
  if (G == 0) return zero_on(probs);
  const std::size_t K = probs.shape()[1];
  std::vector<std::size_t> flat(G);
  for (std::size_t g = 0; g < G; ++g) flat[g] = match.query_of_segment[g] * K + gt.classes[g];
  Var p = ops::clamp(ops::gather_elements(probs, flat), kLogClamp, 1.0);
  return ops::scale(ops::mean(ops::log(p)), -1.0);
}

Var loss_rba_oe(Var logits, const std::vector<std::size_t>& outlier_pixels) {
  if (outlier_pixels.empty()) return zero_on(logits);
  const Shape& s = logits.shape();
  const std::size_t K = s[0];
  Var flat = ops::reshape(logits, {K, logits.size() / K});
  Var hit = ops::relu(ops::gather_cols(flat, outlier_pixels));
  return ops::scale(ops::sum(ops::square(hit)), 1.0 / static_cast<double>(outlier_pixels.size()));
}

LossTerms total_loss_closed(const model::ForwardVars& fwd, const MatchAssignment& match, const GroundTruth& gt,
                            const LossWeights& w) {
  Var mask = loss_mask(fwd.masks, match, gt, w);
  Var cls = loss_cls(fwd.probs, match, gt);
  LossTerms t;
  t.total = ops::add(mask, ops::scale(cls, w.cls));
  t.mask = mask.value().item();
  t.cls = cls.value().item();
  return t;
}

LossTerms total_loss_oe(const model::ForwardVars& fwd, const MatchAssignment& match, const GroundTruth& gt,
                        const bpdl::PixelPartition& partition, const bpdl::BpdlConfig& cfg, const LossWeights& w) {
  LossTerms t = total_loss_closed(fwd, match, gt, w);
  Var rba = loss_rba_oe(fwd.logits, gt.outlier_pixels);
  Var b = bpdl::loss_bpdl(partition, fwd.prompts.all, cfg);
  t.total = ops::add(ops::add(t.total, rba), ops::scale(b, cfg.lambda));
  t.rba = rba.value().item();
  t.bpdl = b.value().item();
  return t;
}

}  // namespace panoos::train
