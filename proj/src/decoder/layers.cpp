#include "panoos/decoder/layers.hpp"

#include <cmath>

#include "panoos/numerics/errors.hpp"
#include "panoos/numerics/ops.hpp"

namespace panoos::model {

Var linear(Tape& tape, Var x, const Linear& p) {
  Var y = ops::matmul(x, tape.param(*p.weight));
  return p.bias ? ops::add_row_broadcast(y, tape.param(*p.bias)) : y;
}

Var norm(Tape& tape, Var x, const NormParams& p) {
  return ops::layer_norm(x, tape.param(*p.gain), tape.param(*p.bias));
}

Var ffn(Tape& tape, Var x, const FfnParams& p) {
  return linear(tape, ops::relu(linear(tape, x, p.hidden)), p.output);
}

Var attend(Var q, Var k, Var v, const Tensor* mask) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(q.value().cols()));
  Var logits = ops::scale(ops::matmul(q, ops::transpose(k)), scale);
  Var weights = mask ? ops::masked_softmax(logits, *mask, -0.5 * kMaskLarge) : ops::softmax_lastdim(logits);
  return ops::matmul(weights, v);
}

Var masked_attention(Tape& tape, Var queries, Var f4, const Tensor& mask, const AttentionParams& p) {
  Var q = linear(tape, queries, p.query);
  Var k = linear(tape, f4, p.key);
  Var v = linear(tape, f4, p.value);
  return linear(tape, attend(q, k, v, &mask), p.output);
}

Var prompt_cross_attention(Tape& tape, Var x, Var prompts, const AttentionParams& p) {
  Var q = linear(tape, x, p.query);
  Var k = linear(tape, prompts, p.key);
  Var v = linear(tape, prompts, p.value);
  return linear(tape, attend(q, k, v, nullptr), p.output);
}

Var self_adaptive_correction(Tape& tape, Var x, const CorrectionParams& p) {
  Var gate = ops::tanh(tape.param(*p.gate));
  return ops::add(x, ops::scale_by(ffn(tape, norm(tape, x, p.norm), p.ffn), gate));
}

Var pra_layer(Tape& tape, Var x, Var pos, Var f4, const Tensor& mask, Var prompts, const PraLayerParams& p,
              PraOptions options) {
  x = norm(tape, ops::add(x, masked_attention(tape, ops::add(x, pos), f4, mask, p.masked)), p.masked_norm);
  if (options.prompt_attention) {
    x = norm(tape, ops::add(x, prompt_cross_attention(tape, x, prompts, p.prompt)), p.prompt_norm);
  }
  if (options.adaptive_correction) x = self_adaptive_correction(tape, x, p.correction);

  Var qk = ops::add(x, pos);
  Var sa = attend(linear(tape, qk, p.self.query), linear(tape, qk, p.self.key), linear(tape, x, p.self.value), nullptr);
  x = norm(tape, ops::add(x, linear(tape, sa, p.self.output)), p.self_norm);
  return norm(tape, ops::add(x, ffn(tape, x, p.ffn)), p.ffn_norm);
}

Tensor build_attention_mask(const Tensor& m_prev) {
  if (m_prev.rank() != 3) throw DimensionError("attention mask source must be [N,h,w], got " + shape_str(m_prev.shape()));
  const std::size_t n = m_prev.dim(0), hw = m_prev.dim(1) * m_prev.dim(2);
  Tensor mask({n, hw});
  for (std::size_t i = 0; i < n * hw; ++i) mask[i] = m_prev[i] >= 0.5 ? 0.0 : -kMaskLarge;
  return mask;
}

PromptSet project_prompts(Var raw, Var projection) {
  const Tensor& r = raw.value();
  if (r.rank() != 2 || r.dim(0) < 4) {
    throw DimensionError("raw prompt embeddings must be [(K+3) x D_text] with K >= 1, got " + shape_str(r.shape()));
  }
  PromptSet set;
  set.all = ops::matmul(raw, projection);
  const std::size_t rows = r.dim(0);
  std::vector<std::size_t> cls(rows - 2), dist = {rows - 2, rows - 1};
  for (std::size_t i = 0; i + 2 < rows; ++i) cls[i] = i;
  set.class_prototypes = ops::gather_rows(set.all, cls);
  set.dist_prototypes = ops::gather_rows(set.all, dist);
  return set;
}

namespace {

// W [out, in] applied to channel-major x [in, h, w], plus per-channel bias.
Var conv1x1(Tape& tape, Var x, const Linear& p) {
  const Shape& s = x.shape();
  Var flat = ops::reshape(x, {s[0], s[1] * s[2]});
  Var y = ops::add_col_broadcast(ops::matmul(tape.param(*p.weight), flat), tape.param(*p.bias));
  return ops::reshape(y, {p.weight->value.dim(0), s[1], s[2]});
}

}  // namespace

DecodedPixels pixel_decode(Tape& tape, const FeatureBundle& features, const PixelDecoderParams& p) {
  features.validate();
  if (p.lateral.size() != features.levels.size()) {
    throw DimensionError("pixel decoder has " + std::to_string(p.lateral.size()) + " lateral projections for " +
                         std::to_string(features.levels.size()) + " feature levels");
  }
  const std::size_t base = features.strides.front();
  Var fused;
  Var coarsest;
  for (std::size_t l = 0; l < features.levels.size(); ++l) {
    Var proj = conv1x1(tape, tape.constant(features.levels[l]), p.lateral[l]);
    if (l + 1 == features.levels.size()) coarsest = proj;
    Var up = upsample(proj, features.strides[l] / base);
    fused = fused.valid() ? ops::add(fused, up) : up;
  }
  DecodedPixels out;
  out.fm = conv1x1(tape, fused, p.output);
  const Shape& cs = coarsest.shape();
  out.f4 = ops::transpose(ops::reshape(coarsest, {cs[0], cs[1] * cs[2]}));
  out.stride = base;
  return out;
}

Var upsample(Var x, std::size_t factor) { return factor == 1 ? x : ops::upsample_nearest(x, factor); }

Var predict_masks(Tape& tape, Var queries, Var fm, const MaskMlpParams& p) {
  const Shape& s = fm.shape();
  if (s.size() != 3) throw DimensionError("pixel embeddings must be [C,h,w], got " + shape_str(s));
  Var e = ops::relu(linear(tape, queries, p.first));
  e = ops::relu(linear(tape, e, p.second));
  e = linear(tape, e, p.third);
  if (e.value().cols() != s[0]) {
    throw DimensionError("mask embedding " + shape_str(e.shape()) + " does not match pixel embeddings " + shape_str(s));
  }
  Var logits = ops::matmul(e, ops::reshape(fm, {s[0], s[1] * s[2]}));
  return ops::reshape(ops::sigmoid(logits), {queries.shape()[0], s[1], s[2]});
}

Var predict_classes(Var queries, Var class_weight) {
  return ops::softmax_lastdim(ops::matmul(queries, ops::transpose(class_weight)));
}

Var aggregate_logits(Var probs, Var masks) {
  const Shape& ms = masks.shape();
  if (ms.size() != 3 || probs.shape().size() != 2 || probs.shape()[0] != ms[0]) {
    throw DimensionError("aggregate_logits: P " + shape_str(probs.shape()) + " vs M " + shape_str(ms));
  }
  Var s = ops::matmul(ops::transpose(probs), ops::reshape(masks, {ms[0], ms[1] * ms[2]}));
  return ops::reshape(s, {probs.shape()[1], ms[1], ms[2]});
}

Var rba_score(Var logits) {
  const Shape& s = logits.shape();
  const std::size_t k = s[0];
  const std::size_t pixels = logits.size() / k;
  Var t = ops::transpose(ops::reshape(ops::tanh(logits), {k, pixels}));
  Var a = ops::scale(ops::sum_lastdim(t), -1.0);
  Shape out(s.begin() + 1, s.end());
  if (out.empty()) out = {1};
  return ops::reshape(a, out);
}

}  // namespace panoos::model
