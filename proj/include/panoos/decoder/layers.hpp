#pragma once

#include <cstddef>
#include <vector>

#include "panoos/decoder/encoders.hpp"
#include "panoos/numerics/parameter.hpp"
#include "panoos/numerics/tape.hpp"

// Building blocks of the mask-transformer decoder. Row-major conventions:
// queries are [N, C], prompt rows are [K+3, C], pixel embeddings are
// channel-major [C, h, w].
namespace panoos::model {

inline constexpr double kMaskLarge = 1e9;

/// y = x W + b with W stored [in, out]; bias optional.
struct Linear {
  Parameter* weight = nullptr;
  Parameter* bias = nullptr;
};

struct NormParams {
  Parameter* gain = nullptr;
  Parameter* bias = nullptr;
};

struct AttentionParams {
  Linear query, key, value, output;
};

struct FfnParams {
  Linear hidden, output;
};

struct CorrectionParams {
  NormParams norm;
  FfnParams ffn;
  Parameter* gate = nullptr;  // scalar W, tanh-gated
};

struct PraLayerParams {
  AttentionParams masked;
  NormParams masked_norm;
  AttentionParams prompt;
  NormParams prompt_norm;
  CorrectionParams correction;
  AttentionParams self;
  NormParams self_norm;
  FfnParams ffn;
  NormParams ffn_norm;
};

struct PraOptions {
  bool prompt_attention = true;
  bool adaptive_correction = true;
};

struct MaskMlpParams {
  Linear first, second, third;
};

/// Per-level 1x1 projections (weight [C_m, D], bias [C_m]) and the fusing
/// output projection (weight [C_m, C_m], bias [C_m]).
struct PixelDecoderParams {
  std::vector<Linear> lateral;
  Linear output;
};

Var linear(Tape& tape, Var x, const Linear& p);
Var norm(Tape& tape, Var x, const NormParams& p);
Var ffn(Tape& tape, Var x, const FfnParams& p);

/// softmax(mask + q k^T / sqrt(c)) v. A null mask attends everywhere; rows
/// whose mask entries are all -LARGE attend uniformly.
Var attend(Var q, Var k, Var v, const Tensor* mask);

/// Queries attend over image tokens f4 [P, C] under an additive mask [N, P].
Var masked_attention(Tape& tape, Var queries, Var f4, const Tensor& mask, const AttentionParams& p);

/// Queries attend over the K+3 projected prompt rows.
Var prompt_cross_attention(Tape& tape, Var x, Var prompts, const AttentionParams& p);

/// x + FFN(LN(x)) * tanh(W).
Var self_adaptive_correction(Tape& tape, Var x, const CorrectionParams& p);

/// Masked attention, prompt cross-attention, adaptive correction, query
/// self-attention and FFN, each attention/FFN step with residual and
/// layer norm. `pos` is added to queries entering attention.
Var pra_layer(Tape& tape, Var x, Var pos, Var f4, const Tensor& mask, Var prompts, const PraLayerParams& p,
              PraOptions options);

/// m_prev [N, h, w] in (0,1) -> additive mask [N, h*w]: 0 where m >= 0.5,
/// -LARGE elsewhere.
Tensor build_attention_mask(const Tensor& m_prev);

struct PromptSet {
  Var all;                // [K+3, C_m] rows [T_0..T_K, P_in, P_out]
  Var class_prototypes;   // [K+1, C_m]
  Var dist_prototypes;    // [2, C_m]
};

PromptSet project_prompts(Var raw, Var projection);

struct DecodedPixels {
  Var f4;                  // [P_coarsest, C_m] tokens of the coarsest level
  Var fm;                  // [C_m, H/s0, W/s0] at the finest stride
  std::size_t stride = 1;  // finest stride s0
};

DecodedPixels pixel_decode(Tape& tape, const FeatureBundle& features, const PixelDecoderParams& p);

/// Nearest-neighbour upsample of [C, h, w] by `factor` (identity for 1).
Var upsample(Var x, std::size_t factor);

/// sigmoid(MLP(Q) . F_m) -> [N, h, w].
Var predict_masks(Tape& tape, Var queries, Var fm, const MaskMlpParams& p);

/// softmax(Q W_p^T) -> [N, K] with W_p stored [K, C_q].
Var predict_classes(Var queries, Var class_weight);

/// S_k = sum_n P[n,k] M_n -> [K, h, w].
Var aggregate_logits(Var probs, Var masks);

/// A = -sum_k tanh(S_k) -> [h, w].
Var rba_score(Var logits);

}  // namespace panoos::model
