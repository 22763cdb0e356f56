#pragma once

#include <deque>
#include <string_view>
#include <vector>

#include "panoos/decoder/config.hpp"
#include "panoos/decoder/encoders.hpp"
#include "panoos/decoder/layers.hpp"
#include "panoos/numerics/parameter.hpp"
#include "panoos/numerics/tape.hpp"

namespace panoos::model {

/// Dense results of one forward pass at full input resolution.
struct SegOutput {
  Tensor masks;   // M [N, H, W]
  Tensor probs;   // P [N, K]
  Tensor logits;  // S [K, H, W]
  Tensor anomaly; // A [H, W]
};

/// Tape handles of one forward pass. Masks and logits live at the finest
/// feature stride; upsample(x, stride) gives full resolution.
struct ForwardVars {
  PromptSet prompts;
  DecodedPixels pixels;
  Var queries;  // refined queries [N, C_q]
  Var masks;    // [N, H/s, W/s]
  Var probs;    // [N, K]
  Var logits;   // [K, H/s, W/s]
  std::size_t stride = 1;
};

class Model {
 public:
  explicit Model(const ModelConfig& config);
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  const ModelConfig& config() const noexcept { return config_; }

  /// Every parameter in a fixed creation order.
  ParameterList parameters();
  Parameter* find(std::string_view name);
  Parameter& get(std::string_view name);

  /// Replaces the raw prompt rows [void, classes 1..K, inlier, outlier] with
  /// externally produced embeddings of shape [(K+3), D_text].
  void set_text_embeddings(const Tensor& raw);
  /// Current raw prompt rows [(K+3), D_text].
  Tensor raw_prompts() const;

  PromptSet prompts(Tape& tape);
  ForwardVars forward(Tape& tape, const FeatureBundle& features);
  SegOutput forward_scene(const FeatureBundle& features);

  const PixelDecoderParams& pixel_decoder() const { return pixel_decoder_; }
  const std::vector<PraLayerParams>& pra_layers() const { return layers_; }
  const MaskMlpParams& mask_mlp() const { return mask_mlp_; }
  PraOptions pra_options() const { return {config_.prompt_attention, config_.adaptive_correction}; }

 private:
  Parameter* add(std::string name, ParamGroup group, Tensor value);
  Linear add_linear(const std::string& name, ParamGroup group, std::size_t in, std::size_t out, bool bias);
  NormParams add_norm(const std::string& name, std::size_t dim);
  AttentionParams add_attention(const std::string& name, std::size_t dim);
  FfnParams add_ffn(const std::string& name, std::size_t dim, std::size_t hidden);

  ModelConfig config_;
  std::deque<Parameter> params_;

  PixelDecoderParams pixel_decoder_;
  std::vector<PraLayerParams> layers_;
  MaskMlpParams mask_mlp_;
  Parameter* queries_ = nullptr;
  Parameter* positional_ = nullptr;
  Parameter* class_weight_ = nullptr;
  Parameter* projection_ = nullptr;
  Parameter* void_embedding_ = nullptr;
  Parameter* class_text_ = nullptr;
  Parameter* dist_prompts_ = nullptr;
};

}  // namespace panoos::model
