#include "panoos/decoder/model.hpp"

#include <cmath>

#include "panoos/numerics/errors.hpp"
#include "panoos/numerics/ops.hpp"
#include "panoos/numerics/random.hpp"

namespace panoos::model {

namespace {

std::uint64_t name_hash(std::string_view name) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : name) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

Tensor xavier(Shape shape, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = rng.uniform(-limit, limit);
  return t;
}

Tensor gaussian(Shape shape, Rng& rng) {
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = rng.normal();
  return t;
}

Tensor rows_of(const Tensor& m, std::size_t begin, std::size_t end) {
  const std::size_t cols = m.dim(1);
  std::vector<double> v(m.data() + begin * cols, m.data() + end * cols);
  return Tensor({end - begin, cols}, std::move(v));
}

}  // namespace

Model::Model(const ModelConfig& config) : config_(config) {
  config_.validate();
  const std::size_t C = config_.query_dim, K = config_.classes, D = config_.feature_dim;

  for (std::size_t l = 0; l < config_.strides.size(); ++l) {
    const std::string name = "pixel_decoder.lateral" + std::to_string(l);
    Rng rng(mix_seed(config_.seed, name_hash(name)));
    pixel_decoder_.lateral.push_back({add(name + ".weight", ParamGroup::PixelDecoder, xavier({C, D}, D, C, rng)),
                                      add(name + ".bias", ParamGroup::PixelDecoder, Tensor({C}, 0.0))});
  }
  {
    Rng rng(mix_seed(config_.seed, name_hash("pixel_decoder.output")));
    pixel_decoder_.output = {add("pixel_decoder.output.weight", ParamGroup::PixelDecoder, xavier({C, C}, C, C, rng)),
                             add("pixel_decoder.output.bias", ParamGroup::PixelDecoder, Tensor({C}, 0.0))};
  }

  {
    Rng rng(mix_seed(config_.seed, name_hash("queries")));
    queries_ = add("queries", ParamGroup::QueryInit, gaussian({config_.queries, C}, rng));
    positional_ = add("positional", ParamGroup::Frozen, gaussian({config_.queries, C}, rng));
  }

  for (std::size_t l = 0; l < config_.layers; ++l) {
    const std::string p = "pra" + std::to_string(l);
    PraLayerParams layer;
    layer.masked = add_attention(p + ".masked", C);
    layer.masked_norm = add_norm(p + ".masked_norm", C);
    layer.prompt = add_attention(p + ".prompt", C);
    layer.prompt_norm = add_norm(p + ".prompt_norm", C);
    layer.correction.norm = add_norm(p + ".correction.norm", C);
    layer.correction.ffn = add_ffn(p + ".correction.ffn", C, config_.ffn_dim);
    layer.correction.gate = add(p + ".correction.gate", ParamGroup::Pra, Tensor::scalar(0.0));
    layer.self = add_attention(p + ".self", C);
    layer.self_norm = add_norm(p + ".self_norm", C);
    layer.ffn = add_ffn(p + ".ffn", C, config_.ffn_dim);
    layer.ffn_norm = add_norm(p + ".ffn_norm", C);
    layers_.push_back(layer);
  }

  mask_mlp_.first = add_linear("mask_mlp.0", ParamGroup::MaskMlp, C, C, true);
  mask_mlp_.second = add_linear("mask_mlp.1", ParamGroup::MaskMlp, C, C, true);
  mask_mlp_.third = add_linear("mask_mlp.2", ParamGroup::MaskMlp, C, config_.mask_dim, true);

  {
    Rng rng(mix_seed(config_.seed, name_hash("class_linear")));
    class_weight_ = add("class_linear.weight", ParamGroup::ClassLinear, xavier({K, C}, C, K, rng));
  }
  {
    Rng rng(mix_seed(config_.seed, name_hash("prompt_projection")));
    projection_ = add("prompt_projection.weight", ParamGroup::PromptProjection,
                      xavier({config_.text_dim, config_.mask_dim}, config_.text_dim, config_.mask_dim, rng));
  }

  const Tensor text = synth_text_encode(prompt_ids(K), config_.templates, config_.text_dim, config_.seed);
  void_embedding_ = add("prompts.void", ParamGroup::VoidEmbedding, rows_of(text, 0, 1));
  class_text_ = add("prompts.classes", ParamGroup::Frozen, rows_of(text, 1, K + 1));
  dist_prompts_ = add("prompts.distribution", ParamGroup::DistributionPrompts, rows_of(text, K + 1, K + 3));
}

Parameter* Model::add(std::string name, ParamGroup group, Tensor value) {
  params_.emplace_back(std::move(name), group, std::move(value));
  return &params_.back();
}

Linear Model::add_linear(const std::string& name, ParamGroup group, std::size_t in, std::size_t out, bool bias) {
  Rng rng(mix_seed(config_.seed, name_hash(name)));
  Linear l;
  l.weight = add(name + ".weight", group, xavier({in, out}, in, out, rng));
  if (bias) l.bias = add(name + ".bias", group, Tensor({out}, 0.0));
  return l;
}

NormParams Model::add_norm(const std::string& name, std::size_t dim) {
  return {add(name + ".gain", ParamGroup::Pra, Tensor({dim}, 1.0)), add(name + ".bias", ParamGroup::Pra, Tensor({dim}, 0.0))};
}

AttentionParams Model::add_attention(const std::string& name, std::size_t dim) {
  return {add_linear(name + ".query", ParamGroup::Pra, dim, dim, false),
          add_linear(name + ".key", ParamGroup::Pra, dim, dim, false),
          add_linear(name + ".value", ParamGroup::Pra, dim, dim, false),
          add_linear(name + ".output", ParamGroup::Pra, dim, dim, false)};
}

FfnParams Model::add_ffn(const std::string& name, std::size_t dim, std::size_t hidden) {
  return {add_linear(name + ".hidden", ParamGroup::Pra, dim, hidden, true),
          add_linear(name + ".output", ParamGroup::Pra, hidden, dim, true)};
}

ParameterList Model::parameters() {
  ParameterList list;
  list.reserve(params_.size());
  for (Parameter& p : params_) list.push_back(&p);
  return list;
}

Parameter* Model::find(std::string_view name) {
  for (Parameter& p : params_) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

Parameter& Model::get(std::string_view name) {
  Parameter* p = find(name);
  if (!p) throw ContractError("model has no parameter named " + std::string(name));
  return *p;
}

void Model::set_text_embeddings(const Tensor& raw) {
  const std::size_t K = config_.classes;
  if (raw.rank() != 2 || raw.dim(0) != K + 3 || raw.dim(1) != config_.text_dim) {
    throw DimensionError("text embeddings must be [" + std::to_string(K + 3) + "x" + std::to_string(config_.text_dim) +
                         "], got " + shape_str(raw.shape()));
  }
  void_embedding_->value = rows_of(raw, 0, 1);
  class_text_->value = rows_of(raw, 1, K + 1);
  dist_prompts_->value = rows_of(raw, K + 1, K + 3);
}

Tensor Model::raw_prompts() const {
  const std::size_t K = config_.classes, Dt = config_.text_dim;
  std::vector<double> v;
  v.reserve((K + 3) * Dt);
  for (const Parameter* p : {void_embedding_, class_text_, dist_prompts_}) {
    v.insert(v.end(), p->value.values().begin(), p->value.values().end());
  }
  return Tensor({K + 3, Dt}, std::move(v));
}

PromptSet Model::prompts(Tape& tape) {
  const std::vector<Var> rows = {tape.param(*void_embedding_), tape.param(*class_text_), tape.param(*dist_prompts_)};
  return project_prompts(ops::concat_rows(rows), tape.param(*projection_));
}

ForwardVars Model::forward(Tape& tape, const FeatureBundle& features) {
  features.validate();
  if (features.strides != config_.strides) throw DimensionError("feature strides do not match the model's strides");
  if (features.levels[0].dim(0) != config_.feature_dim) {
    throw DimensionError("features have " + std::to_string(features.levels[0].dim(0)) + " channels, model expects " +
                         std::to_string(config_.feature_dim));
  }
  ForwardVars out;
  out.prompts = prompts(tape);
  out.pixels = pixel_decode(tape, features, pixel_decoder_);
  out.stride = out.pixels.stride;

  const std::size_t pool = features.strides.back() / features.strides.front();
  Var x = tape.param(*queries_);
  Var pos = tape.param(*positional_);
  for (const PraLayerParams& layer : layers_) {
    const Tensor prev = predict_masks(tape, x, out.pixels.fm, mask_mlp_).value();
    const Tensor mask = build_attention_mask(average_pool(prev, pool));
    x = pra_layer(tape, x, pos, out.pixels.f4, mask, out.prompts.all, layer, pra_options());
  }
  out.queries = x;
  out.masks = predict_masks(tape, x, out.pixels.fm, mask_mlp_);
  out.probs = predict_classes(x, tape.param(*class_weight_));
  out.logits = aggregate_logits(out.probs, out.masks);
  return out;
}

SegOutput Model::forward_scene(const FeatureBundle& features) {
  Tape tape;
  const ForwardVars v = forward(tape, features);
  SegOutput out;
  out.masks = upsample(v.masks, v.stride).value();
  out.probs = v.probs.value();
  out.logits = upsample(v.logits, v.stride).value();
  Var a = rba_score(v.logits);
  const Shape as = a.shape();
  out.anomaly = upsample(ops::reshape(a, {1, as[0], as[1]}), v.stride).value().reshaped({features.height, features.width});
  return out;
}

}  // namespace panoos::model
