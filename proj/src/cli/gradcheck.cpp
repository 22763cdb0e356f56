#include "panoos/cli/gradcheck.hpp"

#include "panoos/bpdl/bpdl.hpp"
#include "panoos/decoder/encoders.hpp"
#include "panoos/decoder/layers.hpp"
#include "panoos/decoder/model.hpp"
#include "panoos/numerics/errors.hpp"
#include "panoos/numerics/finite_diff.hpp"
#include "panoos/numerics/ops.hpp"
#include "panoos/numerics/random.hpp"
#include "panoos/training/losses.hpp"
#include "panoos/training/matching.hpp"

namespace panoos::cli {

namespace {

constexpr std::size_t kClasses = 3;
constexpr std::size_t kQueries = 4;
constexpr std::size_t kEmbed = 8;

Tensor uniform(Shape shape, Rng& rng, double lo, double hi) {
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

data::LabelMap random_labels(std::size_t size, Rng& rng) {
  data::LabelMap labels{size, size, std::vector<std::uint8_t>(size * size)};
  for (std::uint8_t& l : labels.values) {
    const std::uint64_t r = rng.below(kClasses + 2);
    l = r < kClasses ? static_cast<std::uint8_t>(r) : (r == kClasses ? data::kOutlierLabel : data::kIgnoreLabel);
  }
  labels.values[0] = 0;
  if (labels.values.size() > 1) labels.values[1] = data::kOutlierLabel;
  return labels;
}

model::ModelConfig tiny_model(std::size_t size, std::uint64_t seed) {
  model::ModelConfig c;
  c.classes = kClasses;
  c.feature_dim = 4;
  c.queries = kQueries;
  c.query_dim = kEmbed;
  c.mask_dim = kEmbed;
  c.text_dim = 12;
  c.templates = 3;
  c.ffn_dim = 16;
  c.strides.clear();
  for (std::size_t s = 1; s <= 4 && size % s == 0; s *= 2) c.strides.push_back(s);
  c.seed = seed;
  return c;
}

GradRow row(std::string name, const GradCheckReport& r) { return {std::move(name), r.max_rel_error, r.coordinates}; }

}  // namespace

std::vector<GradRow> gradient_suite(std::uint64_t seed, std::size_t size) {
  if (size == 0) throw ConfigError("gradcheck size must be positive");
  Rng rng(mix_seed(seed, 0x9c));
  const data::LabelMap labels = random_labels(size, rng);
  const bpdl::BpdlConfig cfg{1.5, 1.0, 0.1, 0.5};
  const train::LossWeights w;

  // Small prompts keep the separation and outlier hinges active.
  Parameter fm("fm", ParamGroup::PixelDecoder, uniform({kEmbed, size, size}, rng, -1.0, 1.0));
  Parameter prompts("prompts", ParamGroup::PromptProjection, uniform({kClasses + 3, kEmbed}, rng, -0.4, 0.4));
  Parameter mask_logits("mask_logits", ParamGroup::MaskMlp, uniform({kQueries, size, size}, rng, -3.0, 3.0));
  Parameter class_logits("class_logits", ParamGroup::ClassLinear, uniform({kQueries, kClasses}, rng, -2.0, 2.0));
  const ParameterList embedding_inputs = {&fm, &prompts};
  const ParameterList head_inputs = {&mask_logits, &class_logits};

  const train::GroundTruth gt = train::make_ground_truth(labels, 1, kClasses);
  train::MatchAssignment match;
  {
    Tape t;
    Var masks = ops::sigmoid(t.param(mask_logits));
    Var probs = ops::softmax_lastdim(t.param(class_logits));
    match = train::hungarian_match(probs.value(), masks.value(), gt, w);
  }
  const std::uint64_t part_seed = mix_seed(seed, 0x9a);
  auto leaf = [&](auto loss) {
    return [&, loss](Tape& t) {
      Var f = t.param(fm);
      Var p = t.param(prompts);
      return loss(bpdl::build_partition(f, labels.values, kClasses, 4096, part_seed), p);
    };
  };

  std::vector<GradRow> rows;
  rows.push_back(row("loss_intra", finite_diff_check(leaf([](const bpdl::PixelPartition& part, Var p) {
                                                        return bpdl::loss_intra(part, p);
                                                      }),
                                                      embedding_inputs)));
  rows.push_back(row("loss_sep", finite_diff_check(leaf([&](const bpdl::PixelPartition&, Var p) {
                                                      return bpdl::loss_sep(p, cfg.s);
                                                    }),
                                                    embedding_inputs)));
  rows.push_back(row("loss_ori", finite_diff_check(leaf([](const bpdl::PixelPartition&, Var p) {
                                                      return bpdl::loss_ori(p);
                                                    }),
                                                    embedding_inputs)));
  rows.push_back(row("loss_ind", finite_diff_check(leaf([](const bpdl::PixelPartition&, Var p) {
                                                      return bpdl::loss_ind(p);
                                                    }),
                                                    embedding_inputs)));
  rows.push_back(row("loss_in_dir", finite_diff_check(leaf([](const bpdl::PixelPartition&, Var p) {
                                                         return bpdl::loss_in_dir(p);
                                                       }),
                                                       embedding_inputs)));
  rows.push_back(row("loss_outlier", finite_diff_check(leaf([&](const bpdl::PixelPartition& part, Var p) {
                                                          return bpdl::loss_outlier(part, p, cfg.d);
                                                        }),
                                                        embedding_inputs)));

  rows.push_back(row("loss_mask", finite_diff_check(
                                      [&](Tape& t) {
                                        return train::loss_mask(ops::sigmoid(t.param(mask_logits)), match, gt, w);
                                      },
                                      head_inputs)));
  rows.push_back(row("loss_cls", finite_diff_check(
                                     [&](Tape& t) {
                                       return train::loss_cls(ops::softmax_lastdim(t.param(class_logits)), match, gt);
                                     },
                                     head_inputs)));
  rows.push_back(row("loss_rba_oe", finite_diff_check(
                                        [&](Tape& t) {
                                          Var masks = ops::sigmoid(t.param(mask_logits));
                                          Var probs = ops::softmax_lastdim(t.param(class_logits));
                                          return train::loss_rba_oe(model::aggregate_logits(probs, masks),
                                                                    gt.outlier_pixels);
                                        },
                                        head_inputs)));

  // End to end through every decoder weight, distribution prompts included.
  model::Model m(tiny_model(size, mix_seed(seed, 0xe2e)));
  data::SceneSample scene;
  scene.features = uniform({4, size, size}, rng, -2.0, 2.0);
  scene.labels = labels;
  const model::FeatureBundle bundle = model::encode_image(scene, m.config().strides);
  std::vector<ParamGroup> groups(kAllParamGroups.begin(), kAllParamGroups.end());
  set_trainable_groups(m.parameters(), groups);
  ParameterList params;
  for (Parameter* p : m.parameters()) {
    if (!p->trainable) continue;
    // Identity-initialised gates would leave the correction branch without gradient.
    if (p->name.find("correction.gate") != std::string::npos) p->value[0] = 0.4;
    params.push_back(p);
  }
  train::GroundTruth model_gt;
  train::MatchAssignment model_match;
  {
    Tape t;
    const model::ForwardVars fwd = m.forward(t, bundle);
    model_gt = train::make_ground_truth(labels, fwd.stride, kClasses);
    model_match = train::hungarian_match(fwd.probs.value(), fwd.masks.value(), model_gt, w);
  }
  rows.push_back(row("total_loss_oe", finite_diff_check(
                                          [&](Tape& t) {
                                            const model::ForwardVars fwd = m.forward(t, bundle);
                                            const bpdl::PixelPartition part = bpdl::build_partition(
                                                fwd.pixels.fm, model_gt.labels, kClasses, 4096, part_seed);
                                            return train::total_loss_oe(fwd, model_match, model_gt, part, cfg, w).total;
                                          },
                                          params)));
  return rows;
}

}  // namespace panoos::cli
