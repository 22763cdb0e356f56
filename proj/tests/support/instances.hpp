#pragma once

#include <cstdint>
#include <vector>

#include "panoos/bpdl/bpdl.hpp"
#include "panoos/decoder/model.hpp"
#include "panoos/numerics/finite_diff.hpp"
#include "panoos/numerics/random.hpp"
#include "panoos/synthdata/scene.hpp"
#include "panoos/training/losses.hpp"
#include "panoos/training/matching.hpp"

// Small instances shared by the unit and acceptance suites.
namespace panoos::testutil {

inline Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

/// N=4 queries, K=3 classes, strides {1,2,4} so a 4x4 scene maps to 4x4 masks.
inline model::ModelConfig tiny_model_config(std::uint64_t seed = 7) {
  model::ModelConfig c;
  c.classes = 3;
  c.feature_dim = 4;
  c.queries = 4;
  c.query_dim = 8;
  c.mask_dim = 8;
  c.text_dim = 12;
  c.templates = 3;
  c.ffn_dim = 16;
  c.strides = {1, 2, 4};
  c.seed = seed;
  return c;
}

/// size x size scene with random features and random labels drawn from the
/// classes, the outlier code and the ignore code.
inline data::SceneSample random_scene(std::size_t size, std::size_t channels, std::size_t classes,
                                      std::uint64_t seed) {
  Rng rng(seed);
  data::SceneSample s;
  s.features = random_tensor({channels, size, size}, rng, -2.0, 2.0);
  s.labels = data::LabelMap{size, size, std::vector<std::uint8_t>(size * size)};
  for (std::uint8_t& l : s.labels.values) {
    const std::uint64_t r = rng.below(classes + 2);
    l = r < classes ? static_cast<std::uint8_t>(r) : (r == classes ? data::kOutlierLabel : data::kIgnoreLabel);
  }
  // Keep at least one outlier and one inlier pixel.
  s.labels.values[0] = 0;
  s.labels.values[1] = data::kOutlierLabel;
  return s;
}

/// End-to-end gradient check of total_loss_oe through the whole model. The
/// Hungarian assignment is fixed from the unperturbed forward pass, since
/// the matching itself is piecewise constant.
inline GradCheckReport end_to_end_gradcheck(std::uint64_t seed, std::size_t size = 4) {
  model::Model m(tiny_model_config(mix_seed(seed, 0xe2e)));
  const data::SceneSample scene = random_scene(size, 4, 3, mix_seed(seed, 0x5ce));
  const model::FeatureBundle bundle = model::encode_image(scene, m.config().strides);
  // Every decoder parameter becomes trainable, including the distribution
  // prompts; the frozen encoder outputs stay fixed.
  std::vector<ParamGroup> groups(kAllParamGroups.begin(), kAllParamGroups.end());
  set_trainable_groups(m.parameters(), groups);
  ParameterList params;
  for (Parameter* p : m.parameters())
    if (p->trainable) params.push_back(p);

  // Gates start at 0 (identity); move them so the correction branch carries gradient.
  for (Parameter* p : params)
    if (p->name.find("correction.gate") != std::string::npos) p->value[0] = 0.4;

  train::LossWeights w;
  bpdl::BpdlConfig cfg{1.5, 1.0, 0.1, 0.5};
  train::GroundTruth gt;
  train::MatchAssignment match;
  {
    Tape t;
    const model::ForwardVars fwd = m.forward(t, bundle);
    gt = train::make_ground_truth(scene.labels, fwd.stride, 3);
    match = train::hungarian_match(fwd.probs.value(), fwd.masks.value(), gt, w);
  }
  return finite_diff_check(
      [&](Tape& t) {
        const model::ForwardVars fwd = m.forward(t, bundle);
        const bpdl::PixelPartition part = bpdl::build_partition(fwd.pixels.fm, gt.labels, 3, 4096, 1);
        return train::total_loss_oe(fwd, match, gt, part, cfg, w).total;
      },
      params);
}

}  // namespace panoos::testutil
