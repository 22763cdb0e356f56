#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "panoos/numerics/tensor.hpp"
#include "panoos/synthdata/scene.hpp"

// Deterministic stand-ins for the frozen image and text encoders.
namespace panoos::model {

inline constexpr std::uint64_t kInlierPromptId = 1000001;
inline constexpr std::uint64_t kOutlierPromptId = 1000002;

/// [void = 0, classes 1..K, inlier, outlier]
std::vector<std::uint64_t> prompt_ids(std::size_t classes);

/// One unit-norm row per id: the mean over template indices of seeded
/// Gaussian vectors drawn for (seed, id, template), then L2-normalized.
/// Throws ContractError on duplicate ids or zero templates.
Tensor synth_text_encode(const std::vector<std::uint64_t>& ids, std::size_t templates, std::size_t dim,
                         std::uint64_t seed);

/// Multi-scale feature rasters; levels[l] has shape [D, H/strides[l], W/strides[l]].
struct FeatureBundle {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::size_t> strides;
  std::vector<Tensor> levels;

  /// Throws DimensionError when a level does not match its stride.
  void validate() const;
};

/// Average-pools x[C, H, W] over factor x factor blocks.
Tensor average_pool(const Tensor& x, std::size_t factor);

/// Frozen image encoder: average-pooled pyramid of the scene's features.
FeatureBundle encode_image(const data::SceneSample& sample, const std::vector<std::size_t>& strides);

}  // namespace panoos::model
