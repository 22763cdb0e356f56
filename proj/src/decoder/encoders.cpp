#include "panoos/decoder/encoders.hpp"

#include <cmath>
#include <set>

#include "panoos/numerics/errors.hpp"
#include "panoos/numerics/random.hpp"

namespace panoos::model {

std::vector<std::uint64_t> prompt_ids(std::size_t classes) {
  std::vector<std::uint64_t> ids;
  ids.reserve(classes + 3);
  for (std::size_t k = 0; k <= classes; ++k) ids.push_back(k);
  ids.push_back(kInlierPromptId);
  ids.push_back(kOutlierPromptId);
  return ids;
}

Tensor synth_text_encode(const std::vector<std::uint64_t>& ids, std::size_t templates, std::size_t dim,
                         std::uint64_t seed) {
  if (templates == 0) throw ContractError("synth_text_encode needs at least one template");
  if (ids.empty() || dim == 0) throw ContractError("synth_text_encode needs ids and a positive dimension");
  if (std::set<std::uint64_t>(ids.begin(), ids.end()).size() != ids.size()) {
    throw ContractError("synth_text_encode: duplicate prompt ids");
  }
  Tensor out({ids.size(), dim});
  std::vector<double> acc(dim);
  for (std::size_t r = 0; r < ids.size(); ++r) {
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::size_t t = 0; t < templates; ++t) {
      Rng rng(mix_seed(seed, ids[r], t));
      for (double& a : acc) a += rng.normal();
    }
    double norm = 0.0;
    for (double& a : acc) {
      a /= static_cast<double>(templates);
      norm += a * a;
    }
    norm = std::sqrt(norm);
    for (std::size_t c = 0; c < dim; ++c) out.at(r, c) = acc[c] / norm;
  }
  return out;
}

void FeatureBundle::validate() const {
  if (levels.size() != strides.size() || levels.empty()) {
    throw DimensionError("feature bundle has " + std::to_string(levels.size()) + " levels for " +
                         std::to_string(strides.size()) + " strides");
  }
  const std::size_t channels = levels[0].rank() == 3 ? levels[0].dim(0) : 0;
  for (std::size_t l = 0; l < levels.size(); ++l) {
    const std::size_t s = strides[l];
    const Shape expect = {channels, s ? height / s : 0, s ? width / s : 0};
    if (s == 0 || height % s != 0 || width % s != 0 || levels[l].shape() != expect ||
        (l > 0 && (s <= strides[l - 1] || s % strides[0] != 0))) {
      throw DimensionError("feature level " + std::to_string(l) + " with shape " + shape_str(levels[l].shape()) +
                           " is inconsistent with stride " + std::to_string(s) + " of a " + std::to_string(height) +
                           "x" + std::to_string(width) + " input");
    }
  }
}

Tensor average_pool(const Tensor& x, std::size_t factor) {
  if (x.rank() != 3 || factor == 0 || x.dim(1) % factor != 0 || x.dim(2) % factor != 0) {
    throw DimensionError("cannot average-pool " + shape_str(x.shape()) + " by " + std::to_string(factor));
  }
  if (factor == 1) return x;
  const std::size_t C = x.dim(0), H = x.dim(1), W = x.dim(2);
  const std::size_t h = H / factor, w = W / factor;
  Tensor out({C, h, w});
  const double inv = 1.0 / static_cast<double>(factor * factor);
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t xx = 0; xx < w; ++xx) {
        double s = 0.0;
        for (std::size_t dy = 0; dy < factor; ++dy) {
          for (std::size_t dx = 0; dx < factor; ++dx) s += x[(c * H + y * factor + dy) * W + xx * factor + dx];
        }
        out[(c * h + y) * w + xx] = s * inv;
      }
    }
  }
  return out;
}

FeatureBundle encode_image(const data::SceneSample& sample, const std::vector<std::size_t>& strides) {
  FeatureBundle bundle;
  bundle.height = sample.height();
  bundle.width = sample.width();
  bundle.strides = strides;
  for (std::size_t s : strides) bundle.levels.push_back(average_pool(sample.features, s));
  bundle.validate();
  return bundle;
}

}  // namespace panoos::model
