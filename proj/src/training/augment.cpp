#include "panoos/training/augment.hpp"

#include <string>

#include "panoos/numerics/errors.hpp"
#include "panoos/numerics/random.hpp"

namespace panoos::train {

data::SceneSample anomaly_mix(const data::SceneSample& sample, const data::OutlierBank& bank, double p_out,
                              std::uint64_t seed) {
  if (bank.empty()) throw ContractError("outlier bank is empty");
  if (!(p_out >= 0.0 && p_out <= 1.0)) throw ContractError("p_out must lie in [0, 1], got " + std::to_string(p_out));
  data::SceneSample out = sample;
  Rng rng(seed);
  if (rng.uniform() >= p_out) return out;
  const data::OutlierPatch& patch = bank[rng.below(bank.size())];
  const std::size_t h = patch.mask.height, w = patch.mask.width;
  if (h > sample.height() || w > sample.width()) {
    throw ContractError("outlier patch " + std::to_string(h) + "x" + std::to_string(w) + " does not fit a " +
                        std::to_string(sample.height()) + "x" + std::to_string(sample.width()) + " scene");
  }
  const std::size_t top = rng.below(sample.height() - h + 1);
  const std::size_t left = rng.below(sample.width() - w + 1);
  data::paste_patch(out, patch, top, left);
  return out;
}

}  // namespace panoos::train
