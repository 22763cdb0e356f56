#pragma once

#include <cstdint>

#include "panoos/synthdata/scene.hpp"

namespace panoos::train {

/// With probability p_out pastes one uniformly chosen bank patch at a uniform
/// location (pasted pixels become outliers); otherwise returns the sample
/// unchanged. Deterministic in seed.
data::SceneSample anomaly_mix(const data::SceneSample& sample, const data::OutlierBank& bank, double p_out,
                              std::uint64_t seed);

}  // namespace panoos::train
