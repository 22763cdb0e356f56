#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "panoos/numerics/tensor.hpp"

namespace panoos {

/// Parameter groups drive which weights each training phase may update.
/// `Frozen` holds fixed encoder outputs (class text embeddings, positional
/// tensor) that no phase trains.
enum class ParamGroup {
  PixelDecoder,
  MaskMlp,
  ClassLinear,
  PromptProjection,
  QueryInit,
  Pra,
  VoidEmbedding,
  DistributionPrompts,
  Frozen,
};

inline constexpr std::array<ParamGroup, 9> kAllParamGroups = {
    ParamGroup::PixelDecoder, ParamGroup::MaskMlp,       ParamGroup::ClassLinear,
    ParamGroup::PromptProjection, ParamGroup::QueryInit, ParamGroup::Pra,
    ParamGroup::VoidEmbedding, ParamGroup::DistributionPrompts, ParamGroup::Frozen,
};

std::string_view group_name(ParamGroup group);
std::optional<ParamGroup> parse_group(std::string_view name);

struct Parameter {
  Parameter() = default;
  Parameter(std::string name, ParamGroup group, Tensor value);

  std::string name;
  ParamGroup group = ParamGroup::Frozen;
  Tensor value;
  Tensor grad;  // same shape as value
  bool trainable = true;

  void zero_grad() { grad.fill(0.0); }
};

using ParameterList = std::vector<Parameter*>;

void zero_grads(const ParameterList& params);

/// Marks every parameter trainable iff its group is listed.
void set_trainable_groups(const ParameterList& params, const std::vector<ParamGroup>& groups);

}  // namespace panoos
