#include "panoos/numerics/parameter.hpp"

#include <algorithm>

namespace panoos {

std::string_view group_name(ParamGroup group) {
  switch (group) {
    case ParamGroup::PixelDecoder: return "pixel-decoder";
    case ParamGroup::MaskMlp: return "mask-mlp";
    case ParamGroup::ClassLinear: return "class-linear";
    case ParamGroup::PromptProjection: return "prompt-projection";
    case ParamGroup::QueryInit: return "query-init";
    case ParamGroup::Pra: return "pra";
    case ParamGroup::VoidEmbedding: return "void-embedding";
    case ParamGroup::DistributionPrompts: return "distribution-prompts";
    case ParamGroup::Frozen: return "frozen";
  }
  return "unknown";
}

std::optional<ParamGroup> parse_group(std::string_view name) {
  for (ParamGroup g : kAllParamGroups) {
    if (group_name(g) == name) return g;
  }
  return std::nullopt;
}

Parameter::Parameter(std::string name_, ParamGroup group_, Tensor value_)
    : name(std::move(name_)), group(group_), value(std::move(value_)), grad(value.shape(), 0.0) {}

void zero_grads(const ParameterList& params) {
  for (Parameter* p : params) p->zero_grad();
}

void set_trainable_groups(const ParameterList& params, const std::vector<ParamGroup>& groups) {
  for (Parameter* p : params) {
    p->trainable = p->group != ParamGroup::Frozen &&
                   std::find(groups.begin(), groups.end(), p->group) != groups.end();
  }
}

}  // namespace panoos
