#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace panoos::model {

struct ModelConfig {
  std::size_t classes = 6;
  std::size_t feature_dim = 16;
  std::size_t queries = 100;
  std::size_t query_dim = 256;
  std::size_t mask_dim = 256;
  std::size_t text_dim = 768;
  std::size_t templates = 14;
  std::size_t layers = 1;
  std::size_t ffn_dim = 2048;
  bool prompt_attention = true;
  bool adaptive_correction = true;
  std::vector<std::size_t> strides = {4, 8, 16, 32};
  std::uint64_t seed = 7;

  /// Throws ContractError when the configuration cannot build a model.
  void validate() const;

  /// "key = value" lines; parse() accepts exactly what serialize() writes.
  std::string serialize() const;
  static ModelConfig parse(const std::string& text);
};

}  // namespace panoos::model
