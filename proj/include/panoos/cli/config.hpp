#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>

#include "panoos/decoder/config.hpp"
#include "panoos/synthdata/scene.hpp"
#include "panoos/training/trainer.hpp"

namespace panoos::cli {

/// Everything a pipeline run reads from its "key = value" config file. The
/// model's class count and feature width always follow the scene keys, and
/// every random stream derives from `seed`.
struct RunConfig {
  std::uint64_t seed = 7;
  data::SceneConfig scene;
  std::size_t train_count = 64;
  std::size_t eval_count = 50;
  std::size_t bank_size = 16;
  std::size_t eval_bank_size = 16;
  model::ModelConfig model = default_model();
  // Optional POSE file of (K+3) raw text embeddings replacing the synthetic ones.
  std::filesystem::path text_embeddings;
  train::TrainConfig train = default_train();
  train::TrainConfig finetune = default_finetune();

  /// Throws ConfigError naming the offending key.
  void validate() const;

  model::ModelConfig model_config() const;
  train::TrainConfig train_config() const;
  train::TrainConfig finetune_config() const;

  /// Every key with its effective value; parse(serialize()) reproduces *this.
  std::string serialize() const;
  /// Throws ConfigError with the line number on unknown keys, duplicate keys,
  /// malformed lines or unparsable values.
  static RunConfig parse(const std::string& text);
  static RunConfig load(const std::filesystem::path& path);

  static model::ModelConfig default_model();
  static train::TrainConfig default_train();
  static train::TrainConfig default_finetune();
};

}  // namespace panoos::cli
