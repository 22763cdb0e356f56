#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <string_view>

#include "panoos/decoder/model.hpp"

// Binary checkpoint, little-endian:
//   "POSCKPT1"
//   u32 length + model config text (ModelConfig::serialize)
//   u32 parameter count, then per parameter:
//     u32 length + group tag, u32 length + name, u32 rank, rank x u64 dims,
//     f64 values
namespace panoos::train {

std::string encode_checkpoint(model::Model& model);
/// Rebuilds the model from the embedded config and restores every parameter.
std::unique_ptr<model::Model> decode_checkpoint(std::string_view bytes);

void save_checkpoint(const std::filesystem::path& path, model::Model& model);
std::unique_ptr<model::Model> load_checkpoint(const std::filesystem::path& path);

}  // namespace panoos::train
