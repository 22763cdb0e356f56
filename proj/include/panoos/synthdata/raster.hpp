#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "panoos/numerics/tensor.hpp"

// Portable raster files. Each starts with an ASCII header line
// "<MAGIC> <rows> <cols>\n" followed by rows*cols little-endian values in
// row-major order:
//   POSM  score map        float32
//   POSL  label map        uint8
//   POSE  embedding matrix float64
namespace panoos::data {

struct ScoreMap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<float> values;
};

struct LabelMap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> values;

  std::uint8_t at(std::size_t y, std::size_t x) const { return values[y * width + x]; }
};

std::string encode_score_map(const ScoreMap& map);
std::string encode_label_map(const LabelMap& map);
std::string encode_embedding(const Tensor& matrix);

ScoreMap decode_score_map(std::string_view bytes);
LabelMap decode_label_map(std::string_view bytes);
Tensor decode_embedding(std::string_view bytes);

void write_score_map(const std::filesystem::path& path, const ScoreMap& map);
void write_label_map(const std::filesystem::path& path, const LabelMap& map);
void write_embedding(const std::filesystem::path& path, const Tensor& matrix);

ScoreMap read_score_map(const std::filesystem::path& path);
LabelMap read_label_map(const std::filesystem::path& path);
Tensor read_embedding(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace panoos::data
