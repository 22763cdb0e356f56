#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "panoos/numerics/tensor.hpp"
#include "panoos/synthdata/raster.hpp"

namespace panoos::data {

inline constexpr std::uint8_t kOutlierLabel = 254;
inline constexpr std::uint8_t kIgnoreLabel = 255;

struct SceneConfig {
  std::size_t height = 64;
  std::size_t width = 256;
  std::size_t classes = 6;
  std::size_t feature_dim = 16;
  // Noise standard deviation is 1/snr; infinity gives noiseless scenes.
  double snr = 1.0;
  double distortion = 0.5;
  // Amplitude in rows of the sinusoidal band-boundary wobble.
  double jitter = 3.0;
  // Held-out classes whose means feed the outlier bank.
  std::size_t outlier_classes = 4;
  // Seeds the class mean vectors, shared by every scene of one world.
  std::uint64_t mean_seed = 7;

  /// Throws ContractError on illegal dimensions.
  void validate() const;
  double noise_sigma() const;
};

/// One synthetic panorama: full-resolution features [D, H, W] and labels.
struct SceneSample {
  Tensor features;
  LabelMap labels;

  std::size_t channels() const { return features.dim(0); }
  std::size_t height() const { return labels.height; }
  std::size_t width() const { return labels.width; }
};

/// Noise multiplier 1 + gamma * |2w/W - 1| for every column w.
std::vector<double> distortion_field(std::size_t width, double gamma);

/// (classes + outlier_classes) x feature_dim; rows 0..K-1 are inlier means.
Tensor class_means(const SceneConfig& cfg);

SceneSample generate_scene(const SceneConfig& cfg, std::uint64_t seed);

struct OutlierPatch {
  Tensor features;  // [D, h, w]
  LabelMap mask;    // 1 inside the ellipse, 0 outside
};
using OutlierBank = std::vector<OutlierPatch>;

OutlierBank make_outlier_bank(const SceneConfig& cfg, std::size_t count, std::uint64_t seed);

/// Copies masked patch pixels into the sample at (top, left) and labels them
/// as outliers. Throws ContractError if the patch does not fit.
void paste_patch(SceneSample& sample, const OutlierPatch& patch, std::size_t top, std::size_t left);

// On-disk layout: features as a POSE matrix of D*H rows by W columns,
// labels as POSL.
void save_sample(const std::filesystem::path& feature_file, const std::filesystem::path& label_file,
                 const SceneSample& sample);
SceneSample load_sample(const std::filesystem::path& feature_file, const std::filesystem::path& label_file);

struct ManifestEntry {
  std::filesystem::path features;
  std::filesystem::path labels;
};

/// One "<feature-file> <label-file>" pair per line; blank lines and lines
/// starting with '#' are skipped. Relative paths resolve against the
/// manifest's directory.
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& manifest);
/// Writes entries with paths relative to the manifest's directory; relative
/// entry paths are first resolved against the working directory.
void write_manifest(const std::filesystem::path& manifest, const std::vector<ManifestEntry>& entries);

std::vector<SceneSample> load_dataset(const std::filesystem::path& manifest);
OutlierBank load_bank(const std::filesystem::path& manifest);

}  // namespace panoos::data
