#include "panoos/synthdata/scene.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include "panoos/numerics/errors.hpp"
#include "panoos/numerics/random.hpp"

namespace panoos::data {

namespace {

constexpr std::uint64_t kLayoutStream = 0x1a40u;
constexpr std::uint64_t kNoiseStream = 0x2015eu;
constexpr std::uint64_t kMeanStream = 0x3ea9u;
constexpr std::uint64_t kBankStream = 0x4ba9u;

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

// Entry paths are taken relative to the working directory.
std::filesystem::path relative_to(const std::filesystem::path& p, const std::filesystem::path& base) {
  const auto abs = std::filesystem::absolute(p).lexically_normal();
  auto rel = abs.lexically_relative(base);
  return rel.empty() ? abs : rel;
}

}  // namespace

void SceneConfig::validate() const {
  if (height == 0 || width == 0 || height % 32 != 0 || width % 32 != 0) {
    throw ContractError("scene height and width must be positive multiples of 32, got " + std::to_string(height) +
                        "x" + std::to_string(width));
  }
  if (classes < 2) throw ContractError("scene needs at least 2 classes");
  if (classes >= kOutlierLabel) throw ContractError("too many classes for 8-bit labels");
  if (height < 4 * classes) throw ContractError("scene too short for " + std::to_string(classes) + " bands");
  if (feature_dim == 0) throw ContractError("feature_dim must be positive");
  if (!(snr > 0.0)) throw ContractError("snr must be positive");
  if (!(distortion >= 0.0) || !std::isfinite(distortion)) throw ContractError("distortion must be finite and >= 0");
  if (!(jitter >= 0.0) || !std::isfinite(jitter)) throw ContractError("jitter must be finite and >= 0");
}

double SceneConfig::noise_sigma() const { return std::isinf(snr) ? 0.0 : 1.0 / snr; }

std::vector<double> distortion_field(std::size_t width, double gamma) {
  std::vector<double> field(width);
  const double W = static_cast<double>(width);
  for (std::size_t w = 0; w < width; ++w) field[w] = 1.0 + gamma * std::abs(2.0 * static_cast<double>(w) / W - 1.0);
  return field;
}

Tensor class_means(const SceneConfig& cfg) {
  const std::size_t rows = cfg.classes + cfg.outlier_classes;
  Tensor means({rows, cfg.feature_dim});
  for (std::size_t c = 0; c < rows; ++c) {
    Rng rng(mix_seed(cfg.mean_seed, kMeanStream, c));
    for (std::size_t d = 0; d < cfg.feature_dim; ++d) means.at(c, d) = rng.normal();
  }
  return means;
}

SceneSample generate_scene(const SceneConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const std::size_t H = cfg.height, W = cfg.width, K = cfg.classes, D = cfg.feature_dim;

  Rng layout(mix_seed(seed, kLayoutStream));
  std::vector<double> weights(K);
  double total = 0.0;
  for (double& w : weights) total += (w = layout.uniform(0.6, 1.4));
  std::vector<double> base(K, 0.0);
  std::vector<double> freq(K, 0.0), phase(K, 0.0), amp(K, 0.0);
  double acc = 0.0;
  for (std::size_t k = 1; k < K; ++k) {
    acc += weights[k - 1];
    base[k] = acc / total * static_cast<double>(H);
    freq[k] = static_cast<double>(1 + layout.below(2));
    phase[k] = layout.uniform(0.0, 2.0 * std::numbers::pi);
    amp[k] = cfg.jitter * layout.uniform(0.5, 1.0);
  }

  // bounds[x * K + k]: first row of band k in column x (band 0 starts at 0).
  std::vector<std::size_t> bounds(W * K, 0);
  for (std::size_t x = 0; x < W; ++x) {
    long prev = 0;
    for (std::size_t k = 1; k < K; ++k) {
      const double wobble = amp[k] * std::sin(2.0 * std::numbers::pi * freq[k] * static_cast<double>(x) /
                                                  static_cast<double>(W) + phase[k]);
      long row = std::lround(base[k] + wobble);
      const long lo = prev + 2;
      const long hi = static_cast<long>(H) - 2 * static_cast<long>(K - k);
      row = std::clamp(row, lo, hi);
      bounds[x * K + k] = static_cast<std::size_t>(row);
      prev = row;
    }
  }

  const Tensor means = class_means(cfg);
  const std::vector<double> field = distortion_field(W, cfg.distortion);
  const double sigma = cfg.noise_sigma();

  SceneSample sample;
  sample.features = Tensor({D, H, W});
  sample.labels = LabelMap{H, W, std::vector<std::uint8_t>(H * W)};
  Rng noise(mix_seed(seed, kNoiseStream));
  for (std::size_t y = 0; y < H; ++y) {
    for (std::size_t x = 0; x < W; ++x) {
      std::size_t k = 0;
      bool on_boundary = false;
      for (std::size_t b = 1; b < K; ++b) {
        if (y >= bounds[x * K + b]) k = b;
        if (y == bounds[x * K + b]) on_boundary = true;
      }
      sample.labels.values[y * W + x] = on_boundary ? kIgnoreLabel : static_cast<std::uint8_t>(k);
      for (std::size_t d = 0; d < D; ++d) {
        const double n = sigma > 0.0 ? noise.normal() : 0.0;
        sample.features[(d * H + y) * W + x] = means.at(k, d) + sigma * field[x] * n;
      }
    }
  }
  return sample;
}

OutlierBank make_outlier_bank(const SceneConfig& cfg, std::size_t count, std::uint64_t seed) {
  cfg.validate();
  if (cfg.outlier_classes == 0) throw ContractError("outlier bank needs at least one outlier class");
  const Tensor means = class_means(cfg);
  const double sigma = cfg.noise_sigma();
  const std::size_t D = cfg.feature_dim;
  const std::size_t hmin = std::max<std::size_t>(4, cfg.height / 8);
  const std::size_t hmax = cfg.height / 2;

  OutlierBank bank;
  bank.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng(mix_seed(seed, kBankStream, i));
    const std::size_t cls = cfg.classes + rng.below(cfg.outlier_classes);
    const std::size_t h = hmin + rng.below(hmax - hmin + 1);
    const std::size_t w = std::min(h + rng.below(h + 1), cfg.width / 2);

    OutlierPatch patch;
    patch.features = Tensor({D, h, w});
    patch.mask = LabelMap{h, w, std::vector<std::uint8_t>(h * w, 0)};
    const double ry = static_cast<double>(h) / 2.0, rx = static_cast<double>(w) / 2.0;
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        const double dy = (static_cast<double>(y) + 0.5 - ry) / ry;
        const double dx = (static_cast<double>(x) + 0.5 - rx) / rx;
        patch.mask.values[y * w + x] = dy * dy + dx * dx <= 1.0 ? 1 : 0;
        for (std::size_t d = 0; d < D; ++d) {
          const double n = sigma > 0.0 ? rng.normal() : 0.0;
          patch.features[(d * h + y) * w + x] = means.at(cls, d) + sigma * n;
        }
      }
    }
    bank.push_back(std::move(patch));
  }
  return bank;
}

void paste_patch(SceneSample& sample, const OutlierPatch& patch, std::size_t top, std::size_t left) {
  const std::size_t h = patch.mask.height, w = patch.mask.width;
  const std::size_t H = sample.height(), W = sample.width(), D = sample.channels();
  if (patch.features.rank() != 3 || patch.features.dim(0) != D || patch.features.dim(1) != h ||
      patch.features.dim(2) != w) {
    throw ContractError("patch features " + shape_str(patch.features.shape()) + " do not match mask " +
                        std::to_string(h) + "x" + std::to_string(w) + " with " + std::to_string(D) + " channels");
  }
  if (h > H || w > W || top > H - h || left > W - w) {
    throw ContractError("patch " + std::to_string(h) + "x" + std::to_string(w) + " at (" + std::to_string(top) + "," +
                        std::to_string(left) + ") does not fit scene " + std::to_string(H) + "x" + std::to_string(W));
  }
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      if (!patch.mask.values[y * w + x]) continue;
      sample.labels.values[(top + y) * W + left + x] = kOutlierLabel;
      for (std::size_t d = 0; d < D; ++d) {
        sample.features[(d * H + top + y) * W + left + x] = patch.features[(d * h + y) * w + x];
      }
    }
  }
}

void save_sample(const std::filesystem::path& feature_file, const std::filesystem::path& label_file,
                 const SceneSample& sample) {
  const std::size_t D = sample.channels(), H = sample.height(), W = sample.width();
  write_embedding(feature_file, sample.features.reshaped({D * H, W}));
  write_label_map(label_file, sample.labels);
}

SceneSample load_sample(const std::filesystem::path& feature_file, const std::filesystem::path& label_file) {
  SceneSample sample;
  sample.labels = read_label_map(label_file);
  const Tensor flat = read_embedding(feature_file);
  const std::size_t H = sample.labels.height, W = sample.labels.width;
  if (flat.dim(1) != W || flat.dim(0) % H != 0) {
    throw FormatError("feature raster " + shape_str(flat.shape()) + " in " + feature_file.string() +
                          " does not stack over labels " + std::to_string(H) + "x" + std::to_string(W),
                      0);
  }
  sample.features = flat.reshaped({flat.dim(0) / H, H, W});
  return sample;
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw IoError("cannot open manifest " + manifest.string());
  const std::filesystem::path base = manifest.parent_path();
  std::vector<ManifestEntry> entries;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream fields(line);
    std::string a, b, extra;
    if (!(fields >> a) || a.front() == '#') continue;
    if (!(fields >> b) || (fields >> extra)) {
      throw FormatError(manifest.string() + ":" + std::to_string(lineno) + ": expected \"<feature-file> <label-file>\"",
                        lineno);
    }
    entries.push_back({resolve(base, a), resolve(base, b)});
  }
  return entries;
}

void write_manifest(const std::filesystem::path& manifest, const std::vector<ManifestEntry>& entries) {
  const std::filesystem::path base = std::filesystem::absolute(manifest).lexically_normal().parent_path();
  std::ostringstream out;
  for (const auto& e : entries) {
    out << relative_to(e.features, base).generic_string() << ' ' << relative_to(e.labels, base).generic_string()
        << '\n';
  }
  write_file(manifest, out.str());
}

std::vector<SceneSample> load_dataset(const std::filesystem::path& manifest) {
  std::vector<SceneSample> samples;
  for (const auto& e : read_manifest(manifest)) samples.push_back(load_sample(e.features, e.labels));
  return samples;
}

OutlierBank load_bank(const std::filesystem::path& manifest) {
  OutlierBank bank;
  for (const auto& e : read_manifest(manifest)) {
    SceneSample s = load_sample(e.features, e.labels);
    bank.push_back({std::move(s.features), std::move(s.labels)});
  }
  return bank;
}

}  // namespace panoos::data
