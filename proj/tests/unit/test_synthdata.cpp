#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <iomanip>
#include <limits>
#include <set>

#include "checksum.hpp"
#include "panoos/numerics/errors.hpp"
#include "panoos/synthdata/raster.hpp"
#include "panoos/synthdata/scene.hpp"

using namespace panoos;
using namespace panoos::data;

namespace {

// Frozen from the first verified run.
constexpr double GOLDEN_SCENE_SUM = 190.83633086486336;
constexpr double GOLDEN_SCENE_SUMSQ = 693288.79600421747;
constexpr std::uint64_t GOLDEN_SCENE_LABELS = 18166846675868287655ULL;

std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("panoos_synth_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST(Raster, ScoreHeaderParses) {
  std::string bytes = "POSM 2 3\n";
  const float vals[6] = {0.f, 1.f, -2.5f, 3.25f, 1e-3f, 7.f};
  for (float f : vals) {
    const auto bits = std::bit_cast<std::uint32_t>(f);
    for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
  }
  const ScoreMap m = decode_score_map(bytes);
  EXPECT_EQ(m.height, 2u);
  EXPECT_EQ(m.width, 3u);
  EXPECT_EQ(m.values[2], -2.5f);
  EXPECT_EQ(m.values[5], 7.f);
}

TEST(Raster, RoundTripsAreBitExact) {
  ScoreMap s{2, 2, {0.1f, -0.0f, 3e-38f, 12345.678f}};
  EXPECT_EQ(encode_score_map(decode_score_map(encode_score_map(s))), encode_score_map(s));
  const ScoreMap s2 = decode_score_map(encode_score_map(s));
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(std::bit_cast<std::uint32_t>(s2.values[i]), std::bit_cast<std::uint32_t>(s.values[i]));
  }

  LabelMap l{1, 4, {0, 5, 254, 255}};
  EXPECT_EQ(decode_label_map(encode_label_map(l)).values, l.values);

  Tensor e = Tensor::matrix({{0.1, -1e-300}, {std::numeric_limits<double>::max(), 4.0}});
  EXPECT_EQ(decode_embedding(encode_embedding(e)), e);
}

TEST(Raster, FileRoundTrip) {
  const auto dir = scratch_dir("files");
  Tensor e = Tensor::matrix({{1, 2, 3}});
  write_embedding(dir / "a.pose", e);
  EXPECT_EQ(read_embedding(dir / "a.pose"), e);
  EXPECT_THROW(read_embedding(dir / "missing.pose"), IoError);
}

TEST(Raster, CorruptMagicIsFormatError) {
  std::string bytes = encode_label_map(LabelMap{1, 2, {1, 2}});
  bytes[1] = 'X';
  try {
    decode_label_map(bytes);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.offset(), 0u);
  }
  EXPECT_THROW(decode_score_map(encode_label_map(LabelMap{1, 1, {0}})), FormatError);
}

TEST(Raster, TruncatedPayloadReportsOffset) {
  std::string bytes = encode_embedding(Tensor::matrix({{1, 2}, {3, 4}}));
  bytes.resize(bytes.size() - 3);
  try {
    decode_embedding(bytes);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.offset(), bytes.size());
  }
}

TEST(Raster, DimensionOverflowRejected) {
  EXPECT_THROW(decode_label_map("POSL 99999999999999999999999 2\n"), FormatError);
  EXPECT_THROW(decode_label_map("POSL 4294967296 4294967296\n"), FormatError);
  EXPECT_THROW(decode_label_map("POSL 0 2\n"), FormatError);
  EXPECT_THROW(decode_label_map("POSL 2 2"), FormatError);
  EXPECT_THROW(decode_label_map(encode_label_map(LabelMap{1, 1, {3}}) + "x"), FormatError);
}

TEST(Raster, RefusesNonFiniteWrites) {
  ScoreMap s{1, 2, {1.f, std::numeric_limits<float>::quiet_NaN()}};
  EXPECT_THROW(encode_score_map(s), NumericError);
  Tensor e = Tensor::matrix({{std::numeric_limits<double>::infinity()}});
  EXPECT_THROW(encode_embedding(e), NumericError);
}

TEST(Distortion, Examples) {
  for (double v : distortion_field(64, 0.0)) EXPECT_EQ(v, 1.0);
  const auto f = distortion_field(256, 0.5);
  EXPECT_EQ(f[128], 1.0);
  EXPECT_EQ(f[0], 1.5);
  for (std::size_t w = 1; w < 128; ++w) EXPECT_DOUBLE_EQ(f[128 - w], f[128 + w]);
}

TEST(Distortion, NonDecreasingAwayFromCenter) {
  const auto f = distortion_field(256, 0.7);
  for (std::size_t w = 129; w < 256; ++w) EXPECT_GE(f[w], f[w - 1]);
  for (std::size_t w = 0; w < 128; ++w) EXPECT_GE(f[w], f[w + 1]);
}

TEST(Scene, Deterministic) {
  SceneConfig cfg;
  const SceneSample a = generate_scene(cfg, 3);
  const SceneSample b = generate_scene(cfg, 3);
  EXPECT_EQ(a.features, b.features);
  EXPECT_EQ(a.labels.values, b.labels.values);
  const SceneSample c = generate_scene(cfg, 4);
  EXPECT_NE(a.labels.values, c.labels.values);
}

TEST(Scene, LegalLabelsAndAllClassesPresent) {
  SceneConfig cfg;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const SceneSample s = generate_scene(cfg, seed);
    std::set<int> seen;
    for (std::uint8_t v : s.labels.values) {
      EXPECT_TRUE(v < cfg.classes || v == kIgnoreLabel) << int(v);
      seen.insert(v);
    }
    EXPECT_EQ(seen.size(), cfg.classes + 1);
    // Top row is class 0, bottom row is the last class.
    EXPECT_EQ(s.labels.at(0, 17), 0);
    EXPECT_EQ(s.labels.at(cfg.height - 1, 17), cfg.classes - 1);
  }
}

TEST(Scene, NoiselessNearestMeanIsPerfect) {
  SceneConfig cfg;
  cfg.snr = std::numeric_limits<double>::infinity();
  const SceneSample s = generate_scene(cfg, 9);
  const Tensor means = class_means(cfg);
  const std::size_t H = cfg.height, W = cfg.width, D = cfg.feature_dim;
  for (std::size_t p = 0; p < H * W; ++p) {
    const std::uint8_t label = s.labels.values[p];
    if (label == kIgnoreLabel) continue;
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < cfg.classes; ++k) {
      double d2 = 0.0;
      for (std::size_t d = 0; d < D; ++d) {
        const double diff = s.features[d * H * W + p] - means.at(k, d);
        d2 += diff * diff;
      }
      if (d2 < best_d) best_d = d2, best = k;
    }
    ASSERT_EQ(best, label) << "pixel " << p;
  }
}

TEST(Scene, InvalidDimsRejected) {
  SceneConfig cfg;
  cfg.height = 60;
  EXPECT_THROW(generate_scene(cfg, 1), ContractError);
  cfg.height = 64;
  cfg.classes = 1;
  EXPECT_THROW(generate_scene(cfg, 1), ContractError);
}

TEST(Scene, GoldenChecksumSeed7) {
  const SceneSample s = generate_scene(SceneConfig{}, 7);
  const auto c = testutil::checksum(s.features);
  const auto h = testutil::fnv1a(s.labels.values);
  EXPECT_TRUE(testutil::close_rel(c.sum, GOLDEN_SCENE_SUM, 1e-9)) << std::setprecision(17) << c.sum;
  EXPECT_TRUE(testutil::close_rel(c.sum_sq, GOLDEN_SCENE_SUMSQ, 1e-9)) << std::setprecision(17) << c.sum_sq;
  EXPECT_EQ(h, GOLDEN_SCENE_LABELS) << h;
}

TEST(OutlierBank, PatchesAreBoundedEllipses) {
  SceneConfig cfg;
  const OutlierBank bank = make_outlier_bank(cfg, 20, 5);
  ASSERT_EQ(bank.size(), 20u);
  const Tensor means = class_means(cfg);
  for (const auto& p : bank) {
    EXPECT_LE(p.mask.height * p.mask.width * 4, cfg.height * cfg.width);
    EXPECT_LE(p.mask.height, cfg.height / 2);
    EXPECT_LE(p.mask.width, cfg.width / 2);
    // Centre inside, corner outside.
    EXPECT_EQ(p.mask.at(p.mask.height / 2, p.mask.width / 2), 1);
    EXPECT_EQ(p.mask.at(0, 0), 0);
    EXPECT_EQ(p.features.dim(0), cfg.feature_dim);
  }
  const OutlierBank again = make_outlier_bank(cfg, 20, 5);
  EXPECT_EQ(again[7].features, bank[7].features);
}

TEST(OutlierBank, NoiselessPatchesUseHeldOutMeans) {
  SceneConfig cfg;
  cfg.snr = std::numeric_limits<double>::infinity();
  const Tensor means = class_means(cfg);
  const OutlierBank bank = make_outlier_bank(cfg, 8, 2);
  for (const auto& p : bank) {
    bool matched_outlier = false;
    for (std::size_t c = cfg.classes; c < cfg.classes + cfg.outlier_classes; ++c) {
      bool same = true;
      for (std::size_t d = 0; d < cfg.feature_dim; ++d) same &= p.features[d * p.mask.height * p.mask.width] == means.at(c, d);
      matched_outlier |= same;
    }
    EXPECT_TRUE(matched_outlier);
  }
}

TEST(Paste, RelabelsMaskedPixelsOnly) {
  SceneConfig cfg;
  SceneSample s = generate_scene(cfg, 1);
  const OutlierBank bank = make_outlier_bank(cfg, 1, 1);
  const auto& p = bank[0];
  paste_patch(s, p, 3, 10);
  std::size_t mask_count = 0, outliers = 0;
  for (auto v : p.mask.values) mask_count += v;
  for (auto v : s.labels.values) outliers += v == kOutlierLabel;
  EXPECT_EQ(outliers, mask_count);
  EXPECT_THROW(paste_patch(s, p, cfg.height, 0), ContractError);
}

TEST(Dataset, SaveLoadAndManifest) {
  const auto dir = scratch_dir("dataset");
  SceneConfig cfg;
  const SceneSample s = generate_scene(cfg, 2);
  save_sample(dir / "s0.pose", dir / "s0.posl", s);
  write_manifest(dir / "list.txt", {{dir / "s0.pose", dir / "s0.posl"}});
  EXPECT_EQ(read_file(dir / "list.txt"), "s0.pose s0.posl\n");
  const auto loaded = load_dataset(dir / "list.txt");
  ASSERT_EQ(loaded.size(), 1u);
  EXPECT_EQ(loaded[0].features, s.features);
  EXPECT_EQ(loaded[0].labels.values, s.labels.values);

  write_file(dir / "bad.txt", "only-one-field\n");
  EXPECT_THROW(read_manifest(dir / "bad.txt"), FormatError);
  EXPECT_THROW(read_manifest(dir / "nope.txt"), IoError);
}
