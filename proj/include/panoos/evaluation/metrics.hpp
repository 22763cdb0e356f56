#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "panoos/synthdata/raster.hpp"

// Pixel-level outlier metrics with outliers (label 254) as positives. Pixels
// labelled 255 are dropped; every other label counts as an inlier.
namespace panoos::eval {

struct PrPoint {
  double threshold = 0.0;
  double precision = 0.0;
  double recall = 0.0;  // equals TPR
  double fpr = 0.0;
};

/// One point per distinct score, thresholds descending; a pixel is predicted
/// positive when its score >= threshold.
struct PrCurve {
  std::vector<PrPoint> points;
  std::size_t positives = 0;
  std::size_t negatives = 0;
};

/// Scores paired with label codes; several maps can be appended before the
/// curve is built so counts pool over a whole dataset.
class PixelPool {
 public:
  void add(std::span<const double> scores, std::span<const std::uint8_t> labels);
  void add(const data::ScoreMap& scores, const data::LabelMap& labels);

  std::size_t positives() const noexcept { return positives_; }
  std::size_t negatives() const noexcept { return negatives_; }
  std::size_t ignored() const noexcept { return ignored_; }

  PrCurve curve() const;

 private:
  std::vector<std::pair<double, bool>> pixels_;
  std::size_t positives_ = 0;
  std::size_t negatives_ = 0;
  std::size_t ignored_ = 0;
};

PrCurve pr_curve(std::span<const double> scores, std::span<const std::uint8_t> labels);

/// Sum over points of (recall_j - recall_{j-1}) * precision_j, recall_0 = 0.
double auprc(const PrCurve& curve);
/// FPR at the largest threshold whose TPR >= 0.95.
double fpr95(const PrCurve& curve);

/// Accumulates per-class intersections and unions over pixels whose ground
/// truth is a known class.
class IouCounter {
 public:
  explicit IouCounter(std::size_t classes);
  void add(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> gt);

  /// Per-class IoU; NaN for classes absent from both prediction and truth.
  std::vector<double> per_class() const;
  /// Mean over classes present in prediction or truth.
  double miou() const;

 private:
  std::size_t classes_;
  std::vector<std::size_t> inter_, uni_;
  std::size_t counted_ = 0;
};

struct MiouResult {
  double miou = 0.0;
  std::vector<double> per_class;
};

MiouResult miou(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> gt, std::size_t classes);

struct EvalReport {
  double auprc = 0.0;
  double fpr95 = 0.0;
  double miou = 0.0;
  std::vector<double> per_class_iou;
  std::size_t inlier_pixels = 0;
  std::size_t outlier_pixels = 0;
  std::size_t ignored_pixels = 0;
  std::size_t images = 0;

  std::string text() const;
  /// "metric,value" rows.
  std::string csv() const;
};

/// For every manifest entry with label file <stem>.posl, reads
/// <scores>/<stem>.posm and <scores>/<stem>.pred.posl plus the ground truth
/// <labels>/<stem>.posl, pooling all pixels. The class count is one past the
/// largest known-class code seen; higher classes would be absent from both
/// sides and excluded anyway.
EvalReport evaluate_run(const std::filesystem::path& scores, const std::filesystem::path& labels,
                        const std::filesystem::path& manifest);

}  // namespace panoos::eval
