#include "panoos/evaluation/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include "panoos/numerics/errors.hpp"
#include "panoos/synthdata/scene.hpp"

namespace panoos::eval {

void PixelPool::add(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  if (scores.size() != labels.size()) {
    throw DimensionError("score map has " + std::to_string(scores.size()) + " pixels, label map " +
                         std::to_string(labels.size()));
  }
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] == data::kIgnoreLabel) {
      ++ignored_;
      continue;
    }
    if (!std::isfinite(scores[i])) throw EvaluationError("non-finite score at pixel " + std::to_string(i));
    const bool positive = labels[i] == data::kOutlierLabel;
    pixels_.emplace_back(scores[i], positive);
    positive ? ++positives_ : ++negatives_;
  }
}

void PixelPool::add(const data::ScoreMap& scores, const data::LabelMap& labels) {
  if (scores.height != labels.height || scores.width != labels.width) {
    throw DimensionError("score map " + std::to_string(scores.height) + "x" + std::to_string(scores.width) +
                         " does not match label map " + std::to_string(labels.height) + "x" +
                         std::to_string(labels.width));
  }
  std::vector<double> s(scores.values.begin(), scores.values.end());
  add(s, labels.values);
}

PrCurve PixelPool::curve() const {
  if (positives_ == 0) throw EvaluationError("undefined recall: no outlier pixels");
  if (negatives_ == 0) throw EvaluationError("no inlier pixels");
  std::vector<std::pair<double, bool>> sorted = pixels_;
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.first > b.first; });

  PrCurve c;
  c.positives = positives_;
  c.negatives = negatives_;
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < sorted.size();) {
    const double tau = sorted[i].first;
    for (; i < sorted.size() && sorted[i].first == tau; ++i) sorted[i].second ? ++tp : ++fp;
    PrPoint p;
    p.threshold = tau;
    p.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    p.recall = static_cast<double>(tp) / static_cast<double>(positives_);
    p.fpr = static_cast<double>(fp) / static_cast<double>(negatives_);
    c.points.push_back(p);
  }
  return c;
}

PrCurve pr_curve(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  PixelPool pool;
  pool.add(scores, labels);
  return pool.curve();
}

double auprc(const PrCurve& curve) {
  double area = 0.0, prev = 0.0;
  for (const PrPoint& p : curve.points) {
    area += (p.recall - prev) * p.precision;
    prev = p.recall;
  }
  return area;
}

double fpr95(const PrCurve& curve) {
  for (const PrPoint& p : curve.points) {
    if (p.recall >= 0.95) return p.fpr;
  }
  throw EvaluationError("curve never reaches TPR 0.95");
}

IouCounter::IouCounter(std::size_t classes) : classes_(classes), inter_(classes, 0), uni_(classes, 0) {}

void IouCounter::add(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> gt) {
  if (pred.size() != gt.size()) {
    throw DimensionError("prediction has " + std::to_string(pred.size()) + " pixels, ground truth " +
                         std::to_string(gt.size()));
  }
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const std::uint8_t g = gt[i], p = pred[i];
    if (g == data::kIgnoreLabel || g == data::kOutlierLabel) continue;
    if (g >= classes_) throw ContractError("ground-truth label " + std::to_string(g) + " outside the class range");
    if (p >= classes_) throw ContractError("predicted label " + std::to_string(p) + " outside the class range");
    ++counted_;
    if (p == g) {
      ++inter_[g];
      ++uni_[g];
    } else {
      ++uni_[g];
      ++uni_[p];
    }
  }
}

std::vector<double> IouCounter::per_class() const {
  std::vector<double> iou(classes_, std::numeric_limits<double>::quiet_NaN());
  for (std::size_t k = 0; k < classes_; ++k) {
    if (uni_[k] > 0) iou[k] = static_cast<double>(inter_[k]) / static_cast<double>(uni_[k]);
  }
  return iou;
}

double IouCounter::miou() const {
  if (counted_ == 0) throw EvaluationError("no evaluable pixels");
  double sum = 0.0;
  std::size_t n = 0;
  for (double v : per_class()) {
    if (std::isnan(v)) continue;
    sum += v;
    ++n;
  }
  return sum / static_cast<double>(n);
}

MiouResult miou(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> gt, std::size_t classes) {
  IouCounter c(classes);
  c.add(pred, gt);
  return {c.miou(), c.per_class()};
}

namespace {

std::string fmt(double v) {
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

}  // namespace

std::string EvalReport::text() const {
  std::ostringstream s;
  s << std::fixed << std::setprecision(4);
  s << "images          " << images << '\n'
    << "pixels          inlier " << inlier_pixels << ", outlier " << outlier_pixels << ", ignored "
    << ignored_pixels << '\n'
    << "AuPRC           " << 100.0 * auprc << '\n'
    << "FPR95           " << 100.0 * fpr95 << '\n'
    << "mIoU            " << 100.0 * miou << '\n';
  for (std::size_t k = 0; k < per_class_iou.size(); ++k) {
    s << "IoU class " << std::setw(2) << k << "    ";
    if (std::isnan(per_class_iou[k])) {
      s << "n/a\n";
    } else {
      s << 100.0 * per_class_iou[k] << '\n';
    }
  }
  return s.str();
}

std::string EvalReport::csv() const {
  std::ostringstream s;
  s << "metric,value\n"
    << "auprc," << fmt(auprc) << '\n'
    << "fpr95," << fmt(fpr95) << '\n'
    << "miou," << fmt(miou) << '\n';
  for (std::size_t k = 0; k < per_class_iou.size(); ++k) s << "iou_class_" << k << ',' << fmt(per_class_iou[k]) << '\n';
  s << "inlier_pixels," << inlier_pixels << '\n'
    << "outlier_pixels," << outlier_pixels << '\n'
    << "ignored_pixels," << ignored_pixels << '\n'
    << "images," << images << '\n';
  return s.str();
}

EvalReport evaluate_run(const std::filesystem::path& scores, const std::filesystem::path& labels,
                        const std::filesystem::path& manifest) {
  const std::vector<data::ManifestEntry> entries = data::read_manifest(manifest);
  if (entries.empty()) throw EvaluationError("manifest " + manifest.string() + " lists no scenes");

  struct Loaded {
    data::LabelMap gt, pred;
  };
  std::vector<Loaded> loaded;
  loaded.reserve(entries.size());
  PixelPool pool;
  std::size_t classes = 0;
  for (const data::ManifestEntry& e : entries) {
    const std::string stem = e.labels.stem().string();
    Loaded l;
    l.gt = data::read_label_map(labels / (stem + ".posl"));
    l.pred = data::read_label_map(scores / (stem + ".pred.posl"));
    if (l.pred.height != l.gt.height || l.pred.width != l.gt.width) {
      throw DimensionError("prediction for " + stem + " does not match its ground truth size");
    }
    pool.add(data::read_score_map(scores / (stem + ".posm")), l.gt);
    for (const data::LabelMap* m : {&l.gt, &l.pred}) {
      for (std::uint8_t v : m->values) {
        if (v != data::kIgnoreLabel && v != data::kOutlierLabel) classes = std::max<std::size_t>(classes, v + 1u);
      }
    }
    loaded.push_back(std::move(l));
  }

  IouCounter iou(classes);
  for (const Loaded& l : loaded) iou.add(l.pred.values, l.gt.values);

  EvalReport r;
  const PrCurve curve = pool.curve();
  r.auprc = auprc(curve);
  r.fpr95 = fpr95(curve);
  r.miou = iou.miou();
  r.per_class_iou = iou.per_class();
  r.inlier_pixels = pool.negatives();
  r.outlier_pixels = pool.positives();
  r.ignored_pixels = pool.ignored();
  r.images = entries.size();
  return r;
}

}  // namespace panoos::eval
