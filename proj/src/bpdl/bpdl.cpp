#include "panoos/bpdl/bpdl.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "panoos/numerics/errors.hpp"
#include "panoos/numerics/ops.hpp"
#include "panoos/numerics/random.hpp"
#include "panoos/synthdata/scene.hpp"

namespace panoos::bpdl {

namespace {

Var zero(Var like) { return like.tape()->constant(Tensor::scalar(0.0)); }

std::vector<std::size_t> repeat(std::size_t index, std::size_t times) { return std::vector<std::size_t>(times, index); }

std::vector<std::size_t> iota(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), std::size_t{0});
  return v;
}

// Squared Euclidean norm of each row -> [rows].
Var row_sq(Var x) { return ops::sum_lastdim(ops::square(x)); }

// Row-wise cosine with the 1e-12 guard added to both norms.
Var row_cos(Var a, Var b) {
  Var dot = ops::sum_lastdim(ops::mul(a, b));
  Var na = ops::add_scalar(ops::row_norm(a), kNormGuard);
  Var nb = ops::add_scalar(ops::row_norm(b), kNormGuard);
  return ops::div(dot, ops::mul(na, nb));
}

Var hinge(Var x) { return ops::relu(x); }

void check_prompts(Var prompts) {
  if (!prompts.valid()) throw ContractError("prompt rows are not set");
  const Shape& s = prompts.shape();
  if (s.size() != 2 || s[0] < 4) throw DimensionError("prompt rows must be [K+3, C_m] with K >= 1, got " + shape_str(s));
}

void check_width(Var x, Var prompts, const char* what) {
  const Shape& s = x.shape();
  if (s.size() != 2 || s[1] != prompts.shape()[1]) {
    throw DimensionError(std::string(what) + " must be [N, " + std::to_string(prompts.shape()[1]) + "], got " +
                         shape_str(s));
  }
}

}  // namespace

void BpdlConfig::validate() const {
  if (!(s > 0.0) || !(d > 0.0) || !(alpha > 0.0)) throw ConfigError("bpdl s, d and alpha must be strictly positive");
  // lambda = 0 is the loss-ablation setting.
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("bpdl lambda must be finite and non-negative");
}

std::size_t class_count(Var prompts) {
  check_prompts(prompts);
  return prompts.shape()[0] - 3;
}

std::vector<std::size_t> nearest_negatives(const Tensor& prompts) {
  const std::size_t n = prompts.dim(0) - 2, c = prompts.dim(1);
  std::vector<std::size_t> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      double d2 = 0.0;
      for (std::size_t k = 0; k < c; ++k) {
        const double t = prompts[i * c + k] - prompts[j * c + k];
        d2 += t * t;
      }
      if (d2 < best) {
        best = d2;
        out[i] = j;
      }
    }
  }
  return out;
}

Var loss_intra(const PixelPartition& part, Var prompts) {
  const std::size_t K = class_count(prompts);
  const std::size_t n = part.inlier_count();
  if (part.labels.size() != n) {
    throw ContractError("partition has " + std::to_string(n) + " inlier rows but " + std::to_string(part.labels.size()) +
                        " labels");
  }
  if (n == 0) return zero(prompts);
  check_width(part.inliers, prompts, "inlier embeddings");
  for (std::size_t i = 0; i < n; ++i) {
    if (part.labels[i] < 1 || part.labels[i] > K) {
      throw ContractError("inlier label " + std::to_string(part.labels[i]) + " at row " + std::to_string(i) +
                          " outside 1.." + std::to_string(K));
    }
  }
  Var own = ops::gather_rows(prompts, part.labels);
  return ops::scale(ops::sum(ops::square(ops::sub(part.inliers, own))), 1.0 / static_cast<double>(n));
}

Var loss_sep(Var prompts, double s) {
  const std::size_t K = class_count(prompts);
  const std::vector<std::size_t> nearest = nearest_negatives(prompts.value());
  Var diff = ops::sub(ops::gather_rows(prompts, iota(K + 1)), ops::gather_rows(prompts, nearest));
  Var h = hinge(ops::add_scalar(ops::scale(row_sq(diff), -1.0), s));
  return ops::mean(h);
}

Var loss_ori(Var prompts) {
  const std::size_t K = class_count(prompts);
  if (K + 1 < 3) return zero(prompts);
  const std::vector<std::size_t> nearest = nearest_negatives(prompts.value());
  const std::size_t others = K - 1;
  std::vector<std::size_t> anchor, neg, other;
  for (std::size_t i = 0; i <= K; ++i) {
    for (std::size_t o = 0; o <= K; ++o) {
      if (o == i || o == nearest[i]) continue;
      anchor.push_back(i);
      neg.push_back(nearest[i]);
      other.push_back(o);
    }
  }
  Var ti = ops::gather_rows(prompts, anchor);
  Var tn = ops::gather_rows(prompts, neg);
  Var to = ops::gather_rows(prompts, other);
  Var cos = row_cos(ops::sub(tn, ti), ops::sub(to, ti));
  Var dist = ops::reshape(ops::row_norm(ops::sub(tn, to)), {K + 1, others});
  Var w = ops::reshape(ops::softmax_lastdim(ops::scale(dist, -1.0)), {(K + 1) * others});
  Var terms = ops::mul(w, ops::add_scalar(cos, 1.0));
  return ops::scale(ops::sum(terms), 1.0 / static_cast<double>(K + 1));
}

Var loss_inter(Var prompts, double s) { return ops::add(loss_sep(prompts, s), loss_ori(prompts)); }

Var loss_pixel(const PixelPartition& part, Var prompts, double s) {
  return ops::add(loss_intra(part, prompts), loss_inter(prompts, s));
}

Var loss_ind(Var prompts) {
  const std::size_t K = class_count(prompts);
  Var diff = ops::sub(ops::gather_rows(prompts, iota(K + 1)), ops::gather_rows(prompts, repeat(K + 1, K + 1)));
  return ops::mean(row_sq(diff));
}

Var loss_in_dir(Var prompts) {
  const std::size_t K = class_count(prompts);
  Var t = ops::gather_rows(prompts, iota(K + 1));
  Var d_in = ops::sub(ops::gather_rows(prompts, repeat(K + 1, K + 1)), t);
  Var d_out = ops::sub(ops::gather_rows(prompts, repeat(K + 2, K + 1)), t);
  return ops::mean(ops::add_scalar(ops::scale(row_cos(d_in, d_out), -1.0), 1.0));
}

Var loss_inlier(Var prompts, double alpha) { return ops::add(ops::scale(loss_ind(prompts), alpha), loss_in_dir(prompts)); }

Var loss_outlier(const PixelPartition& part, Var prompts, double d) {
  const std::size_t K = class_count(prompts);
  const std::size_t n = part.outlier_count();
  if (n == 0) {
    Var gap = ops::sub(ops::gather_rows(prompts, repeat(K + 2, 1)), ops::gather_rows(prompts, repeat(K + 1, 1)));
    return ops::sum(hinge(ops::add_scalar(ops::scale(row_sq(gap), -1.0), d)));
  }
  check_width(part.outliers, prompts, "outlier embeddings");
  Var d_out = row_sq(ops::sub(part.outliers, ops::gather_rows(prompts, repeat(K + 2, n))));
  Var d_in = row_sq(ops::sub(part.outliers, ops::gather_rows(prompts, repeat(K + 1, n))));
  return ops::mean(hinge(ops::add_scalar(ops::sub(d_out, d_in), d)));
}

Var loss_distri(const PixelPartition& part, Var prompts, const BpdlConfig& cfg) {
  return ops::add(loss_inlier(prompts, cfg.alpha), loss_outlier(part, prompts, cfg.d));
}

Var loss_bpdl(const PixelPartition& part, Var prompts, const BpdlConfig& cfg) {
  return ops::add(loss_pixel(part, prompts, cfg.s), loss_distri(part, prompts, cfg));
}

PixelPartition build_partition(Var fm, std::span<const std::uint8_t> labels, std::size_t classes,
                               std::size_t max_pixels, std::uint64_t seed) {
  const Shape& s = fm.shape();
  if (s.size() != 3) throw DimensionError("pixel embeddings must be [C,h,w], got " + shape_str(s));
  const std::size_t pixels = s[1] * s[2];
  if (labels.size() != pixels) {
    throw DimensionError("label map has " + std::to_string(labels.size()) + " pixels, embeddings have " +
                         std::to_string(pixels));
  }
  std::vector<std::size_t> in, out;
  for (std::size_t p = 0; p < pixels; ++p) {
    const std::uint8_t l = labels[p];
    if (l == data::kIgnoreLabel) continue;
    if (l == data::kOutlierLabel) {
      out.push_back(p);
    } else if (l < classes) {
      in.push_back(p);
    } else {
      throw ContractError("label " + std::to_string(l) + " at pixel " + std::to_string(p) + " is not a known class");
    }
  }
  Rng rng(seed);
  auto subsample = [&](std::vector<std::size_t>& idx) {
    if (idx.size() <= max_pixels) return;
    for (std::size_t i = 0; i < max_pixels; ++i) std::swap(idx[i], idx[i + rng.below(idx.size() - i)]);
    idx.resize(max_pixels);
    std::sort(idx.begin(), idx.end());
  };
  subsample(in);
  subsample(out);

  Var rows = ops::transpose(ops::reshape(fm, {s[0], pixels}));
  PixelPartition part;
  if (!in.empty()) {
    part.inliers = ops::gather_rows(rows, in);
    part.labels.reserve(in.size());
    for (std::size_t p : in) part.labels.push_back(labels[p] + std::size_t{1});
  }
  if (!out.empty()) part.outliers = ops::gather_rows(rows, out);
  return part;
}

}  // namespace panoos::bpdl
