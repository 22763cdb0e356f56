#include "panoos/training/matching.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "panoos/numerics/errors.hpp"

namespace panoos::train {

std::vector<std::size_t> hungarian(const std::vector<std::vector<double>>& cost) {
  const std::size_t n = cost.size();
  if (n == 0) return {};
  const std::size_t m = cost[0].size();
  if (n > m) {
    throw ContractError("cannot match " + std::to_string(n) + " segments to " + std::to_string(m) + " queries");
  }
  for (const auto& row : cost) {
    if (row.size() != m) throw DimensionError("ragged cost matrix");
    for (double c : row) {
      if (!std::isfinite(c)) throw NumericError("non-finite matching cost");
    }
  }

  // Shortest augmenting path with row/column potentials, 1-based with a
  // virtual column 0.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<bool> used(m + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<std::size_t> out(n);
  for (std::size_t j = 1; j <= m; ++j) {
    if (p[j] != 0) out[p[j] - 1] = j - 1;
  }
  return out;
}

std::vector<std::vector<double>> match_cost(const Tensor& probs, const Tensor& masks, const GroundTruth& gt,
                                            const LossWeights& w) {
  const std::size_t N = probs.dim(0), K = probs.dim(1);
  const std::size_t pixels = gt.height * gt.width;
  if (masks.size() != N * pixels) {
    throw DimensionError("masks " + shape_str(masks.shape()) + " do not match " + std::to_string(N) + " queries on a " +
                         std::to_string(gt.height) + "x" + std::to_string(gt.width) + " grid");
  }
  const double valid = static_cast<double>(gt.valid_pixels.size());
  std::vector<std::vector<double>> cost(gt.segments(), std::vector<double>(N, 0.0));
  for (std::size_t g = 0; g < gt.segments(); ++g) {
    const double* target = gt.masks.data() + g * pixels;
    for (std::size_t n = 0; n < N; ++n) {
      const double* m = masks.data() + n * pixels;
      double bce = 0.0, inter = 0.0, msum = 0.0, gsum = 0.0;
      for (std::size_t p : gt.valid_pixels) {
        const double x = std::clamp(m[p], kProbClamp, 1.0 - kProbClamp);
        bce -= target[p] * std::log(x) + (1.0 - target[p]) * std::log(1.0 - x);
        inter += m[p] * target[p];
        msum += m[p];
        gsum += target[p];
      }
      const double dice = 1.0 - (2.0 * inter + 1.0) / (msum + gsum + 1.0);
      cost[g][n] = -w.cls * probs[n * K + gt.classes[g]] + w.bce * bce / valid + w.dice * dice;
    }
  }
  return cost;
}

MatchAssignment hungarian_match(const Tensor& probs, const Tensor& masks, const GroundTruth& gt,
                                const LossWeights& w) {
  const std::size_t N = probs.dim(0);
  if (gt.segments() > N) {
    throw ContractError(std::to_string(gt.segments()) + " ground-truth segments exceed " + std::to_string(N) +
                        " queries");
  }
  MatchAssignment a;
  a.query_of_segment = hungarian(match_cost(probs, masks, gt, w));
  a.segment_of_query.assign(N, kNoObject);
  for (std::size_t g = 0; g < a.query_of_segment.size(); ++g) a.segment_of_query[a.query_of_segment[g]] = g;
  return a;
}

}  // namespace panoos::train
