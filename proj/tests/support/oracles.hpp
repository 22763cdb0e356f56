#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <set>
#include <utility>
#include <vector>

#include "panoos/numerics/random.hpp"
#include "panoos/synthdata/scene.hpp"

// Brute-force references shared by the unit and acceptance suites.
namespace panoos::testutil {

using Matrix = std::vector<std::vector<double>>;

inline Matrix random_costs(std::size_t rows, std::size_t cols, Rng& rng) {
  Matrix c(rows, std::vector<double>(cols));
  for (auto& r : c)
    for (double& v : r) v = rng.uniform(-3.0, 3.0);
  return c;
}

// Minimum over every injective row -> column map.
inline double exhaustive_min(const Matrix& c) {
  const std::size_t rows = c.size(), cols = c[0].size();
  std::vector<std::size_t> perm(cols);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  double best = std::numeric_limits<double>::infinity();
  do {
    double s = 0.0;
    for (std::size_t r = 0; r < rows; ++r) s += c[r][perm[r]];
    best = std::min(best, s);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

inline double assigned_cost(const Matrix& c, const std::vector<std::size_t>& a) {
  double s = 0.0;
  for (std::size_t r = 0; r < a.size(); ++r) s += c[r][a[r]];
  return s;
}

inline constexpr std::uint8_t OUT = data::kOutlierLabel;
inline constexpr std::uint8_t IGN = data::kIgnoreLabel;

struct Instance {
  std::vector<double> scores;
  std::vector<std::uint8_t> labels;
};

// Scores on a coarse grid so ties are frequent.
inline Instance random_instance(std::uint64_t seed, std::size_t max_pixels = 1000) {
  Rng rng(seed);
  Instance in;
  const std::size_t n = 2 + rng.below(max_pixels - 1);
  const double grid = static_cast<double>(1 + rng.below(40));
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint64_t r = rng.below(10);
    in.labels.push_back(r < 3 ? OUT : (r == 9 ? IGN : static_cast<std::uint8_t>(r % 3)));
    const double bias = in.labels.back() == OUT ? 0.3 : 0.0;
    in.scores.push_back(std::floor((rng.uniform() + bias) * grid) / grid);
  }
  in.labels[0] = OUT;
  in.labels[1] = 0;
  return in;
}

struct Counts {
  std::size_t tp = 0, fp = 0;
};

// Scans every pixel for every candidate threshold.
inline Counts count_at(const Instance& in, double tau) {
  Counts c;
  for (std::size_t i = 0; i < in.scores.size(); ++i) {
    if (in.labels[i] == IGN || in.scores[i] < tau) continue;
    in.labels[i] == OUT ? ++c.tp : ++c.fp;
  }
  return c;
}

inline std::vector<double> distinct_desc(const Instance& in) {
  std::set<double> s;
  for (std::size_t i = 0; i < in.scores.size(); ++i)
    if (in.labels[i] != IGN) s.insert(in.scores[i]);
  return {s.rbegin(), s.rend()};
}

inline std::pair<std::size_t, std::size_t> totals(const Instance& in) {
  std::size_t p = 0, n = 0;
  for (std::uint8_t l : in.labels) {
    if (l == OUT) ++p;
    else if (l != IGN) ++n;
  }
  return {p, n};
}

inline double oracle_auprc(const Instance& in) {
  const auto [P, N] = totals(in);
  double area = 0.0, prev = 0.0;
  for (double tau : distinct_desc(in)) {
    const Counts c = count_at(in, tau);
    const double recall = static_cast<double>(c.tp) / static_cast<double>(P);
    area += (recall - prev) * (static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp));
    prev = recall;
  }
  return area;
}

inline double oracle_fpr95(const Instance& in) {
  const auto [P, N] = totals(in);
  double best_tau = -std::numeric_limits<double>::infinity();
  for (double tau : distinct_desc(in)) {
    if (static_cast<double>(count_at(in, tau).tp) / static_cast<double>(P) >= 0.95) best_tau = std::max(best_tau, tau);
  }
  return static_cast<double>(count_at(in, best_tau).fp) / static_cast<double>(N);
}

inline double oracle_miou(const std::vector<std::uint8_t>& pred, const std::vector<std::uint8_t>& gt, std::size_t K) {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t k = 0; k < K; ++k) {
    std::size_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < gt.size(); ++i) {
      if (gt[i] == IGN || gt[i] == OUT) continue;
      const bool p = pred[i] == k, g = gt[i] == k;
      inter += p && g;
      uni += p || g;
    }
    if (uni == 0) continue;
    sum += static_cast<double>(inter) / static_cast<double>(uni);
    ++n;
  }
  return sum / static_cast<double>(n);
}

}  // namespace panoos::testutil
