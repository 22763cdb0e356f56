#pragma once

#include <cstddef>
#include <vector>

#include "panoos/numerics/parameter.hpp"

namespace panoos::train {

struct AdamWOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.05;
};

/// Whether decoupled weight decay applies: matrices only, and never the
/// query, void or distribution embeddings.
bool decays(const Parameter& p);

/// Adam with decoupled weight decay (p -= lr * wd * p before the moment
/// update). Non-trainable parameters are skipped entirely.
class AdamW {
 public:
  AdamW(ParameterList params, AdamWOptions options);

  void step(double lr);
  std::size_t steps() const noexcept { return t_; }

 private:
  ParameterList params_;
  AdamWOptions opt_;
  std::vector<Tensor> m_, v_;
  std::size_t t_ = 0;
};

/// base * (1 - iteration / total)^power.
double poly_lr(double base, std::size_t iteration, std::size_t total, double power);

}  // namespace panoos::train
