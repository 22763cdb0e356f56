#include "panoos/training/optimizer.hpp"

#include <cmath>

#include "panoos/numerics/errors.hpp"

namespace panoos::train {

bool decays(const Parameter& p) {
  if (p.value.rank() < 2) return false;
  return p.group != ParamGroup::QueryInit && p.group != ParamGroup::VoidEmbedding &&
         p.group != ParamGroup::DistributionPrompts;
}

AdamW::AdamW(ParameterList params, AdamWOptions options) : params_(std::move(params)), opt_(options) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const Parameter* p : params_) {
    m_.emplace_back(p->value.shape(), 0.0);
    v_.emplace_back(p->value.shape(), 0.0);
  }
}

void AdamW::step(double lr) {
  for (const Parameter* p : params_) {
    if (!p->trainable) continue;
    for (double g : p->grad.values()) {
      if (!std::isfinite(g)) throw NumericError("non-finite gradient in " + p->name);
    }
  }
  ++t_;
  const double c1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Parameter& p = *params_[i];
    if (!p.trainable) continue;
    const double wd = decays(p) ? opt_.weight_decay : 0.0;
    double* x = p.value.data();
    const double* g = p.grad.data();
    double* m = m_[i].data();
    double* v = v_[i].data();
    for (std::size_t k = 0; k < p.value.size(); ++k) {
      x[k] -= lr * wd * x[k];
      m[k] = opt_.beta1 * m[k] + (1.0 - opt_.beta1) * g[k];
      v[k] = opt_.beta2 * v[k] + (1.0 - opt_.beta2) * g[k] * g[k];
      x[k] -= lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + opt_.eps);
    }
  }
}

double poly_lr(double base, std::size_t iteration, std::size_t total, double power) {
  if (total == 0 || iteration >= total) return 0.0;
  return base * std::pow(1.0 - static_cast<double>(iteration) / static_cast<double>(total), power);
}

}  // namespace panoos::train
