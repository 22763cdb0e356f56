#include "panoos/numerics/finite_diff.hpp"

#include <cmath>
#include <vector>

#include "panoos/numerics/errors.hpp"

namespace panoos {

namespace {

double evaluate(const ScalarFn& f) {
  Tape tape;
  const Var out = f(tape);
  if (out.size() != 1) throw ContractError("finite_diff_check: function must return a scalar");
  const double v = out.value()[0];
  if (!std::isfinite(v)) throw NumericError("finite_diff_check: function value is not finite");
  return v;
}

}  // namespace

GradCheckReport finite_diff_check(const ScalarFn& f, const ParameterList& params, double h) {
  std::vector<Tensor> saved_grads;
  saved_grads.reserve(params.size());
  for (Parameter* p : params) {
    saved_grads.push_back(p->grad);
    p->grad = Tensor(p->value.shape(), 0.0);
  }

  {
    Tape tape;
    const Var out = f(tape);
    if (!std::isfinite(out.value()[0])) throw NumericError("finite_diff_check: function value is not finite");
    tape.backward(out);
  }

  GradCheckReport report;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter& p = *params[k];
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double original = p.value[i];
      p.value[i] = original + h;
      const double plus = evaluate(f);
      p.value[i] = original - h;
      const double minus = evaluate(f);
      p.value[i] = original;

      const double numeric = (plus - minus) / (2.0 * h);
      const double analytic = p.grad[i];
      const double err = std::abs(analytic - numeric) / (std::abs(analytic) + std::abs(numeric) + 1e-8);
      ++report.coordinates;
      if (err > report.max_rel_error || report.coordinates == 1) {
        report.max_rel_error = err;
        report.parameter = p.name;
        report.index = i;
        report.analytic = analytic;
        report.numeric = numeric;
      }
    }
  }

  for (std::size_t k = 0; k < params.size(); ++k) params[k]->grad = std::move(saved_grads[k]);
  return report;
}

}  // namespace panoos
