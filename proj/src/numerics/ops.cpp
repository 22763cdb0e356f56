#include "panoos/numerics/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <string>

#include "panoos/numerics/errors.hpp"

namespace panoos::ops {

namespace {

Tape& same_tape(Var a, Var b) {
  if (!a.valid() || !b.valid()) throw ContractError("op on an unbound Var");
  if (a.tape() != b.tape()) throw ContractError("op inputs live on different tapes");
  return *a.tape();
}

Tape& tape_of(Var a) {
  if (!a.valid()) throw ContractError("op on an unbound Var");
  return *a.tape();
}

void require_same_shape(const char* op, Var a, Var b) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
}

void require_matrix(const char* op, Var a) {
  if (a.shape().size() != 2) {
    throw DimensionError(std::string(op) + ": expected a matrix, got " + shape_str(a.shape()));
  }
}

// Adds src into the gradient buffer of `id` if that node wants a gradient.
template <typename F>
void accumulate(Tape& t, int id, F&& contribution) {
  if (!t.requires_grad(id)) return;
  Tensor& g = t.grad_buffer(id);
  contribution(g.data(), g.size());
}

}  // namespace

Var add(Var a, Var b) {
  Tape& t = same_tape(a, b);
  require_same_shape("add", a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  Tensor out(x.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[i];
  const int ia = a.id(), ib = b.id();
  return t.record(std::move(out), {ia, ib}, [ia, ib](Tape& tp, int self) {
    const Tensor& g = tp.grad_buffer(self);
    accumulate(tp, ia, [&](double* d, std::size_t n) { for (std::size_t i = 0; i < n; ++i) d[i] += g[i]; });
    accumulate(tp, ib, [&](double* d, std::size_t n) { for (std::size_t i = 0; i < n; ++i) d[i] += g[i]; });
  });
}

Var sub(Var a, Var b) {
  Tape& t = same_tape(a, b);
  require_same_shape("sub", a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  Tensor out(x.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] - y[i];
  const int ia = a.id(), ib = b.id();
  return t.record(std::move(out), {ia, ib}, [ia, ib](Tape& tp, int self) {
    const Tensor& g = tp.grad_buffer(self);
    accumulate(tp, ia, [&](double* d, std::size_t n) { for (std::size_t i = 0; i < n; ++i) d[i] += g[i]; });
    accumulate(tp, ib, [&](double* d, std::size_t n) { for (std::size_t i = 0; i < n; ++i) d[i] -= g[i]; });
  });
}

Var mul(Var a, Var b) {
  Tape& t = same_tape(a, b);
  require_same_shape("mul", a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  Tensor out(x.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
  const int ia = a.id(), ib = b.id();
  return t.record(std::move(out), {ia, ib}, [ia, ib](Tape& tp, int self) {
    const Tensor& g = tp.grad_buffer(self);
    const Tensor& x = tp.value(ia);
    const Tensor& y = tp.value(ib);
    accumulate(tp, ia, [&](double* d, std::size_t n) { for (std::size_t i = 0; i < n; ++i) d[i] += g[i] * y[i]; });
    accumulate(tp, ib, [&](double* d, std::size_t n) { for (std::size_t i = 0; i < n; ++i) d[i] += g[i] * x[i]; });
  });
}

Var div(Var a, Var b) {
  Tape& t = same_tape(a, b);
  require_same_shape("div", a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  Tensor out(x.shape());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (y[i] == 0.0) throw NumericDomainError("div: zero divisor", i);
    out[i] = x[i] / y[i];
  }
  const int ia = a.id(), ib = b.id();
  return t.record(std::move(out), {ia, ib}, [ia, ib](Tape& tp, int self) {
    const Tensor& g = tp.grad_buffer(self);
    const Tensor& x = tp.value(ia);
    const Tensor& y = tp.value(ib);
    accumulate(tp, ia, [&](double* d, std::size_t n) { for (std::size_t i = 0; i < n; ++i) d[i] += g[i] / y[i]; });
    accumulate(tp, ib, [&](double* d, std::size_t n) {
      for (std::size_t i = 0; i < n; ++i) d[i] -= g[i] * x[i] / (y[i] * y[i]);
    });
  });
}

Var scale(Var a, double c) {
  Tape& t = tape_of(a);
  const Tensor& x = a.value();
  Tensor out(x.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * c;
  const int ia = a.id();
  return t.record(std::move(out), {ia}, [ia, c](Tape& tp, int self) {
    const Tensor& g = tp.grad_buffer(self);
    accumulate(tp, ia, [&](double* d, std::size_t n) { for (std::size_t i = 0; i < n; ++i) d[i] += g[i] * c; });
  });
}

Var add_scalar(Var a, double c) {
  Tape& t = tape_of(a);
  const Tensor& x = a.value();
  Tensor out(x.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + c;
  const int ia = a.id();
  return t.record(std::move(out), {ia}, [ia](Tape& tp, int self) {
    const Tensor& g = tp.grad_buffer(self);
    accumulate(tp, ia, [&](double* d, std::size_t n) { for (std::size_t i = 0; i < n; ++i) d[i] += g[i]; });
  });
}

Var scale_by(Var x, Var s) {
  Tape& t = same_tape(x, s);
  if (s.size() != 1) throw DimensionError("scale_by: factor must be scalar, got " + shape_str(s.shape()));
  const Tensor& v = x.value();
  const double c = s.value()[0];
  Tensor out(v.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = v[i] * c;
  const int ix = x.id(), is = s.id();
  return t.record(std::move(out), {ix, is}, [ix, is](Tape& tp, int self) {
    const Tensor& g = tp.grad_buffer(self);
    const Tensor& v = tp.value(ix);
    const double c = tp.value(is)[0];
    accumulate(tp, ix, [&](double* d, std::size_t n) { for (std::size_t i = 0; i < n; ++i) d[i] += g[i] * c; });
    accumulate(tp, is, [&](double* d, std::size_t) {
      double acc = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * v[i];
      d[0] += acc;
    });
  });
}

Var add_row_broadcast(Var x, Var v) {
  Tape& t = same_tape(x, v);
  const Tensor& a = x.value();
  const Tensor& b = v.value();
  const std::size_t c = a.cols();
  if (b.size() != c) {
    throw DimensionError("add_row_broadcast: " + shape_str(a.shape()) + " vs bias " + shape_str(b.shape()));
  }
  Tensor out(a.shape());
  const std::size_t r = a.rows();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = a[i * c + j] + b[j];
  const int ix = x.id(), iv = v.id();
  return t.record(std::move(out), {ix, iv}, [ix, iv, r, c](Tape& tp, int self) {
    const Tensor& g = tp.grad_buffer(self);
    accumulate(tp, ix, [&](double* d, std::size_t n) { for (std::size_t i = 0; i < n; ++i) d[i] += g[i]; });
    accumulate(tp, iv, [&](double* d, std::size_t) {
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) d[j] += g[i * c + j];
    });
  });
}

Var add_col_broadcast(Var x, Var v) {
  Tape& t = same_tape(x, v);
  const Tensor& a = x.value();
  const Tensor& b = v.value();
  const std::size_t ch = a.dim(0);
  if (b.size() != ch) {
    throw DimensionError("add_col_broadcast: " + shape_str(a.shape()) + " vs bias " + shape_str(b.shape()));
  }
  const std::size_t inner = a.size() / ch;
  Tensor out(a.shape());
  for (std::size_t i = 0; i < ch; ++i)
    for (std::size_t j = 0; j < inner; ++j) out[i * inner + j] = a[i * inner + j] + b[i];
  const int ix = x.id(), iv = v.id();
  return t.record(std::move(out), {ix, iv}, [ix, iv, ch, inner](Tape& tp, int self) {
    const Tensor& g = tp.grad_buffer(self);
    accumulate(tp, ix, [&](double* d, std::size_t n) { for (std::size_t i = 0; i < n; ++i) d[i] += g[i]; });
    accumulate(tp, iv, [&](double* d, std::size_t) {
      for (std::size_t i = 0; i < ch; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < inner; ++j) acc += g[i * inner + j];
        d[i] += acc;
      }
    });
  });
}

Var matmul(Var a, Var b) {
  Tape& t = same_tape(a, b);
  require_matrix("matmul", a);
  require_matrix("matmul", b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  const std::size_t m = x.dim(0), k = x.dim(1), n = y.dim(1);
  if (y.dim(0) != k) {
    throw DimensionError("matmul: inner dimensions differ, " + shape_str(x.shape()) + " x " + shape_str(y.shape()));
  }
  Tensor out({m, n}, 0.0);
  double* o = out.data();
  const double* xa = x.data();
  const double* yb = y.data();
  for (std::size_t i = 0; i < m; ++i) {
    double* orow = o + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double s = xa[i * k + p];
      if (s == 0.0) continue;
      const double* yrow = yb + p * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += s * yrow[j];
    }
  }
  const int ia = a.id(), ib = b.id();
  return t.record(std::move(out), {ia, ib}, [ia, ib, m, k, n](Tape& tp, int self) {
    const double* g = tp.grad_buffer(self).data();
    const double* xa = tp.value(ia).data();
    const double* yb = tp.value(ib).data();
    // dA = G * B^T
    accumulate(tp, ia, [&](double* d, std::size_t) {
      for (std::size_t i = 0; i < m; ++i) {
        const double* grow = g + i * n;
        for (std::size_t p = 0; p < k; ++p) {
          const double* yrow = yb + p * n;
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) acc += grow[j] * yrow[j];
          d[i * k + p] += acc;
        }
      }
    });
    // dB = A^T * G
    accumulate(tp, ib, [&](double* d, std::size_t) {
      for (std::size_t i = 0; i < m; ++i) {
        const double* grow = g + i * n;
        for (std::size_t p = 0; p < k; ++p) {
          const double s = xa[i * k + p];
          if (s == 0.0) continue;
          double* drow = d + p * n;
          for (std::size_t j = 0; j < n; ++j) drow[j] += s * grow[j];
        }
      }
    });
  });
}

Var transpose(Var a) {
  Tape& t = tape_of(a);
  require_matrix("transpose", a);
  const Tensor& x = a.value();
  const std::size_t r = x.dim(0), c = x.dim(1);
  Tensor out({c, r});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = x[i * c + j];
  const int ia = a.id();
  return t.record(std::move(out), {ia}, [ia, r, c](Tape& tp, int self) {
    const Tensor& g = tp.grad_buffer(self);
    accumulate(tp, ia, [&](double* d, std::size_t) {
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) d[i * c + j] += g[j * r + i];
    });
  });
}

namespace {

void softmax_backward(Tape& tp, int self, int input, std::size_t rows, std::size_t cols,
                      const std::vector<char>* frozen_rows) {
  const Tensor& g = tp.grad_buffer(self);
  const Tensor& y = tp.value(self);
  accumulate(tp, input, [&](double* d, std::size_t) {
    for (std::size_t r = 0; r < rows; ++r) {
      if (frozen_rows && (*frozen_rows)[r]) continue;
      const double* gr = g.data() + r * cols;
      const double* yr = y.data() + r * cols;
      double dot = 0.0;
      for (std::size_t j = 0; j < cols; ++j) dot += gr[j] * yr[j];
      for (std::size_t j = 0; j < cols; ++j) d[r * cols + j] += yr[j] * (gr[j] - dot);
    }
  });
}

}  // namespace

Var softmax_lastdim(Var x) {
  Tape& t = tape_of(x);
  const Tensor& v = x.value();
  const std::size_t cols = v.cols();
  if (cols == 0) throw DimensionError("softmax_lastdim: empty last dimension");
  const std::size_t rows = v.rows();
  Tensor out(v.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = v.data() + r * cols;
    double* o = out.data() + r * cols;
    const double mx = *std::max_element(in, in + cols);
    double z = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      o[j] = std::exp(in[j] - mx);
      z += o[j];
    }
    for (std::size_t j = 0; j < cols; ++j) o[j] /= z;
  }
  const int ix = x.id();
  return t.record(std::move(out), {ix}, [ix, rows, cols](Tape& tp, int self) {
    softmax_backward(tp, self, ix, rows, cols, nullptr);
  });
}

Var masked_softmax(Var logits, const Tensor& mask, double masked_below) {
  Tape& t = tape_of(logits);
  const Tensor& v = logits.value();
  if (mask.shape() != v.shape()) {
    throw DimensionError("masked_softmax: mask " + shape_str(mask.shape()) + " vs logits " + shape_str(v.shape()));
  }
  const std::size_t cols = v.cols();
  const std::size_t rows = v.rows();
  Tensor out(v.shape());
  auto fallback = std::make_shared<std::vector<char>>(rows, 0);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* mk = mask.data() + r * cols;
    double* o = out.data() + r * cols;
    const bool all_masked = std::all_of(mk, mk + cols, [&](double m) { return m <= masked_below; });
    if (all_masked) {
      (*fallback)[r] = 1;
      for (std::size_t j = 0; j < cols; ++j) o[j] = 1.0 / static_cast<double>(cols);
      continue;
    }
    const double* in = v.data() + r * cols;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < cols; ++j) mx = std::max(mx, in[j] + mk[j]);
    double z = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      o[j] = std::exp(in[j] + mk[j] - mx);
      z += o[j];
    }
    for (std::size_t j = 0; j < cols; ++j) o[j] /= z;
  }
  const int ix = logits.id();
  return t.record(std::move(out), {ix}, [ix, rows, cols, fallback](Tape& tp, int self) {
    softmax_backward(tp, self, ix, rows, cols, fallback.get());
  });
}

namespace {

const char* unary_name(Unary op) {
  switch (op) {
    case Unary::Sigmoid: return "sigmoid";
    case Unary::Tanh: return "tanh";
    case Unary::Relu: return "relu";
    case Unary::Exp: return "exp";
    case Unary::Log: return "log";
    case Unary::Sqrt: return "sqrt";
  }
  return "?";
}

}  // namespace

Var elementwise(Unary op, Var x) {
  Tape& t = tape_of(x);
  const Tensor& v = x.value();
  Tensor out(v.shape());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double a = v[i];
    double y = 0.0;
    switch (op) {
      case Unary::Sigmoid:
        y = a >= 0.0 ? 1.0 / (1.0 + std::exp(-a)) : std::exp(a) / (1.0 + std::exp(a));
        break;
      case Unary::Tanh: y = std::tanh(a); break;
      case Unary::Relu: y = a > 0.0 ? a : 0.0; break;
      case Unary::Exp:
        y = std::exp(a);
        if (!std::isfinite(y)) throw NumericDomainError("exp: overflow", i);
        break;
      case Unary::Log:
        if (!(a > 0.0)) throw NumericDomainError("log: argument must be positive", i);
        y = std::log(a);
        break;
      case Unary::Sqrt:
        if (!(a >= 0.0)) throw NumericDomainError("sqrt: argument must be non-negative", i);
        y = std::sqrt(a);
        break;
    }
    if (!std::isfinite(a)) throw NumericDomainError(std::string(unary_name(op)) + ": non-finite input", i);
    out[i] = y;
  }
  const int ix = x.id();
  return t.record(std::move(out), {ix}, [ix, op](Tape& tp, int self) {
    const Tensor& g = tp.grad_buffer(self);
    const Tensor& y = tp.value(self);
    const Tensor& a = tp.value(ix);
    accumulate(tp, ix, [&](double* d, std::size_t n) {
      switch (op) {
        case Unary::Sigmoid:
          for (std::size_t i = 0; i < n; ++i) d[i] += g[i] * y[i] * (1.0 - y[i]);
          break;
        case Unary::Tanh:
          for (std::size_t i = 0; i < n; ++i) d[i] += g[i] * (1.0 - y[i] * y[i]);
          break;
        case Unary::Relu:
          for (std::size_t i = 0; i < n; ++i) d[i] += a[i] > 0.0 ? g[i] : 0.0;
          break;
        case Unary::Exp:
          for (std::size_t i = 0; i < n; ++i) d[i] += g[i] * y[i];
          break;
        case Unary::Log:
          for (std::size_t i = 0; i < n; ++i) d[i] += g[i] / a[i];
          break;
        case Unary::Sqrt:
          for (std::size_t i = 0; i < n; ++i) d[i] += g[i] * 0.5 / y[i];
          break;
      }
    });
  });
}

Var square(Var x) {
  Tape& t = tape_of(x);
  const Tensor& v = x.value();
  Tensor out(v.shape());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] * v[i];
  const int ix = x.id();
  return t.record(std::move(out), {ix}, [ix](Tape& tp, int self) {
    const Tensor& g = tp.grad_buffer(self);
    const Tensor& a = tp.value(ix);
    accumulate(tp, ix, [&](double* d, std::size_t n) { for (std::size_t i = 0; i < n; ++i) d[i] += 2.0 * g[i] * a[i]; });
  });
}

Var clamp(Var x, double lo, double hi) {
  Tape& t = tape_of(x);
  const Tensor& v = x.value();
  Tensor out(v.shape());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::clamp(v[i], lo, hi);
  const int ix = x.id();
  return t.record(std::move(out), {ix}, [ix, lo, hi](Tape& tp, int self) {
    const Tensor& g = tp.grad_buffer(self);
    const Tensor& a = tp.value(ix);
    accumulate(tp, ix, [&](double* d, std::size_t n) {
      for (std::size_t i = 0; i < n; ++i)
        if (a[i] >= lo && a[i] <= hi) d[i] += g[i];
    });
  });
}

Var layer_norm(Var x, Var gain, Var bias, double eps) {
  Tape& t = same_tape(x, gain);
  same_tape(x, bias);
  const Tensor& v = x.value();
  const std::size_t c = v.cols();
  if (c == 0) throw DimensionError("layer_norm: empty rows");
  if (gain.size() != c || bias.size() != c) {
    throw DimensionError("layer_norm: input " + shape_str(v.shape()) + " with gain " + shape_str(gain.shape()) +
                         " and bias " + shape_str(bias.shape()));
  }
  const std::size_t r = v.rows();
  const Tensor& gn = gain.value();
  const Tensor& bs = bias.value();
  Tensor out(v.shape());
  auto xhat = std::make_shared<std::vector<double>>(v.size());
  auto inv_std = std::make_shared<std::vector<double>>(r);
  for (std::size_t i = 0; i < r; ++i) {
    const double* row = v.data() + i * c;
    double mu = 0.0;
    for (std::size_t j = 0; j < c; ++j) mu += row[j];
    mu /= static_cast<double>(c);
    double var = 0.0;
    for (std::size_t j = 0; j < c; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(c);
    const double inv = 1.0 / std::sqrt(var + eps);
    (*inv_std)[i] = inv;
    for (std::size_t j = 0; j < c; ++j) {
      const double h = (row[j] - mu) * inv;
      (*xhat)[i * c + j] = h;
      out[i * c + j] = h * gn[j] + bs[j];
    }
  }
  const int ix = x.id(), ig = gain.id(), ib = bias.id();
  return t.record(std::move(out), {ix, ig, ib}, [ix, ig, ib, r, c, xhat, inv_std](Tape& tp, int self) {
    const Tensor& g = tp.grad_buffer(self);
    const Tensor& gn = tp.value(ig);
    accumulate(tp, ig, [&](double* d, std::size_t) {
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) d[j] += g[i * c + j] * (*xhat)[i * c + j];
    });
    accumulate(tp, ib, [&](double* d, std::size_t) {
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) d[j] += g[i * c + j];
    });
    accumulate(tp, ix, [&](double* d, std::size_t) {
      const double cn = static_cast<double>(c);
      for (std::size_t i = 0; i < r; ++i) {
        double s1 = 0.0, s2 = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
          const double dh = g[i * c + j] * gn[j];
          s1 += dh;
          s2 += dh * (*xhat)[i * c + j];
        }
        const double inv = (*inv_std)[i];
        for (std::size_t j = 0; j < c; ++j) {
          const double dh = g[i * c + j] * gn[j];
          d[i * c + j] += inv / cn * (cn * dh - s1 - (*xhat)[i * c + j] * s2);
        }
      }
    });
  });
}

Var sum(Var x) {
  Tape& t = tape_of(x);
  const Tensor& v = x.value();
  double acc = 0.0;
  for (double a : v.values()) acc += a;
  const int ix = x.id();
  return t.record(Tensor::scalar(acc), {ix}, [ix](Tape& tp, int self) {
    const double g = tp.grad_buffer(self)[0];
    accumulate(tp, ix, [&](double* d, std::size_t n) { for (std::size_t i = 0; i < n; ++i) d[i] += g; });
  });
}

Var mean(Var x) { return scale(sum(x), 1.0 / static_cast<double>(x.size())); }

Var sum_lastdim(Var x) {
  Tape& t = tape_of(x);
  const Tensor& v = x.value();
  const std::size_t c = v.cols(), r = v.rows();
  Shape shape(v.shape().begin(), v.shape().end() - 1);
  if (shape.empty()) shape = {1};
  Tensor out(shape);
  for (std::size_t i = 0; i < r; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < c; ++j) acc += v[i * c + j];
    out[i] = acc;
  }
  const int ix = x.id();
  return t.record(std::move(out), {ix}, [ix, r, c](Tape& tp, int self) {
    const Tensor& g = tp.grad_buffer(self);
    accumulate(tp, ix, [&](double* d, std::size_t) {
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) d[i * c + j] += g[i];
    });
  });
}

Var row_norm(Var x) {
  Tape& t = tape_of(x);
  const Tensor& v = x.value();
  const std::size_t c = v.cols(), r = v.rows();
  Tensor out({r});
  for (std::size_t i = 0; i < r; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < c; ++j) acc += v[i * c + j] * v[i * c + j];
    out[i] = std::sqrt(acc);
  }
  const int ix = x.id();
  return t.record(std::move(out), {ix}, [ix, r, c](Tape& tp, int self) {
    const Tensor& g = tp.grad_buffer(self);
    const Tensor& y = tp.value(self);
    const Tensor& a = tp.value(ix);
    accumulate(tp, ix, [&](double* d, std::size_t) {
      for (std::size_t i = 0; i < r; ++i) {
        if (y[i] == 0.0) continue;
        const double s = g[i] / y[i];
        for (std::size_t j = 0; j < c; ++j) d[i * c + j] += s * a[i * c + j];
      }
    });
  });
}

Var reshape(Var x, Shape shape) {
  Tape& t = tape_of(x);
  Tensor out = x.value().reshaped(std::move(shape));
  const int ix = x.id();
  return t.record(std::move(out), {ix}, [ix](Tape& tp, int self) {
    const Tensor& g = tp.grad_buffer(self);
    accumulate(tp, ix, [&](double* d, std::size_t n) { for (std::size_t i = 0; i < n; ++i) d[i] += g[i]; });
  });
}

Var gather_rows(Var x, std::span<const std::size_t> rows) {
  Tape& t = tape_of(x);
  const Tensor& v = x.value();
  const std::size_t c = v.cols(), r = v.rows();
  if (rows.empty()) throw DimensionError("gather_rows: empty index list");
  Tensor out({rows.size(), c});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= r) throw DimensionError("gather_rows: row " + std::to_string(rows[i]) + " out of " + shape_str(v.shape()));
    std::copy_n(v.data() + rows[i] * c, c, out.data() + i * c);
  }
  auto idx = std::make_shared<std::vector<std::size_t>>(rows.begin(), rows.end());
  const int ix = x.id();
  return t.record(std::move(out), {ix}, [ix, idx, c](Tape& tp, int self) {
    const Tensor& g = tp.grad_buffer(self);
    accumulate(tp, ix, [&](double* d, std::size_t) {
      for (std::size_t i = 0; i < idx->size(); ++i)
        for (std::size_t j = 0; j < c; ++j) d[(*idx)[i] * c + j] += g[i * c + j];
    });
  });
}

Var gather_cols(Var x, std::span<const std::size_t> cols) {
  Tape& t = tape_of(x);
  const Tensor& v = x.value();
  const std::size_t c = v.cols(), r = v.rows();
  if (cols.empty()) throw DimensionError("gather_cols: empty index list");
  const std::size_t m = cols.size();
  Tensor out({r, m});
  for (std::size_t j = 0; j < m; ++j)
    if (cols[j] >= c) throw DimensionError("gather_cols: column " + std::to_string(cols[j]) + " out of " + shape_str(v.shape()));
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < m; ++j) out[i * m + j] = v[i * c + cols[j]];
  auto idx = std::make_shared<std::vector<std::size_t>>(cols.begin(), cols.end());
  const int ix = x.id();
  return t.record(std::move(out), {ix}, [ix, idx, r, c](Tape& tp, int self) {
    const Tensor& g = tp.grad_buffer(self);
    const std::size_t m = idx->size();
    accumulate(tp, ix, [&](double* d, std::size_t) {
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < m; ++j) d[i * c + (*idx)[j]] += g[i * m + j];
    });
  });
}

Var gather_elements(Var x, std::span<const std::size_t> flat) {
  Tape& t = tape_of(x);
  const Tensor& v = x.value();
  if (flat.empty()) throw DimensionError("gather_elements: empty index list");
  Tensor out({flat.size()});
  for (std::size_t i = 0; i < flat.size(); ++i) {
    if (flat[i] >= v.size()) throw DimensionError("gather_elements: index out of range for " + shape_str(v.shape()));
    out[i] = v[flat[i]];
  }
  auto idx = std::make_shared<std::vector<std::size_t>>(flat.begin(), flat.end());
  const int ix = x.id();
  return t.record(std::move(out), {ix}, [ix, idx](Tape& tp, int self) {
    const Tensor& g = tp.grad_buffer(self);
    accumulate(tp, ix, [&](double* d, std::size_t) {
      for (std::size_t i = 0; i < idx->size(); ++i) d[(*idx)[i]] += g[i];
    });
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat_rows: nothing to concatenate");
  Tape& t = tape_of(parts[0]);
  const std::size_t c = parts[0].value().cols();
  std::size_t total = 0;
  std::vector<int> ids;
  std::vector<std::size_t> offsets;
  for (const Var& p : parts) {
    same_tape(parts[0], p);
    if (p.value().cols() != c) {
      throw DimensionError("concat_rows: column mismatch " + shape_str(parts[0].shape()) + " vs " + shape_str(p.shape()));
    }
    offsets.push_back(total);
    total += p.value().rows();
    ids.push_back(p.id());
  }
  Tensor out({total, c});
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& v = parts[k].value();
    std::copy(v.data(), v.data() + v.size(), out.data() + offsets[k] * c);
  }
  return t.record(std::move(out), ids, [ids, offsets, c](Tape& tp, int self) {
    const Tensor& g = tp.grad_buffer(self);
    for (std::size_t k = 0; k < ids.size(); ++k) {
      accumulate(tp, ids[k], [&](double* d, std::size_t n) {
        const double* src = g.data() + offsets[k] * c;
        for (std::size_t i = 0; i < n; ++i) d[i] += src[i];
      });
    }
  });
}

Var upsample_nearest(Var x, std::size_t factor) {
  Tape& t = tape_of(x);
  const Tensor& v = x.value();
  if (v.rank() != 3) throw DimensionError("upsample_nearest: expected [C,h,w], got " + shape_str(v.shape()));
  if (factor == 0) throw DimensionError("upsample_nearest: zero factor");
  const std::size_t ch = v.dim(0), h = v.dim(1), w = v.dim(2);
  const std::size_t H = h * factor, W = w * factor;
  Tensor out({ch, H, W});
  for (std::size_t c = 0; c < ch; ++c)
    for (std::size_t y = 0; y < H; ++y) {
      const double* src = v.data() + (c * h + y / factor) * w;
      double* dst = out.data() + (c * H + y) * W;
      for (std::size_t xx = 0; xx < W; ++xx) dst[xx] = src[xx / factor];
    }
  const int ix = x.id();
  return t.record(std::move(out), {ix}, [ix, ch, h, w, factor](Tape& tp, int self) {
    const Tensor& g = tp.grad_buffer(self);
    const std::size_t H = h * factor, W = w * factor;
    accumulate(tp, ix, [&](double* d, std::size_t) {
      for (std::size_t c = 0; c < ch; ++c)
        for (std::size_t y = 0; y < H; ++y) {
          const double* src = g.data() + (c * H + y) * W;
          double* dst = d + (c * h + y / factor) * w;
          for (std::size_t xx = 0; xx < W; ++xx) dst[xx / factor] += src[xx];
        }
    });
  });
}

}  // namespace panoos::ops
