#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "panoos/numerics/tape.hpp"

// Differentiable primitives. All inputs of one call must live on the same
// tape; the result is recorded on that tape. Matrix ops treat any tensor as
// rows x cols with cols = last dimension.
namespace panoos::ops {

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);
Var scale(Var a, double c);
Var add_scalar(Var a, double c);
/// x * s for a scalar Var s.
Var scale_by(Var x, Var s);

/// x[r, c] + v[c] for every row r.
Var add_row_broadcast(Var x, Var v);
/// x[c, ...] + v[c]; the first dimension indexes channels.
Var add_col_broadcast(Var x, Var v);

Var matmul(Var a, Var b);
Var transpose(Var a);

Var softmax_lastdim(Var x);
/// Row softmax of logits + mask, where mask holds 0 or a large negative
/// value. Rows whose mask entries are all <= masked_below get uniform
/// weights instead.
Var masked_softmax(Var logits, const Tensor& mask, double masked_below);

enum class Unary { Sigmoid, Tanh, Relu, Exp, Log, Sqrt };
Var elementwise(Unary op, Var x);
inline Var sigmoid(Var x) { return elementwise(Unary::Sigmoid, x); }
inline Var tanh(Var x) { return elementwise(Unary::Tanh, x); }
inline Var relu(Var x) { return elementwise(Unary::Relu, x); }
inline Var exp(Var x) { return elementwise(Unary::Exp, x); }
inline Var log(Var x) { return elementwise(Unary::Log, x); }
inline Var sqrt(Var x) { return elementwise(Unary::Sqrt, x); }
Var square(Var x);
/// Clamp with zero gradient outside [lo, hi].
Var clamp(Var x, double lo, double hi);

/// Per-row normalization over the last dimension, epsilon inside the root.
Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5);

Var sum(Var x);
Var mean(Var x);
/// Sum over the last dimension; a rank-1 input yields shape {1}.
Var sum_lastdim(Var x);
/// Euclidean norm of each row. The gradient at a zero row is zero.
Var row_norm(Var x);

Var reshape(Var x, Shape shape);
Var gather_rows(Var x, std::span<const std::size_t> rows);
Var gather_cols(Var x, std::span<const std::size_t> cols);
Var gather_elements(Var x, std::span<const std::size_t> flat);
Var concat_rows(std::span<const Var> parts);

/// x[C, h, w] -> [C, h*f, w*f] by pixel replication.
Var upsample_nearest(Var x, std::size_t factor);

}  // namespace panoos::ops
