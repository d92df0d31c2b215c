#pragma once
// Differentiable tensor operations. Each op computes its forward value with
// the active kernel backend and, when a recording tape is supplied and some
// input requires grad, appends one backward step.

#include <vector>

#include "ednas/rng.hpp"
#include "ednas/tape.hpp"
#include "ednas/tensor.hpp"

namespace ednas::ops {

// c = a * b          a:[m x k] b:[k x n]
TensorPtr matmul(Tape* tape, const TensorPtr& a, const TensorPtr& b);
// c = a * b^T        a:[m x k] b:[n x k]
TensorPtr matmul_nt(Tape* tape, const TensorPtr& a, const TensorPtr& b);
// c = a^T * b        a:[k x m] b:[k x n]
TensorPtr matmul_tn(Tape* tape, const TensorPtr& a, const TensorPtr& b);

TensorPtr add(Tape* tape, const TensorPtr& a, const TensorPtr& b);
TensorPtr sub(Tape* tape, const TensorPtr& a, const TensorPtr& b);
TensorPtr mul(Tape* tape, const TensorPtr& a, const TensorPtr& b);
// x:[m x n] plus a length-n row broadcast over rows
TensorPtr add_row(Tape* tape, const TensorPtr& x, const TensorPtr& row);
TensorPtr scale(Tape* tape, const TensorPtr& x, double alpha);
// x scaled by a scalar tensor (gradient flows to both)
TensorPtr mul_scalar(Tape* tape, const TensorPtr& x, const TensorPtr& s);

TensorPtr relu(Tape* tape, const TensorPtr& x);
TensorPtr sigmoid(Tape* tape, const TensorPtr& x);
TensorPtr tanh(Tape* tape, const TensorPtr& x);
// log(x + shift), used for relation biases
TensorPtr log_shift(Tape* tape, const TensorPtr& x, double shift);

// Softmax along `axis` of an arbitrary-rank tensor.
TensorPtr softmax(Tape* tape, const TensorPtr& x, int axis);
// Fast path: softmax along the last axis of a matrix.
TensorPtr softmax_rows(Tape* tape, const TensorPtr& x);

TensorPtr layer_norm(Tape* tape, const TensorPtr& x, const TensorPtr& gain,
                     const TensorPtr& bias, double eps = 1e-5);

// Inverted dropout; identity when !ctx.training or rate == 0.
TensorPtr dropout(const EvalCtx& ctx, const TensorPtr& x, double rate);
// Deterministic core used by dropout and by its gradient tests.
TensorPtr apply_mask(Tape* tape, const TensorPtr& x, const TensorPtr& mask);

TensorPtr concat_rows(Tape* tape, const std::vector<TensorPtr>& parts);
TensorPtr concat_cols(Tape* tape, const std::vector<TensorPtr>& parts);
TensorPtr reshape(Tape* tape, const TensorPtr& x, std::vector<int> shape);
TensorPtr gather_rows(Tape* tape, const TensorPtr& x,
                      const std::vector<int>& indices);
// Rows of an embedding table selected by token id; backward scatters.
TensorPtr embedding_rows(Tape* tape, const TensorPtr& table,
                         const std::vector<int>& ids);

TensorPtr sum_all(Tape* tape, const TensorPtr& x);
TensorPtr mean_all(Tape* tape, const TensorPtr& x);

}  // namespace ednas::ops
