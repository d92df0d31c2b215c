#pragma once
// Scalar losses. Clamps use kEpsProb; layer-norm style stabilizers live with
// their ops.

#include "ednas/tape.hpp"
#include "ednas/tensor.hpp"

namespace ednas::losses {

inline constexpr double kEpsProb = 1e-12;  // probability clamp

// Mean over elements of the Huber-style penalty: 0.5 e^2 for |e| < 1,
// |e| - 0.5 otherwise. target carries no gradient.
TensorPtr smooth_l1(Tape* tape, const TensorPtr& pred, const TensorPtr& target);

// sum_i p_i log(p_i / q_i) with 0 log 0 := 0. p is a fixed target
// distribution; gradient flows to q. Zero q under positive p is clamped to
// kEpsProb (warned once per process).
TensorPtr kl_divergence(Tape* tape, const TensorPtr& p, const TensorPtr& q);

// score in (0,1) clamped to [kEpsProb, 1-kEpsProb]; label in {0,1}.
TensorPtr binary_cross_entropy(Tape* tape, const TensorPtr& score,
                               double label);

// -log softmax(logits)[label]
TensorPtr softmax_cross_entropy(Tape* tape, const TensorPtr& logits,
                                int label);

}  // namespace ednas::losses
