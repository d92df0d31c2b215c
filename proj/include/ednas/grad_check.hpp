#pragma once
// Central-difference gradient verification. The function under test must be
// deterministic (eval mode / fixed masks).

#include <functional>
#include <vector>

#include "ednas/tape.hpp"
#include "ednas/tensor.hpp"

namespace ednas {

// Builds the scalar loss on the given tape from the given leaf tensors.
using LossFn =
    std::function<TensorPtr(Tape*, const std::vector<TensorPtr>&)>;

// Max over all coordinates of all leaves of
//   |analytic - central difference| / max(1, |analytic|).
// Throws if f(x) is non-finite.
double gradient_check(const LossFn& f, const std::vector<TensorPtr>& leaves,
                      double h = 1e-4);

double gradient_check(const LossFn& f, const TensorPtr& x, double h = 1e-4);

}  // namespace ednas
