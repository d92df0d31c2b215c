#include "ednas/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ednas {
namespace {

double eval_forward(const LossFn& f, const std::vector<TensorPtr>& leaves) {
  Tape tape;
  tape.set_recording(false);
  const TensorPtr loss = f(&tape, leaves);
  return loss->value();
}

}  // namespace

double gradient_check(const LossFn& f, const std::vector<TensorPtr>& leaves,
                      double h) {
  // Analytic pass.
  for (const auto& t : leaves) {
    t->set_requires_grad(true);
    t->zero_grad();
  }
  Tape tape;
  TensorPtr loss = f(&tape, leaves);
  if (!std::isfinite(loss->value()))
    throw std::runtime_error("gradient_check: non-finite loss at x");
  for (const auto& t : leaves) t->ensure_grad();
  tape.backward(loss);

  std::vector<std::vector<double>> analytic;
  analytic.reserve(leaves.size());
  for (const auto& t : leaves) analytic.push_back(t->grad_values());

  double worst = 0.0;
  for (std::size_t li = 0; li < leaves.size(); ++li) {
    Tensor& t = *leaves[li];
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double saved = t.data()[i];
      t.data()[i] = saved + h;
      const double fp = eval_forward(f, leaves);
      t.data()[i] = saved - h;
      const double fm = eval_forward(f, leaves);
      t.data()[i] = saved;
      const double numeric = (fp - fm) / (2.0 * h);
      const double a = analytic[li][i];
      const double rel = std::fabs(a - numeric) / std::max(1.0, std::fabs(a));
      if (rel > worst) worst = rel;
    }
  }
  for (const auto& t : leaves) t->zero_grad();
  return worst;
}

double gradient_check(const LossFn& f, const TensorPtr& x, double h) {
  return gradient_check(f, std::vector<TensorPtr>{x}, h);
}

}  // namespace ednas
