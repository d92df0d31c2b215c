#include "ednas/optim.hpp"

#include <cmath>

#include "ednas/kernels.hpp"

namespace ednas {
namespace {

bool finite(const double* g, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i)
    if (!std::isfinite(g[i])) return false;
  return true;
}

}  // namespace

Adam::StepStats Adam::step(const std::vector<TensorPtr>& params) {
  StepStats stats;
  for (const auto& p : params) {
    if (!p->has_grad()) continue;
    if (!finite(p->grad(), p->size())) {
      ++stats.skipped_nonfinite;
      continue;
    }
    Slot& slot = slots_[p.get()];
    if (slot.m.empty()) {
      slot.m.assign(p->size(), 0.0);
      slot.v.assign(p->size(), 0.0);
    }
    ++slot.t;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(slot.t));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(slot.t));
    kernels::active().adam_step(p->data(), p->grad(), slot.m.data(),
                                slot.v.data(), p->size(), cfg_.lr, cfg_.beta1,
                                cfg_.beta2, cfg_.eps, bc1, bc2);
    ++stats.updated;
  }
  ++total_steps_;
  return stats;
}

void Adam::zero_grad(const std::vector<TensorPtr>& params) {
  for (const auto& p : params) p->zero_grad();
}

}  // namespace ednas
