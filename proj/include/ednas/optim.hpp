#pragma once
// Adam with per-parameter moment state. Parameters are identified by tensor
// address; each keeps its own step count so parameters updated at different
// frequencies (supernet paths) get correct bias correction.

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "ednas/tensor.hpp"

namespace ednas {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  struct StepStats {
    int updated = 0;
    int skipped_nonfinite = 0;  // parameters whose gradient had a NaN/Inf
  };

  // Applies one update to every parameter that has a gradient buffer.
  StepStats step(const std::vector<TensorPtr>& params);
  static void zero_grad(const std::vector<TensorPtr>& params);

  double lr() const { return cfg_.lr; }
  void set_lr(double lr) { cfg_.lr = lr; }
  std::int64_t total_steps() const { return total_steps_; }

  struct Slot {
    std::vector<double> m, v;
    std::int64_t t = 0;
  };
  // Exposed for checkpointing; keyed by parameter name at serialization time.
  std::unordered_map<const Tensor*, Slot>& slots() { return slots_; }
  const std::unordered_map<const Tensor*, Slot>& slots() const {
    return slots_;
  }
  const AdamConfig& config() const { return cfg_; }

 private:
  AdamConfig cfg_;
  std::unordered_map<const Tensor*, Slot> slots_;
  std::int64_t total_steps_ = 0;
};

}  // namespace ednas
