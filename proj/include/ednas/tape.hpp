#pragma once
// Reverse-mode tape. Forward ops append one step each; backward replays the
// steps once in reverse order, accumulating into Tensor::grad.

#include <functional>
#include <string_view>
#include <vector>

#include "ednas/tensor.hpp"

namespace ednas {

class Tape {
 public:
  void record(std::string_view name, std::function<void()> backward);
  void backward(const TensorPtr& loss);

  bool recording() const { return recording_; }
  void set_recording(bool on) { recording_ = on; }

  std::size_t size() const { return steps_.size(); }
  // Instrumentation: per-step replay counts, in recording order.
  std::vector<int> replay_counts() const;
  void clear();

 private:
  struct Step {
    std::string_view name;
    std::function<void()> fn;
    int replays = 0;
  };
  std::vector<Step> steps_;
  bool recording_ = true;
};

// Forward-evaluation context threaded through models and operations.
class Rng;
struct AttentionProbe;
struct EvalCtx {
  Tape* tape = nullptr;
  bool training = false;
  Rng* rng = nullptr;           // required when training (dropout)
  AttentionProbe* probe = nullptr;
};

}  // namespace ednas
