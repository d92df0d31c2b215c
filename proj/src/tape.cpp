#include "ednas/tape.hpp"

namespace ednas {

void Tape::record(std::string_view name, std::function<void()> backward) {
  steps_.push_back(Step{name, std::move(backward), 0});
}

void Tape::backward(const TensorPtr& loss) {
  require(loss != nullptr && loss->size() == 1,
          "backward requires a scalar loss");
  loss->ensure_grad();
  loss->grad()[0] += 1.0;
  for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) {
    ++it->replays;
    it->fn();
  }
}

std::vector<int> Tape::replay_counts() const {
  std::vector<int> out;
  out.reserve(steps_.size());
  for (const auto& s : steps_) out.push_back(s.replays);
  return out;
}

void Tape::clear() { steps_.clear(); }

}  // namespace ednas
