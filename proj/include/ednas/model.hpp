#pragma once
// A standalone task model: trunk + fixed-architecture block stacks + the
// task head. The supernet instantiates one of these from a derived
// architecture with copied weights.

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "ednas/backbone.hpp"
#include "ednas/dataset.hpp"
#include "ednas/heads.hpp"

namespace ednas {

struct ModelConfig {
  BackboneConfig backbone;
  int d_z = 128;          // fused width, 2d by default
  int answer_count = 8;   // vqa classes
  TaskKind task = TaskKind::vqa;
  double vg_lambda = 1.0;
};

// The task head bundle; only the configured task's head is initialized.
struct HeadSet {
  TaskKind task = TaskKind::vqa;
  VqaHead vqa;
  ItmHead itm;
  VgHead vg;

  HeadSet() = default;
  HeadSet(const ModelConfig& cfg, Rng& rng);
  void collect(std::vector<TensorPtr>& out) const;
  HeadSet clone() const;
};

using NamedParams = std::vector<std::pair<std::string, TensorPtr>>;

class Model {
 public:
  Model(const ModelConfig& cfg, const Architecture& arch, Rng& rng);
  // Used by Supernet::instantiate; takes ownership of pre-built parts.
  Model(const ModelConfig& cfg, const Architecture& arch, Trunk trunk,
        std::vector<std::unique_ptr<BlockOp>> enc,
        std::vector<std::unique_ptr<BlockOp>> dec, HeadSet heads);

  const ModelConfig& config() const { return cfg_; }
  const Architecture& arch() const { return arch_; }

  BackboneOut forward(const EvalCtx& ctx, const MultimodalSample& s) const;
  // Task loss for a single sample (itm: plain pair BCE against the match
  // flag; mining-based training composes scores itself).
  TensorPtr loss(const EvalCtx& ctx, const MultimodalSample& s) const;
  TensorPtr itm_score(const EvalCtx& ctx, const MultimodalSample& s) const;
  bool correct(const MultimodalSample& s) const;

  std::vector<TensorPtr> params() const;
  NamedParams named_params() const;

  const HeadSet& heads() const { return heads_; }
  HeadSet& heads() { return heads_; }

 private:
  ModelConfig cfg_;
  Architecture arch_;
  Trunk trunk_;
  std::vector<std::unique_ptr<BlockOp>> enc_, dec_;
  HeadSet heads_;
};

// Task loss given already-computed backbone outputs; shared by the
// standalone model and the supernet.
TensorPtr head_loss(const EvalCtx& ctx, const HeadSet& heads,
                    const ModelConfig& cfg, const BackboneOut& out,
                    const MultimodalSample& s);

// Evaluation over a dataset. The loss aggregate sorts per-sample losses
// before summation so the result is invariant to sample order.
struct EvalResult {
  double loss = 0.0;
  double metric = 0.0;  // task accuracy in [0,1]
  int correct = 0;
  int total = 0;
};
EvalResult evaluate_model(const Model& model, const Dataset& data);

}  // namespace ednas
