#pragma once
// Task heads on top of the backbone outputs X^(M), Y^(N): VQA answer
// classification, image-text matching with hard-negative mining, and visual
// grounding with a ranking + regression loss.

#include <array>
#include <functional>
#include <vector>

#include "ednas/attention.hpp"
#include "ednas/backbone.hpp"
#include "ednas/losses.hpp"

namespace ednas {

inline constexpr double kIouThreshold = 0.5;  // sigma for VG regression

// Two-layer scoring MLP (FC_d then FC_1) whose softmaxed outputs weight the
// rows of the input into a single feature vector.
struct ReductionParams {
  Linear fc1, fc2;
  ReductionParams() = default;
  ReductionParams(int d, Rng& rng);
  void collect(std::vector<TensorPtr>& out) const;
  ReductionParams clone() const;
};

struct Reduced {
  TensorPtr weights;  // [k x 1] distribution over rows
  TensorPtr feature;  // [1 x d]
};

// weights = softmax(MLP(F)) over rows, feature = sum_i weights_i F_i.
// Masked rows (when a mask is given) receive zero weight.
Reduced attentional_reduce(Tape* tape, const TensorPtr& f,
                           const ReductionParams& params,
                           const KeyMask* mask = nullptr);

struct FusionParams {
  TensorPtr wx, wy;  // [d x d_z]
  LayerNormParams norm;
  int d_z = 0;
  FusionParams() = default;
  FusionParams(int d, int d_z, Rng& rng);
  void collect(std::vector<TensorPtr>& out) const;
  FusionParams clone() const;
};

// z = LayerNorm(W_x^T xt + W_y^T yt), shape [1 x d_z].
TensorPtr fuse(Tape* tape, const TensorPtr& xt, const TensorPtr& yt,
               const FusionParams& params);

// ---------------------------------------------------------------------------

class VqaHead {
 public:
  VqaHead() = default;
  VqaHead(int d, int d_z, int answer_count, Rng& rng);
  TensorPtr forward(const EvalCtx& ctx, const TensorPtr& x_final,
                    const TensorPtr& y_final, const KeyMask* x_mask) const;
  // Single-label rule: softmax cross-entropy against the answer index.
  TensorPtr loss(Tape* tape, const TensorPtr& logits, int answer) const;
  // Multi-label rule: mean per-class binary cross-entropy.
  TensorPtr loss_multilabel(Tape* tape, const TensorPtr& logits,
                            const std::vector<std::uint8_t>& targets) const;
  void collect(std::vector<TensorPtr>& out) const;
  VqaHead clone() const;
  int answer_count() const { return k_; }

  ReductionParams reduce_x, reduce_y;
  FusionParams fusion;
  Linear classifier;  // [d_z x k]

 private:
  int k_ = 0;
};

class ItmHead {
 public:
  ItmHead() = default;
  ItmHead(int d, int d_z, Rng& rng);
  // Matching score in (0,1).
  TensorPtr score(const EvalCtx& ctx, const TensorPtr& x_final,
                  const TensorPtr& y_final, const KeyMask* x_mask) const;
  void collect(std::vector<TensorPtr>& out) const;
  ItmHead clone() const;

  ReductionParams reduce_x, reduce_y;
  FusionParams fusion;
  TensorPtr wz;  // [d_z x 1]
};

// -[2 log s(I,T) + log(1 - s(I,T')) + log(1 - s(I',T))], composed from
// binary cross-entropy terms (the positive term is double-weighted, matching
// the printed matching loss).
TensorPtr itm_loss_from_scores(Tape* tape, const TensorPtr& s_pos,
                               const TensorPtr& s_neg_text,
                               const TensorPtr& s_neg_image);

struct MinedNegatives {
  int text_idx = -1;
  int image_idx = -1;
};

// Samples n_sample candidates per direction (without replacement) from the
// given pools, scores them, keeps the top_k highest-scoring, and returns one
// uniformly at random from each top set. Pools smaller than n_sample fall
// back to scoring the whole pool. score_text(i) rates (I, T_i); score_image
// rates (I_i, T).
MinedNegatives mine_hard_negatives(
    const std::function<double(int)>& score_text,
    const std::function<double(int)>& score_image, int pos_id,
    const std::vector<int>& text_pool, const std::vector<int>& image_pool,
    Rng& rng, int n_sample = 64, int top_k = 5);

// ---------------------------------------------------------------------------

double compute_iou(const Box& a, const Box& b);
std::array<double, 4> encode_box_offsets(const Box& proposal, const Box& gt);
Box decode_box_offsets(const Box& proposal, const std::array<double, 4>& off);

struct VgTargets {
  std::vector<double> iou;                       // S*, in [0,1]
  std::vector<std::array<double, 4>> offsets;    // b*, per object
  std::vector<std::uint8_t> qualifies;           // IoU > sigma
};

VgTargets make_vg_targets(const std::vector<Box>& proposals, const Box& gt,
                          double sigma_iou = kIouThreshold);

struct VgOut {
  TensorPtr scores;   // [n x 1]
  TensorPtr offsets;  // [n x 4]
};

class VgHead {
 public:
  VgHead() = default;
  VgHead(int d, int d_z, Rng& rng);
  VgOut forward(const EvalCtx& ctx, const TensorPtr& x_final,
                const TensorPtr& y_final, const KeyMask* x_mask) const;
  void collect(std::vector<TensorPtr>& out) const;
  VgHead clone() const;

  ReductionParams reduce_x;
  TensorPtr wx, wy;  // [d x d_z]
  LayerNormParams norm;
  Linear score_proj;   // [d_z x 1]
  Linear offset_proj;  // [d_z x 4]
};

// KL(softmax(S*) || softmax(S)) + lambda * mean smooth-L1 over qualifying
// objects; the regression term is zero when nothing qualifies.
TensorPtr vg_loss(Tape* tape, const VgOut& out, const VgTargets& targets,
                  double lambda = 1.0);

}  // namespace ednas
