#pragma once
// Unified encoder-decoder backbone: sentence featurization, object/relation
// featurization, and the recursive block stacks whose per-block operations
// come from an Architecture.

#include <memory>
#include <string>
#include <vector>

#include "ednas/attention.hpp"
#include "ednas/rng.hpp"
#include "ednas/tensor.hpp"

namespace ednas {

inline constexpr double kEpsGeom = 1e-3;  // coincident-center clamp

struct Architecture {
  std::vector<OperationKind> encoder_ops;  // each in {SA, FFN}
  std::vector<OperationKind> decoder_ops;  // each in {SA, RSA, GA, FFN}

  bool operator==(const Architecture&) const = default;
  bool has_decoder_op(OperationKind k) const;
};

// Throws (naming the offending op) unless lengths are exactly M / N and
// every op belongs to its pool.
void validate_architecture(const Architecture& arch, int M, int N);

// (SA,FFN)^L encoder and (SA,GA,FFN)^L decoder: the stacked co-attention
// layout an L-layer MCAN network uses.
Architecture mcan_architecture(int L);

std::string arch_to_string(const Architecture& arch);

struct Box {
  double x = 0, y = 0, w = 1, h = 1;  // center + extents
};

enum class TaskKind { vqa, itm, vg };
std::string_view task_name(TaskKind t);

struct MultimodalSample {
  int id = 0;
  std::vector<int> tokens;       // unpadded, ids < vocab
  int n = 0, d_y = 0;
  std::vector<double> objects;   // [n x d_y] row-major
  std::vector<Box> boxes;        // n boxes, w > 0, h > 0
  int answer = -1;               // vqa
  int match = -1;                // itm
  Box gt_box;                    // vg

  // Cached constant tensors, built once by Dataset::prepare().
  TensorPtr objects_t;
  TensorPtr relation_t;          // [n*n x 4]
};

// 4-D log-ratio geometry for every object pair, flattened to [n*n x 4]:
//   [log(max(|xi-xj|, eps)/wi), log(max(|yi-yj|, eps)/hi),
//    log(wj/wi), log(hj/hi)]
TensorPtr compute_relation_features(const std::vector<Box>& boxes,
                                    double eps_geom = kEpsGeom);

// Learned embedding + single-layer gated recurrent encoder producing
// [m x d_x] contextual features; pads/trims to m and reports the key mask.
class SentenceEncoder {
 public:
  SentenceEncoder() = default;
  SentenceEncoder(int vocab, int d_x, Rng& rng);
  TensorPtr forward(const EvalCtx& ctx, const std::vector<int>& tokens, int m,
                    KeyMask* mask_out = nullptr) const;
  void collect(std::vector<TensorPtr>& out) const;
  SentenceEncoder clone() const;
  int vocab() const { return vocab_; }
  int width() const { return d_x_; }

 private:
  int vocab_ = 0, d_x_ = 0;
  TensorPtr embedding_;               // [vocab x d_x]
  Linear wz_, uz_, wr_, ur_, wh_, uh_;
};

struct BackboneConfig {
  int vocab = 32;
  int m_max = 14;
  int d_x = 64, d_y = 64, d = 64;
  int h = 4;
  int d_r = 4;
  double dropout = 0.1;
};

// Shared non-searched trunk: sentence encoder plus the one-time width
// adapters applied before the first block of each stack.
struct Trunk {
  Trunk() = default;
  Trunk(const BackboneConfig& cfg, Rng& rng);
  SentenceEncoder sent;
  std::unique_ptr<Linear> adapt_x;  // null when d_x == d
  std::unique_ptr<Linear> adapt_y;  // null when d_y == d
  void collect(std::vector<TensorPtr>& out) const;
  Trunk clone() const;
};

struct BackboneOut {
  TensorPtr x_final;  // [m x d]
  TensorPtr y_final;  // [n x d]
  KeyMask x_mask;
};

// Runs the shared trunk then the recursive block stacks. Each decoder block
// receives Y^(i-1) and may additionally read R (RSA) or X^(M) (GA).
BackboneOut backbone_forward(const EvalCtx& ctx, const BackboneConfig& cfg,
                             const Trunk& trunk,
                             const std::vector<BlockOp*>& encoder_blocks,
                             const std::vector<BlockOp*>& decoder_blocks,
                             const MultimodalSample& sample);

}  // namespace ednas
