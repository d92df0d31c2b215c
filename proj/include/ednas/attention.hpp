#pragma once
// The four primitive block operations: self-attention (SA), guided attention
// (GA), feed-forward (FFN) and relation self-attention (RSA), built on a
// generalized scaled dot-product attention with an additive logit bias.
// Every operation wraps its sublayer with a shortcut connection and layer
// normalization and always emits width-d features.

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <string_view>
#include <vector>

#include "ednas/ops.hpp"
#include "ednas/rng.hpp"
#include "ednas/tape.hpp"
#include "ednas/tensor.hpp"

namespace ednas {

enum class OperationKind { SA, GA, FFN, RSA };

const std::vector<OperationKind>& encoder_pool();  // {SA, FFN}
const std::vector<OperationKind>& decoder_pool();  // {SA, RSA, GA, FFN}
std::string_view op_name(OperationKind k);
std::optional<OperationKind> op_from_name(std::string_view name);

inline constexpr double kEpsRelation = 1e-6;   // log underflow guard
inline constexpr double kEpsLayerNorm = 1e-5;
inline constexpr double kMaskPenalty = -1e9;   // padded-key logit

// Captures the post-softmax attention weights of every head evaluated while
// the probe is installed in the EvalCtx.
struct AttentionProbe {
  std::vector<std::vector<double>> head_weights;  // row-major [m x n] each
  std::vector<std::pair<int, int>> head_dims;
};

// Key validity mask; padded positions are excluded from attention.
using KeyMask = std::vector<std::uint8_t>;

TensorPtr init_projection(int fan_in, int fan_out, Rng& rng);

struct Linear {
  TensorPtr w;  // [d_in x d_out]
  TensorPtr b;  // [d_out], may be null
  Linear() = default;
  Linear(int d_in, int d_out, bool bias, Rng& rng);
  TensorPtr apply(Tape* tape, const TensorPtr& x) const;
  void collect(std::vector<TensorPtr>& out) const;
};

struct LayerNormParams {
  TensorPtr gain, bias;
  LayerNormParams() = default;
  explicit LayerNormParams(int d);
  TensorPtr apply(Tape* tape, const TensorPtr& x) const;
  void collect(std::vector<TensorPtr>& out) const;
};

// Multi-head projection weights: per-head W^Q, W^K, W^V of [d x d_h] and the
// output projection W^o of [h*d_h x d]. Requires d % h == 0.
struct AttentionParams {
  int d = 0, h = 0, d_h = 0;
  std::vector<TensorPtr> wq, wk, wv;
  TensorPtr wo;
  AttentionParams() = default;
  AttentionParams(int d, int h, Rng& rng);
  void collect(std::vector<TensorPtr>& out) const;
};

// Two-layer relation MLP [d_r -> d_h -> 1] with ReLU after both layers.
struct RelationMlpParams {
  Linear fc1, fc2;
  RelationMlpParams() = default;
  RelationMlpParams(int d_r, int d_h, Rng& rng);
  void collect(std::vector<TensorPtr>& out) const;
};

// softmax(Q K^T / sqrt(width) + bias) V. bias may be null ("no relation
// prior") and may carry gradient. Rejects empty key sets.
TensorPtr generalized_attention(Tape* tape, const TensorPtr& q,
                                const TensorPtr& k, const TensorPtr& v,
                                const TensorPtr& bias,
                                AttentionProbe* probe = nullptr);

// h parallel generalized attentions over projected inputs, concatenated and
// projected by W^o. The bias is shared across heads.
TensorPtr multi_head_attention(Tape* tape, const TensorPtr& q,
                               const TensorPtr& k, const TensorPtr& v,
                               const TensorPtr& bias,
                               const AttentionParams& params,
                               AttentionProbe* probe = nullptr);

// log(MLP(R) + eps) reshaped to [m x m]; relation has shape [m*m x d_r].
TensorPtr relation_bias(Tape* tape, const TensorPtr& relation, int m,
                        const RelationMlpParams& params);

// Constant [m x n] bias with kMaskPenalty at invalid key columns; null when
// mask is absent or all-valid.
TensorPtr mask_bias(int m, const KeyMask* mask);

// Inputs a block operation may consume. `x` is the primary sequence; the
// rest are optional and only read by the operations that need them.
struct BlockInputs {
  TensorPtr x;
  TensorPtr relation;               // [m*m x d_r], RSA
  TensorPtr cross;                  // encoder output, GA
  const KeyMask* self_mask = nullptr;
  const KeyMask* cross_mask = nullptr;
};

class BlockOp {
 public:
  virtual ~BlockOp() = default;
  virtual OperationKind kind() const = 0;
  virtual TensorPtr forward(const EvalCtx& ctx, const BlockInputs& in) = 0;
  virtual void collect(std::vector<TensorPtr>& out) const = 0;
  virtual std::unique_ptr<BlockOp> clone() const = 0;
};

class SaOp : public BlockOp {
 public:
  SaOp(int d_in, int d, int h, Rng& rng);
  OperationKind kind() const override { return OperationKind::SA; }
  TensorPtr forward(const EvalCtx& ctx, const BlockInputs& in) override;
  TensorPtr forward(const EvalCtx& ctx, const TensorPtr& x,
                    const KeyMask* mask = nullptr);
  void collect(std::vector<TensorPtr>& out) const override;
  std::unique_ptr<BlockOp> clone() const override;

  AttentionParams attn;
  std::optional<Linear> adapt;  // present when d_in != d
  LayerNormParams norm;
};

class GaOp : public BlockOp {
 public:
  GaOp(int d_in, int d, int h, Rng& rng);
  OperationKind kind() const override { return OperationKind::GA; }
  TensorPtr forward(const EvalCtx& ctx, const BlockInputs& in) override;
  TensorPtr forward(const EvalCtx& ctx, const TensorPtr& x, const TensorPtr& y,
                    const KeyMask* y_mask = nullptr);
  void collect(std::vector<TensorPtr>& out) const override;
  std::unique_ptr<BlockOp> clone() const override;

  AttentionParams attn;
  std::optional<Linear> adapt;
  LayerNormParams norm;
};

class FfnOp : public BlockOp {
 public:
  FfnOp(int d_in, int d, Rng& rng, double dropout_rate = 0.1);
  OperationKind kind() const override { return OperationKind::FFN; }
  TensorPtr forward(const EvalCtx& ctx, const BlockInputs& in) override;
  TensorPtr forward(const EvalCtx& ctx, const TensorPtr& x);
  void collect(std::vector<TensorPtr>& out) const override;
  std::unique_ptr<BlockOp> clone() const override;

  Linear fc_expand;    // [d x 4d]
  Linear fc_contract;  // [4d x d]
  std::optional<Linear> adapt;
  LayerNormParams norm;
  double dropout_rate;
};

class RsaOp : public BlockOp {
 public:
  RsaOp(int d_in, int d, int h, int d_r, Rng& rng);
  OperationKind kind() const override { return OperationKind::RSA; }
  TensorPtr forward(const EvalCtx& ctx, const BlockInputs& in) override;
  TensorPtr forward(const EvalCtx& ctx, const TensorPtr& x,
                    const TensorPtr& relation, const KeyMask* mask = nullptr);
  void collect(std::vector<TensorPtr>& out) const override;
  std::unique_ptr<BlockOp> clone() const override;

  AttentionParams attn;
  RelationMlpParams relation_mlp;
  std::optional<Linear> adapt;
  LayerNormParams norm;
  int d_r = 4;
};

std::unique_ptr<BlockOp> make_block_op(OperationKind kind, int d_in, int d,
                                       int h, int d_r, Rng& rng,
                                       double dropout_rate = 0.1);

}  // namespace ednas
