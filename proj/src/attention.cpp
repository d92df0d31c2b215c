#include "ednas/attention.hpp"

#include <cmath>

namespace ednas {
namespace {

TensorPtr clone_tensor(const TensorPtr& t) {
  if (!t) return nullptr;
  return Tensor::from(t->shape(), t->values(), t->requires_grad());
}

Linear clone_params(const Linear& l) {
  Linear c;
  c.w = clone_tensor(l.w);
  c.b = clone_tensor(l.b);
  return c;
}

std::optional<Linear> clone_params(const std::optional<Linear>& l) {
  if (!l) return std::nullopt;
  return clone_params(*l);
}

LayerNormParams clone_params(const LayerNormParams& n) {
  LayerNormParams c;
  c.gain = clone_tensor(n.gain);
  c.bias = clone_tensor(n.bias);
  return c;
}

AttentionParams clone_params(const AttentionParams& a) {
  AttentionParams c;
  c.d = a.d;
  c.h = a.h;
  c.d_h = a.d_h;
  for (int j = 0; j < a.h; ++j) {
    c.wq.push_back(clone_tensor(a.wq[j]));
    c.wk.push_back(clone_tensor(a.wk[j]));
    c.wv.push_back(clone_tensor(a.wv[j]));
  }
  c.wo = clone_tensor(a.wo);
  return c;
}

RelationMlpParams clone_params(const RelationMlpParams& r) {
  RelationMlpParams c;
  c.fc1 = clone_params(r.fc1);
  c.fc2 = clone_params(r.fc2);
  return c;
}

}  // namespace

const std::vector<OperationKind>& encoder_pool() {
  static const std::vector<OperationKind> pool{OperationKind::SA,
                                               OperationKind::FFN};
  return pool;
}

const std::vector<OperationKind>& decoder_pool() {
  static const std::vector<OperationKind> pool{
      OperationKind::SA, OperationKind::RSA, OperationKind::GA,
      OperationKind::FFN};
  return pool;
}

std::string_view op_name(OperationKind k) {
  switch (k) {
    case OperationKind::SA: return "SA";
    case OperationKind::GA: return "GA";
    case OperationKind::FFN: return "FFN";
    case OperationKind::RSA: return "RSA";
  }
  return "?";
}

std::optional<OperationKind> op_from_name(std::string_view name) {
  if (name == "SA") return OperationKind::SA;
  if (name == "GA") return OperationKind::GA;
  if (name == "FFN") return OperationKind::FFN;
  if (name == "RSA") return OperationKind::RSA;
  return std::nullopt;
}

TensorPtr init_projection(int fan_in, int fan_out, Rng& rng) {
  auto t = Tensor::zeros({fan_in, fan_out}, /*requires_grad=*/true);
  const double stddev = std::sqrt(1.0 / fan_in);
  for (std::size_t i = 0; i < t->size(); ++i)
    t->data()[i] = rng.normal(0.0, stddev);
  return t;
}

Linear::Linear(int d_in, int d_out, bool bias, Rng& rng)
    : w(init_projection(d_in, d_out, rng)),
      b(bias ? Tensor::zeros({d_out}, true) : nullptr) {}

TensorPtr Linear::apply(Tape* tape, const TensorPtr& x) const {
  TensorPtr y = ops::matmul(tape, x, w);
  if (b) y = ops::add_row(tape, y, b);
  return y;
}

void Linear::collect(std::vector<TensorPtr>& out) const {
  out.push_back(w);
  if (b) out.push_back(b);
}

LayerNormParams::LayerNormParams(int d)
    : gain(Tensor::zeros({d}, true)), bias(Tensor::zeros({d}, true)) {
  for (int i = 0; i < d; ++i) gain->data()[i] = 1.0;
}

TensorPtr LayerNormParams::apply(Tape* tape, const TensorPtr& x) const {
  return ops::layer_norm(tape, x, gain, bias, kEpsLayerNorm);
}

void LayerNormParams::collect(std::vector<TensorPtr>& out) const {
  out.push_back(gain);
  out.push_back(bias);
}

AttentionParams::AttentionParams(int d_, int h_, Rng& rng) : d(d_), h(h_) {
  require(h > 0 && d > 0, "attention: d and h must be positive");
  require(d % h == 0, "attention: d must be divisible by h");
  d_h = d / h;
  wq.reserve(h);
  wk.reserve(h);
  wv.reserve(h);
  for (int j = 0; j < h; ++j) {
    wq.push_back(init_projection(d, d_h, rng));
    wk.push_back(init_projection(d, d_h, rng));
    wv.push_back(init_projection(d, d_h, rng));
  }
  wo = init_projection(h * d_h, d, rng);
}

void AttentionParams::collect(std::vector<TensorPtr>& out) const {
  for (int j = 0; j < h; ++j) {
    out.push_back(wq[j]);
    out.push_back(wk[j]);
    out.push_back(wv[j]);
  }
  out.push_back(wo);
}

RelationMlpParams::RelationMlpParams(int d_r, int d_h, Rng& rng)
    : fc1(d_r, d_h, /*bias=*/true, rng), fc2(d_h, 1, /*bias=*/true, rng) {}

void RelationMlpParams::collect(std::vector<TensorPtr>& out) const {
  fc1.collect(out);
  fc2.collect(out);
}

TensorPtr generalized_attention(Tape* tape, const TensorPtr& q,
                                const TensorPtr& k, const TensorPtr& v,
                                const TensorPtr& bias, AttentionProbe* probe) {
  const int width = q->cols();
  const int m = q->rows();
  const int n = k->rows();
  require(n >= 1, "attention: key set must be non-empty");
  require(k->cols() == width, "attention: query/key width mismatch");
  require(v->rows() == n, "attention: key/value count mismatch");
  TensorPtr logits =
      ops::scale(tape, ops::matmul_nt(tape, q, k), 1.0 / std::sqrt(width));
  if (bias) {
    require(bias->rows() == m && bias->cols() == n,
            "attention: bias must be [m x n]");
    logits = ops::add(tape, logits, bias);
  }
  TensorPtr weights = ops::softmax_rows(tape, logits);
  if (probe) {
    probe->head_weights.push_back(weights->values());
    probe->head_dims.emplace_back(m, n);
  }
  return ops::matmul(tape, weights, v);
}

TensorPtr multi_head_attention(Tape* tape, const TensorPtr& q,
                               const TensorPtr& k, const TensorPtr& v,
                               const TensorPtr& bias,
                               const AttentionParams& params,
                               AttentionProbe* probe) {
  std::vector<TensorPtr> heads;
  heads.reserve(params.h);
  for (int j = 0; j < params.h; ++j) {
    TensorPtr qj = ops::matmul(tape, q, params.wq[j]);
    TensorPtr kj = ops::matmul(tape, k, params.wk[j]);
    TensorPtr vj = ops::matmul(tape, v, params.wv[j]);
    heads.push_back(generalized_attention(tape, qj, kj, vj, bias, probe));
  }
  return ops::matmul(tape, ops::concat_cols(tape, heads), params.wo);
}

TensorPtr relation_bias(Tape* tape, const TensorPtr& relation, int m,
                        const RelationMlpParams& params) {
  require(relation->rows() == m * m,
          "relation_bias: expected m*m relation rows");
  TensorPtr h1 = ops::relu(tape, params.fc1.apply(tape, relation));
  TensorPtr h2 = ops::relu(tape, params.fc2.apply(tape, h1));
  return ops::reshape(tape, ops::log_shift(tape, h2, kEpsRelation), {m, m});
}

TensorPtr mask_bias(int m, const KeyMask* mask) {
  if (!mask) return nullptr;
  bool all_valid = true;
  for (auto v : *mask) all_valid = all_valid && v;
  if (all_valid) return nullptr;
  const int n = static_cast<int>(mask->size());
  auto bias = Tensor::zeros({m, n});
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j)
      if (!(*mask)[static_cast<std::size_t>(j)])
        bias->data()[static_cast<std::size_t>(i) * n + j] = kMaskPenalty;
  return bias;
}

// ---------------------------------------------------------------------------
// SA

SaOp::SaOp(int d_in, int d, int h, Rng& rng) : attn(d, h, rng), norm(d) {
  if (d_in != d) adapt.emplace(d_in, d, /*bias=*/false, rng);
}

TensorPtr SaOp::forward(const EvalCtx& ctx, const TensorPtr& x,
                        const KeyMask* mask) {
  require(x->rows() >= 1, "SA: empty input");
  TensorPtr xa = adapt ? adapt->apply(ctx.tape, x) : x;
  TensorPtr bias = mask_bias(xa->rows(), mask);
  TensorPtr att =
      multi_head_attention(ctx.tape, xa, xa, xa, bias, attn, ctx.probe);
  return norm.apply(ctx.tape, ops::add(ctx.tape, xa, att));
}

TensorPtr SaOp::forward(const EvalCtx& ctx, const BlockInputs& in) {
  return forward(ctx, in.x, in.self_mask);
}

void SaOp::collect(std::vector<TensorPtr>& out) const {
  if (adapt) adapt->collect(out);
  attn.collect(out);
  norm.collect(out);
}

std::unique_ptr<BlockOp> SaOp::clone() const {
  auto c = std::make_unique<SaOp>(*this);
  c->adapt = clone_params(adapt);
  c->attn = clone_params(attn);
  c->norm = clone_params(norm);
  return c;
}

// ---------------------------------------------------------------------------
// GA

GaOp::GaOp(int d_in, int d, int h, Rng& rng) : attn(d, h, rng), norm(d) {
  if (d_in != d) adapt.emplace(d_in, d, /*bias=*/false, rng);
}

TensorPtr GaOp::forward(const EvalCtx& ctx, const TensorPtr& x,
                        const TensorPtr& y, const KeyMask* y_mask) {
  require(x->rows() >= 1 && y->rows() >= 1, "GA: empty input");
  TensorPtr xa = adapt ? adapt->apply(ctx.tape, x) : x;
  require(y->cols() == attn.d, "GA: guiding features must have width d");
  TensorPtr bias = mask_bias(xa->rows(), y_mask);
  TensorPtr att =
      multi_head_attention(ctx.tape, xa, y, y, bias, attn, ctx.probe);
  return norm.apply(ctx.tape, ops::add(ctx.tape, xa, att));
}

TensorPtr GaOp::forward(const EvalCtx& ctx, const BlockInputs& in) {
  require(in.cross != nullptr, "GA: missing cross-modal input");
  return forward(ctx, in.x, in.cross, in.cross_mask);
}

void GaOp::collect(std::vector<TensorPtr>& out) const {
  if (adapt) adapt->collect(out);
  attn.collect(out);
  norm.collect(out);
}

std::unique_ptr<BlockOp> GaOp::clone() const {
  auto c = std::make_unique<GaOp>(*this);
  c->adapt = clone_params(adapt);
  c->attn = clone_params(attn);
  c->norm = clone_params(norm);
  return c;
}

// ---------------------------------------------------------------------------
// FFN

FfnOp::FfnOp(int d_in, int d, Rng& rng, double dropout_rate_)
    : fc_expand(d, 4 * d, /*bias=*/true, rng),
      fc_contract(4 * d, d, /*bias=*/true, rng),
      norm(d),
      dropout_rate(dropout_rate_) {
  if (d_in != d) adapt.emplace(d_in, d, /*bias=*/false, rng);
}

TensorPtr FfnOp::forward(const EvalCtx& ctx, const TensorPtr& x) {
  TensorPtr xa = adapt ? adapt->apply(ctx.tape, x) : x;
  TensorPtr hidden = ops::relu(ctx.tape, fc_expand.apply(ctx.tape, xa));
  hidden = ops::dropout(ctx, hidden, dropout_rate);
  TensorPtr out = fc_contract.apply(ctx.tape, hidden);
  return norm.apply(ctx.tape, ops::add(ctx.tape, xa, out));
}

TensorPtr FfnOp::forward(const EvalCtx& ctx, const BlockInputs& in) {
  return forward(ctx, in.x);
}

void FfnOp::collect(std::vector<TensorPtr>& out) const {
  if (adapt) adapt->collect(out);
  fc_expand.collect(out);
  fc_contract.collect(out);
  norm.collect(out);
}

std::unique_ptr<BlockOp> FfnOp::clone() const {
  auto c = std::make_unique<FfnOp>(*this);
  c->adapt = clone_params(adapt);
  c->fc_expand = clone_params(fc_expand);
  c->fc_contract = clone_params(fc_contract);
  c->norm = clone_params(norm);
  return c;
}

// ---------------------------------------------------------------------------
// RSA

RsaOp::RsaOp(int d_in, int d, int h, int d_r_, Rng& rng)
    : attn(d, h, rng), relation_mlp(d_r_, d / h, rng), norm(d), d_r(d_r_) {
  if (d_in != d) adapt.emplace(d_in, d, /*bias=*/false, rng);
}

TensorPtr RsaOp::forward(const EvalCtx& ctx, const TensorPtr& x,
                         const TensorPtr& relation, const KeyMask* mask) {
  TensorPtr xa = adapt ? adapt->apply(ctx.tape, x) : x;
  const int m = xa->rows();
  require(relation != nullptr, "RSA: missing relation features");
  require(relation->rows() == m * m && relation->cols() == d_r,
          "RSA: relation features must be [m*m x d_r]");
  TensorPtr bias = relation_bias(ctx.tape, relation, m, relation_mlp);
  if (TensorPtr mb = mask_bias(m, mask)) bias = ops::add(ctx.tape, bias, mb);
  TensorPtr att =
      multi_head_attention(ctx.tape, xa, xa, xa, bias, attn, ctx.probe);
  return norm.apply(ctx.tape, ops::add(ctx.tape, xa, att));
}

TensorPtr RsaOp::forward(const EvalCtx& ctx, const BlockInputs& in) {
  return forward(ctx, in.x, in.relation, in.self_mask);
}

void RsaOp::collect(std::vector<TensorPtr>& out) const {
  if (adapt) adapt->collect(out);
  relation_mlp.collect(out);
  attn.collect(out);
  norm.collect(out);
}

std::unique_ptr<BlockOp> RsaOp::clone() const {
  auto c = std::make_unique<RsaOp>(*this);
  c->adapt = clone_params(adapt);
  c->attn = clone_params(attn);
  c->relation_mlp = clone_params(relation_mlp);
  c->norm = clone_params(norm);
  return c;
}

std::unique_ptr<BlockOp> make_block_op(OperationKind kind, int d_in, int d,
                                       int h, int d_r, Rng& rng,
                                       double dropout_rate) {
  switch (kind) {
    case OperationKind::SA: return std::make_unique<SaOp>(d_in, d, h, rng);
    case OperationKind::GA: return std::make_unique<GaOp>(d_in, d, h, rng);
    case OperationKind::FFN:
      return std::make_unique<FfnOp>(d_in, d, rng, dropout_rate);
    case OperationKind::RSA:
      return std::make_unique<RsaOp>(d_in, d, h, d_r, rng);
  }
  throw std::invalid_argument("unknown operation kind");
}

}  // namespace ednas
