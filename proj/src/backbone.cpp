#include "ednas/backbone.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace ednas {

bool Architecture::has_decoder_op(OperationKind k) const {
  return std::find(decoder_ops.begin(), decoder_ops.end(), k) !=
         decoder_ops.end();
}

namespace {

bool in_pool(OperationKind k, const std::vector<OperationKind>& pool) {
  return std::find(pool.begin(), pool.end(), k) != pool.end();
}

}  // namespace

void validate_architecture(const Architecture& arch, int M, int N) {
  require(static_cast<int>(arch.encoder_ops.size()) == M,
          "architecture: expected " + std::to_string(M) + " encoder ops, got " +
              std::to_string(arch.encoder_ops.size()));
  require(static_cast<int>(arch.decoder_ops.size()) == N,
          "architecture: expected " + std::to_string(N) + " decoder ops, got " +
              std::to_string(arch.decoder_ops.size()));
  for (OperationKind k : arch.encoder_ops)
    require(in_pool(k, encoder_pool()),
            "architecture: encoder op " + std::string(op_name(k)) +
                " not in {SA, FFN}");
  for (OperationKind k : arch.decoder_ops)
    require(in_pool(k, decoder_pool()),
            "architecture: decoder op " + std::string(op_name(k)) +
                " not in {SA, RSA, GA, FFN}");
}

Architecture mcan_architecture(int L) {
  Architecture arch;
  for (int i = 0; i < L; ++i) {
    arch.encoder_ops.push_back(OperationKind::SA);
    arch.encoder_ops.push_back(OperationKind::FFN);
  }
  for (int i = 0; i < L; ++i) {
    arch.decoder_ops.push_back(OperationKind::SA);
    arch.decoder_ops.push_back(OperationKind::GA);
    arch.decoder_ops.push_back(OperationKind::FFN);
  }
  return arch;
}

std::string arch_to_string(const Architecture& arch) {
  std::ostringstream os;
  os << "enc[";
  for (std::size_t i = 0; i < arch.encoder_ops.size(); ++i)
    os << (i ? "," : "") << op_name(arch.encoder_ops[i]);
  os << "] dec[";
  for (std::size_t i = 0; i < arch.decoder_ops.size(); ++i)
    os << (i ? "," : "") << op_name(arch.decoder_ops[i]);
  os << "]";
  return os.str();
}

std::string_view task_name(TaskKind t) {
  switch (t) {
    case TaskKind::vqa: return "vqa";
    case TaskKind::itm: return "itm";
    case TaskKind::vg: return "vg";
  }
  return "?";
}

TensorPtr compute_relation_features(const std::vector<Box>& boxes,
                                    double eps_geom) {
  const int n = static_cast<int>(boxes.size());
  require(n >= 1, "relation features: need at least one box");
  for (const Box& b : boxes)
    require(b.w > 0.0 && b.h > 0.0,
            "relation features: box extents must be positive");
  auto r = Tensor::zeros({n, n, 4});
  double* out = r->data();
  for (int i = 0; i < n; ++i) {
    const Box& bi = boxes[static_cast<std::size_t>(i)];
    for (int j = 0; j < n; ++j) {
      const Box& bj = boxes[static_cast<std::size_t>(j)];
      double* e = out + (static_cast<std::size_t>(i) * n + j) * 4;
      e[0] = std::log(std::max(std::fabs(bi.x - bj.x), eps_geom) / bi.w);
      e[1] = std::log(std::max(std::fabs(bi.y - bj.y), eps_geom) / bi.h);
      e[2] = std::log(bj.w / bi.w);
      e[3] = std::log(bj.h / bi.h);
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// Sentence encoder: embedding lookup + one GRU layer.

SentenceEncoder::SentenceEncoder(int vocab, int d_x, Rng& rng)
    : vocab_(vocab),
      d_x_(d_x),
      embedding_(init_projection(vocab, d_x, rng)),
      wz_(d_x, d_x, true, rng),
      uz_(d_x, d_x, false, rng),
      wr_(d_x, d_x, true, rng),
      ur_(d_x, d_x, false, rng),
      wh_(d_x, d_x, true, rng),
      uh_(d_x, d_x, false, rng) {}

TensorPtr SentenceEncoder::forward(const EvalCtx& ctx,
                                   const std::vector<int>& tokens, int m,
                                   KeyMask* mask_out) const {
  require(!tokens.empty(), "sentence encoder: empty token list");
  std::vector<int> padded(static_cast<std::size_t>(m), 0);
  const std::size_t len =
      std::min(tokens.size(), static_cast<std::size_t>(m));
  for (std::size_t i = 0; i < len; ++i) {
    require(tokens[i] >= 0 && tokens[i] < vocab_,
            "sentence encoder: token id out of range");
    padded[i] = tokens[i];
  }
  if (mask_out) {
    mask_out->assign(static_cast<std::size_t>(m), 0);
    for (std::size_t i = 0; i < len; ++i) (*mask_out)[i] = 1;
  }

  Tape* tape = ctx.tape;
  TensorPtr ones = Tensor::from(
      {1, d_x_}, std::vector<double>(static_cast<std::size_t>(d_x_), 1.0));
  TensorPtr h = Tensor::zeros({1, d_x_});
  std::vector<TensorPtr> states;
  states.reserve(static_cast<std::size_t>(m));
  for (int t = 0; t < m; ++t) {
    TensorPtr xt = ops::embedding_rows(tape, embedding_,
                                       {padded[static_cast<std::size_t>(t)]});
    TensorPtr z = ops::sigmoid(
        tape, ops::add(tape, wz_.apply(tape, xt), uz_.apply(tape, h)));
    TensorPtr r = ops::sigmoid(
        tape, ops::add(tape, wr_.apply(tape, xt), ur_.apply(tape, h)));
    TensorPtr cand = ops::tanh(
        tape, ops::add(tape, wh_.apply(tape, xt),
                       uh_.apply(tape, ops::mul(tape, r, h))));
    // h = (1-z) .* h + z .* cand
    TensorPtr one_minus_z = ops::sub(tape, ones, z);
    h = ops::add(tape, ops::mul(tape, one_minus_z, h),
                 ops::mul(tape, z, cand));
    states.push_back(h);
  }
  return ops::concat_rows(tape, states);
}

void SentenceEncoder::collect(std::vector<TensorPtr>& out) const {
  out.push_back(embedding_);
  wz_.collect(out);
  uz_.collect(out);
  wr_.collect(out);
  ur_.collect(out);
  wh_.collect(out);
  uh_.collect(out);
}

namespace {

TensorPtr copy_tensor(const TensorPtr& t) {
  if (!t) return nullptr;
  return Tensor::from(t->shape(), t->values(), t->requires_grad());
}

Linear copy_linear(const Linear& l) {
  Linear c;
  c.w = copy_tensor(l.w);
  c.b = copy_tensor(l.b);
  return c;
}

}  // namespace

SentenceEncoder SentenceEncoder::clone() const {
  SentenceEncoder c;
  c.vocab_ = vocab_;
  c.d_x_ = d_x_;
  c.embedding_ = copy_tensor(embedding_);
  c.wz_ = copy_linear(wz_);
  c.uz_ = copy_linear(uz_);
  c.wr_ = copy_linear(wr_);
  c.ur_ = copy_linear(ur_);
  c.wh_ = copy_linear(wh_);
  c.uh_ = copy_linear(uh_);
  return c;
}

// ---------------------------------------------------------------------------
// Trunk

Trunk::Trunk(const BackboneConfig& cfg, Rng& rng)
    : sent(cfg.vocab, cfg.d_x, rng) {
  if (cfg.d_x != cfg.d)
    adapt_x = std::make_unique<Linear>(cfg.d_x, cfg.d, false, rng);
  if (cfg.d_y != cfg.d)
    adapt_y = std::make_unique<Linear>(cfg.d_y, cfg.d, false, rng);
}

void Trunk::collect(std::vector<TensorPtr>& out) const {
  sent.collect(out);
  if (adapt_x) adapt_x->collect(out);
  if (adapt_y) adapt_y->collect(out);
}

Trunk Trunk::clone() const {
  Trunk c;
  c.sent = sent.clone();
  if (adapt_x) c.adapt_x = std::make_unique<Linear>(copy_linear(*adapt_x));
  if (adapt_y) c.adapt_y = std::make_unique<Linear>(copy_linear(*adapt_y));
  return c;
}

// ---------------------------------------------------------------------------
// Backbone forward

BackboneOut backbone_forward(const EvalCtx& ctx, const BackboneConfig& cfg,
                             const Trunk& trunk,
                             const std::vector<BlockOp*>& encoder_blocks,
                             const std::vector<BlockOp*>& decoder_blocks,
                             const MultimodalSample& sample) {
  Tape* tape = ctx.tape;
  BackboneOut out;

  TensorPtr x = trunk.sent.forward(ctx, sample.tokens, cfg.m_max, &out.x_mask);
  if (trunk.adapt_x) x = trunk.adapt_x->apply(tape, x);

  BlockInputs enc_in;
  enc_in.self_mask = &out.x_mask;
  for (BlockOp* op : encoder_blocks) {
    enc_in.x = x;
    x = op->forward(ctx, enc_in);
  }
  out.x_final = x;

  require(sample.objects_t != nullptr && sample.relation_t != nullptr,
          "backbone: sample tensors not prepared");
  TensorPtr y = sample.objects_t;
  if (trunk.adapt_y) y = trunk.adapt_y->apply(tape, y);

  BlockInputs dec_in;
  dec_in.relation = sample.relation_t;
  dec_in.cross = out.x_final;
  dec_in.cross_mask = &out.x_mask;
  for (BlockOp* op : decoder_blocks) {
    dec_in.x = y;
    y = op->forward(ctx, dec_in);
  }
  out.y_final = y;
  return out;
}

}  // namespace ednas
